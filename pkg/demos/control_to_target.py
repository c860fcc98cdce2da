"""Steer a degrading machine to the scrapyard at least total cost.

States 0..3 are wear levels, 4 is decommissioned.  At every level the
operator picks a throttle: "gentle" wears slowly but pays a high running
cost, "hard" races toward decommissioning but is cheap per hour.  The
optimal feedback switches from one to the other partway down, which no
single fixed policy reproduces.
"""

import itertools

import numpy as np

from chainbsde import ControlSet, solve_control, stationary_policy_value, validate_rate_matrix


def wear_chain(speed):
    n = 5
    q = np.zeros((n, n))
    for i in range(n - 1):
        q[i + 1, i] = speed
        q[i, i] = -speed
    return validate_rate_matrix(q)


def main():
    gentle = wear_chain(0.5)  # 2 hours per level
    hard = wear_chain(2.0)  # 30 minutes per level, at a premium
    # running cost per hour; the per-level bill is rate-weighted, so gentle
    # wins while it is cheap (low wear) and hard wins once it is not
    cost = np.array(
        [
            [0.4, 4.0],
            [0.4, 4.0],
            [3.0, 4.0],
            [3.0, 4.0],
            [0.0, 0.0],
        ]
    )
    cs = ControlSet(("gentle", "hard"), (gentle, hard), cost, gentle)
    terminal = np.zeros(5)

    sol = solve_control(cs, gentle, {4}, terminal)
    print("optimal cost-to-decommission and throttle per wear level:")
    for x in range(4):
        print(f"  level {x}: value {sol.value.u[x]:7.4f}  throttle {sol.policy[x]}")

    print("\nevery fixed policy, for comparison (cost from level 0):")
    for combo in itertools.product((0, 1), repeat=4):
        value = stationary_policy_value(cs, gentle, {4}, terminal, list(combo) + [0])
        names = "/".join(cs.labels[u] for u in combo)
        marker = " <- optimal" if abs(value[0] - sol.value.u[0]) < 1e-9 else ""
        print(f"  {names:29s} {value[0]:8.4f}{marker}")


if __name__ == "__main__":
    main()
