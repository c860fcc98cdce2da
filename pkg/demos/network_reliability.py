"""Will the packet make it?  Delivery probability through a lossy relay chain.

A packet hops from node to node toward the sink; at every relay it is
dropped at that relay's loss rate.  The delivery probability per start node
is the solution of a plain hitting problem with state-dependent discounting.
A repeater ("boost") that doubles the forwarding rate out of the flaky
relay raises the odds exactly where it is switched on.
"""

import numpy as np

from chainbsde import ControlSet, reliability, validate_rate_matrix

# node 0 -> 1 -> 2 -> sink(3); node 1 is flaky (high loss)
rates = np.array(
    [
        [-2.0, 0.0, 0.0, 0.0],
        [2.0, -1.0, 0.0, 0.0],
        [0.0, 1.0, -2.0, 0.0],
        [0.0, 0.0, 2.0, 0.0],
    ]
)
loss = np.array([0.1, 1.5, 0.1, 0.0])


def main():
    chain = validate_rate_matrix(rates, state_names=("a", "b", "c", "sink"))

    plain = reliability(chain, loss, dead=set(), target_node=3)
    print("delivery probability, no control:")
    for name, v in zip(chain.state_names, plain.u):
        print(f"  {name:5s} {v:6.4f}")

    boost = rates.copy()
    boost[:, 1] *= 2.0  # repeater empties the flaky relay twice as fast
    controls = ControlSet(
        ("repeater",),
        (validate_rate_matrix(boost),),
        np.zeros((4, 1)),
        chain,
    )
    boosted = reliability(chain, loss, dead=set(), target_node=3, controls=controls)
    print("\nwith an optional repeater at the flaky relay:")
    for x, name in enumerate(chain.state_names):
        print(f"  {name:5s} {boosted.value.u[x]:6.4f}  ({boosted.policy[x]})")
    gain = boosted.value.u[0] - plain.u[0]
    print(f"\nend-to-end gain from node a: +{gain:.4f}")


if __name__ == "__main__":
    main()
