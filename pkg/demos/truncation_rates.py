"""Convergence of finite-horizon truncations toward the hitting-time solution.

The horizon-T approximation pays nothing on paths still alive at T.  As T
grows its time-zero value converges to the true solution; the successive
gaps between doubled horizons decay geometrically, which shows up as a
straight line with negative slope on a log-log plot.
"""

import numpy as np

from chainbsde import HittingProblem, affine_driver, truncation_sequence, validate_rate_matrix

rates = np.array(
    [
        [-0.9, 0.3, 0.0],
        [0.9, -0.8, 0.0],
        [0.0, 0.5, 0.0],
    ]
)


def main():
    chain = validate_rate_matrix(rates)
    driver = affine_driver(chain, g=np.array([1.0, 0.5, 0.0]))
    p = HittingProblem(chain, {2}, np.array([0.0, 0.0, 2.0]), driver)

    horizons = [0.5 * 2**k for k in range(7)]
    diag = truncation_sequence(p, horizons, dt=0.005)

    print("horizon    value at state 0   gap to previous")
    for i, (T, v) in enumerate(zip(diag.horizons, diag.values_at_zero)):
        gap = "" if i == 0 else f"{diag.successive_gaps[i - 1]:12.3e}"
        print(f"{T:7.2f}   {v[0]:16.8f}   {gap}")

    slope = np.polyfit(
        np.log(np.array(diag.horizons[1:])), np.log(np.array(diag.successive_gaps)), 1
    )[0]
    print(f"\nlog-log slope of the gaps: {slope:.2f} (geometric decay)")


if __name__ == "__main__":
    main()
