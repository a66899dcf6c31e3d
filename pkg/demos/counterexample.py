"""Critical points of F that are not minimisers.

Evaluates F on members of the solution set M~ (sums of a -1/2 and a +1/2
bubble with constrained constants), where it equals the Killing value, and on
a sum violating the constraints, where it drops strictly below.

    python demos/counterexample.py
"""
import numpy as np

from spinsphere import SpinorSpace, F_functional, mtilde_counterexample, mtilde_field
from spinsphere.conformal import mtilde_partner


def main():
    for n in (2, 3, 4, 5):
        sp = SpinorSpace(n, K=3)
        phi0 = np.zeros(sp.N, dtype=complex)
        phi0[0] = 2 ** -0.5
        target = n * n / 4 * sp.omega ** (2 / n)
        member = mtilde_field(sp, phi0, mtilde_partner(sp.rep, phi0, 0))
        ce = mtilde_counterexample(sp, phi0)
        print(f"n = {n}: Killing value {target:.8f} | F on M~ {F_functional(member).value:.8f}"
              f" | counterexample {ce.value:.8f} (margin {ce.extra['relative_margin']:.2%})")


if __name__ == "__main__":
    main()
