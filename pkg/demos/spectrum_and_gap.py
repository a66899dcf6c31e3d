"""Dirac spectrum, crossing estimates and the stability gap on S^n.

Builds the truncated spinor space for each n, prints the assembled Dirac
eigenvalues with multiplicities, the sharp crossing maxima, and the spectral
gap of the second variation off the tangent space of the optimiser family.

    python demos/spectrum_and_gap.py
"""
import numpy as np

from spinsphere import SpinorSpace, crossing_max, killing_base, spectral_gap
from spinsphere.forms import assemble_G2, crossing_bound, index_nullity


def main():
    for n in (2, 3, 4):
        sp = SpinorSpace(n, K=3)
        xi = killing_base(sp)
        vals = np.round(np.linalg.eigvalsh(sp.dirac.matrix), 8)
        eig, mult = np.unique(vals, return_counts=True)
        print(f"n = {n}: Dirac eigenvalues " + ", ".join(f"{e:g} (x{m})" for e, m in zip(eig, mult)))
        for k in (1, 2):
            for sign in (1, -1):
                r = crossing_max(sp, k, sign, xi)
                print(f"   crossing k={k} sign={sign:+d}: max {r.maxval:.10f}"
                      f"  sharp {crossing_bound(n, k, sign):.10f}  multiplicity {r.multiplicity}")
        g = spectral_gap(sp, xi)
        print(f"   gap off E0+Q: {g.gap_D:.6f}; F_3 minimum {g.block_minima[3]:.6f} >= c1 = {g.c1:.6f}")
        idx = index_nullity(assemble_G2(sp, xi))
        print(f"   F at a Killing spinor: index {idx.index}, nullity {idx.nullity}\n")


if __name__ == "__main__":
    main()
