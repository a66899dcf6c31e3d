"""Deficit versus squared distance to the optimiser family (n = 3).

Perturbs a Killing spinor in directions orthogonal to the tangent space and
compares deficit / dist^2 with the second-order prediction from the assembled
second variation; tangent perturbations are shown for contrast.

    python demos/deficit_scatter.py
"""
from spinsphere.cli import RunConfig, scatter_deficit


def main():
    rows = scatter_deficit(RunConfig(n=3, K=3, multistart=4), samples=6)
    print(f"{'kind':8s} {'t':>8s} {'deficit':>12s} {'dist^2':>12s} {'ratio':>9s} {'predicted':>9s}")
    for r in rows:
        print(f"{r['kind']:8s} {r['t']:8.1e} {r['deficit']:12.4e} {r['dist2']:12.4e}"
              f" {r['ratio']:9.4f} {r['predicted']:9.4f}")


if __name__ == "__main__":
    main()
