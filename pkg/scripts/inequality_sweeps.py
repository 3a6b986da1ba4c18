"""Max-ratio sweeps of the multilinear estimates at N and 2N, with scale-covariance probes."""
import argparse

from mslab import estimates
from mslab.spectral import SpectralGrid

TUPLES = {
    "hartree": [(0, 1, 1, 1), (1, 1, 1, 1), (2, 1, 1, 2)],
    "magnetic_gradient": [(1, 1), (0, 1), (0, 1, 1, 1)],
    "norm_equivalence": [(2, 1), (1, 1), (3, 2)],
    "projection": [(2, 1, 3), (3, 1, 2), (2, 0.5, 4)],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=32, help="coarse grid size (fine is 2n)")
    ap.add_argument("--dims", type=int, default=3)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--out", default="sweeps.jsonl")
    ap.add_argument("--csv", default="ratios.csv")
    args = ap.parse_args()
    sweeps = []
    for name, tuples in TUPLES.items():
        for idx in tuples:
            growth, coarse, fine = estimates.refinement_growth(name, idx, args.samples, args.n, args.dims)
            cov = estimates.scale_covariance(name, idx, SpectralGrid(args.dims, args.n))
            coarse.extra["scale_covariance"] = cov
            sweeps += [coarse, fine]
            print(f"{name} {idx}: max {coarse.max:.4e} -> {fine.max:.4e}, growth {growth:.3f}, "
                  f"scale error {max(cov.values()):.1e}")
    estimates.write_sweeps(sweeps, args.out, args.csv)


if __name__ == "__main__":
    main()
