"""Picard ratio r(T) at T0, T0/2, T0/4 for several data draws, with quotients r(T)/r(T/2)."""
import argparse
import json

from mslab import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/contraction_scan.toml")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--out", default="contraction_scan.json")
    args = ap.parse_args()
    records = []
    for seed in args.seeds:
        cfg = cli.load_config(args.config)
        cfg.data.seed = seed
        data = cli.build_coulomb_data(cfg, cli.build_grid(cfg))
        scan = cli.contraction_scan(data, cfg.scenario.scan_T, cfg.solver.dt,
                                    cfg.scenario.scan_iterations, cfg.metric_kind)
        quotients = [scan[i]["ratio"] / scan[i + 1]["ratio"] for i in range(len(scan) - 1)]
        records.append({"seed": seed, "scan": scan, "quotients": quotients})
        print(f"seed {seed}: ratios " + ", ".join(f"{r['ratio']:.3e}" for r in scan)
              + "; quotients " + ", ".join(f"{q:.3f}" for q in quotients))
    with open(args.out, "w") as fh:
        json.dump(records, fh, indent=2)


if __name__ == "__main__":
    main()
