"""Residual self-convergence of the Coulomb solve and of its Lorentz and temporal transforms."""
import argparse
import json

from mslab import cli
from mslab.fixedpoint import residual_msc, solve_msc
from mslab.gauge import (
    build_lambda,
    coulomb_to_lorentz,
    coulomb_to_temporal,
    gauge_residuals,
    lorentz_equation_residuals,
    lorentz_to_coulomb_data,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/convergence_study.toml")
    ap.add_argument("--out", default="convergence_study.json")
    args = ap.parse_args()
    cfg = cli.load_config(args.config)
    g = cli.build_grid(cfg)
    cdata, lam0, lam1 = lorentz_to_coulomb_data(cli.build_lorentz_data(cfg, g))
    levels = []
    for dt in cfg.scenario.dt_list:
        state, rep = solve_msc(cdata, cfg.solver.T, dt, tol=cfg.solver.tol)
        lam, dlam = build_lambda(lam0, lam1, state.phi(), dt)
        lorentz = coulomb_to_lorentz(state, lam, dlam)
        temporal = coulomb_to_temporal(state, lam0, dt)
        rec = {"dt": dt, "iterations": rep.iteration_count, "coulomb": residual_msc(state),
               "lorentz_condition": gauge_residuals(lorentz, "lorentz")["lorentz"],
               "lorentz_equations": lorentz_equation_residuals(lorentz),
               "temporal": gauge_residuals(temporal, "temporal")}
        levels.append(rec)
        print(f"dt={dt:g}: {json.dumps({k: v for k, v in rec.items() if k != 'dt'})}")
    with open(args.out, "w") as fh:
        json.dump(levels, fh, indent=2)


if __name__ == "__main__":
    main()
