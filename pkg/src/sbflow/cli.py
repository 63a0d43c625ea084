"""``sbflow`` command line: validate, figure1, sweep, thm31."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import svg
from . import validation as V
from .cloud import GENERATOR_ID, bimodal_spec, sample_mixture
from .gaussian import Functional, Variant
from .metrics import HeatReference, compare_trajectories, interpolant_sup_error
from .scheme import Mode, SchemeConfig, StabilityError, StepFailure, git_describe, run_scheme

DEFAULTS: dict[str, dict[str, Any]] = {
    "validate": {"out": "out/validate"},
    "figure1": {
        "out": "out/figure1",
        "seed": 42,
        "epsilon": 0.1,
        "horizon": 5.0,
        "n": 500,
        "trials": 20,
        "bins": 40,
        "range": [-8.0, 8.0],
    },
    "sweep": {
        "out": "out/sweep",
        "seed": 42,
        "epsilons": [0.1, 0.05, 0.025],
        "horizon": 1.0,
        "n": 500,
        "functional": "entropy",
        "mode": "gaussian",
        "eta2": None,
        "one_step": False,
    },
    "thm31": {"out": "out/thm31", "epsilons": list(V.BOUND_GRID), "eta2": 1.0},
}

# Keys whose value must be strictly positive when present.
_POSITIVE = ("epsilon", "horizon", "n", "trials", "bins", "eta2")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbflow", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="flat JSON file of defaults for this command")
        s.add_argument("--out", type=Path)
        s.add_argument("--seed", type=int)
        s.add_argument("--epsilon", type=float)
        s.add_argument("--horizon", type=float)
        s.add_argument("--n", type=int)
        s.add_argument("--functional", choices=[v.value for v in Variant])
        s.add_argument("--mode", choices=[m.value for m in Mode])
        if name == "validate":
            s.add_argument("--perturb", nargs=2, action="append", metavar=("NAME", "OFFSET"), default=None)
        if name == "figure1":
            s.add_argument("--trials", type=int)
        if name in ("sweep", "thm31"):
            s.add_argument("--epsilons", type=_floats, help="comma-separated list")
            s.add_argument("--eta2", type=float, help="initial variance")
        if name == "sweep":
            s.add_argument("--one-step", dest="one_step", action="store_const", const=True, default=None)
    return p


def resolve_config(command: str, args: argparse.Namespace) -> dict[str, Any]:
    """Built-in defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS[command])
    if args.config is not None:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a flat JSON object")
        cfg.update(data)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        cfg[key] = value
    for key in _POSITIVE:
        if cfg.get(key) is not None and not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive, got {cfg[key]}")
    if "epsilons" in cfg and "epsilon" in cfg and command == "sweep":
        cfg["epsilons"] = [cfg.pop("epsilon")]
    if any(e <= 0 for e in cfg.get("epsilons", [])):
        raise ConfigError("epsilons must be positive")
    cfg["out"] = str(cfg["out"])
    return cfg


def _prepare_out(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")


def _write_run(out: Path, command: str, cfg: dict, extra: dict | None = None) -> None:
    meta = {"command": command, "config": cfg, "generator": GENERATOR_ID, "git_describe": git_describe()}
    meta.update(extra or {})
    _write_json(out / "run.json", meta)


def _csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    def fmt(v: Any) -> str:
        return f"{v:.17g}" if isinstance(v, float) else str(v)

    lines = [",".join(header)] + [",".join(fmt(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------- commands


def cmd_validate(cfg: dict) -> int:
    out = _prepare_out(cfg)
    perturb = {name: float(val) for name, val in (cfg.get("perturb") or [])}
    checks = V.run_checks(perturb)
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  measured={c.measured:.6g}  "
              f"expected={c.expected:.6g}  tol={c.tolerance:.3g}")
    failed = [c.name for c in checks if not c.passed]
    _write_json(out / "validate.json", {"checks": [c.to_dict() for c in checks], "failed": failed})
    _write_run(out, "validate", cfg)
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    print(f"all {len(checks)} checks passed")
    return 0


def cmd_figure1(cfg: dict) -> int:
    out = _prepare_out(cfg)
    spec = bimodal_spec()
    scheme = SchemeConfig(cfg["epsilon"], cfg["horizon"], Functional(Variant.ENTROPY), mode=Mode.PARTICLE,
                          n=cfg["n"], seed=cfg["seed"])
    try:
        traj = run_scheme(scheme, sample_mixture(spec, cfg["n"], cfg["seed"]))
    except StepFailure as exc:
        print(f"scheme failed at step {exc.step}: {exc.cause}", file=sys.stderr)
        return 1
    times = [float(t) for t in range(int(math.floor(cfg["horizon"] + 1e-9)) + 1)]
    report = compare_trajectories(traj, HeatReference(spec, cfg["seed"], floor_trials=cfg["trials"]), times)
    report.to_csv(out / "figure1_report.csv")
    report.to_json(out / "figure1_report.json")

    lo, hi = cfg["range"]
    edges = np.linspace(lo, hi, cfg["bins"] + 1)
    grid = np.linspace(lo, hi, 401)
    hist_rows, dens_rows = [], []
    for t in times:
        cloud = traj.states[min(int(round(t / cfg["epsilon"])), len(traj) - 1)]
        heights, _ = np.histogram(cloud.points[:, 0], bins=edges)
        heights = heights / (cloud.n * np.diff(edges))
        dens = spec.inflate(t).density(grid)
        hist_rows += [(t, float(a), float(b), float(h)) for a, b, h in zip(edges[:-1], edges[1:], heights)]
        dens_rows += [(t, float(x), float(y)) for x, y in zip(grid, dens)]
        svg.histogram_overlay(edges, heights, grid, dens, title=f"t = {t:g}", path=out / f"figure1_t{int(t)}.svg")
    _csv(out / "histograms.csv", ["time", "bin_left", "bin_right", "density"], hist_rows)
    _csv(out / "densities.csv", ["time", "x", "density"], dens_rows)

    checked = [(t, e, nf) for t, e, nf in zip(report.times, report.errors, report.noise_floor) if t >= 1]
    worst = max(e / nf for _, e, nf in checked)
    ok = worst <= report.multiplier
    _write_run(out, "figure1", cfg, {"n_steps": len(traj) - 1, "worst_error_over_floor": worst, "passed": ok})
    for t, e, nf in zip(report.times, report.errors, report.noise_floor):
        print(f"t={t:g}  w2={e:.4f}  noise_floor={nf:.4f}")
    print(f"{'PASS' if ok else 'FAIL'}  max w2/noise_floor over t>=1 = {worst:.3f} (limit {report.multiplier:g})")
    return 0 if ok else 1


def _sweep_one_step(cfg: dict, out: Path) -> int:
    eta2 = cfg["eta2"] or 1.0
    expected = 1.0 / (8.0 * eta2**1.5)
    rows = [(e, V.one_step_ratio(eta2, e) * e * e, V.one_step_ratio(eta2, e), expected) for e in cfg["epsilons"]]
    _csv(out / "sweep.csv", ["epsilon", "gap", "gap_over_eps2", "expected"], rows)
    svg.loglog_plot([r[0] for r in rows], {"gap": [r[1] for r in rows]}, title="one-step gap", ylabel="W2 gap",
                    path=out / "sweep.svg")
    e_min, _, ratio, _ = min(rows)
    ok = abs(ratio - expected) <= 0.02 * expected
    for r in rows:
        print(f"eps={r[0]:g}  gap/eps^2={r[2]:.6f}  expected={expected:.6f}")
    print(f"{'PASS' if ok else 'FAIL'}  gap/eps^2 at eps={e_min:g} within 2% of {expected:.6g}")
    _write_run(out, "sweep", cfg, {"passed": ok})
    return 0 if ok else 1


def cmd_sweep(cfg: dict) -> int:
    out = _prepare_out(cfg)
    if cfg.get("one_step"):
        return _sweep_one_step(cfg, out)
    variant = Variant(cfg["functional"])
    eta2 = cfg["eta2"] or V.default_eta2(variant)
    eps_list = sorted(cfg["epsilons"], reverse=True)
    mode = Mode(cfg["mode"])
    f, start = V.gaussian_start(variant, eta2, cfg["horizon"])
    errors: list[float] = []
    failures: list[str] = []
    for eps in eps_list:
        try:
            if mode is Mode.GAUSSIAN:
                traj = run_scheme(SchemeConfig(eps, cfg["horizon"], f), start)
                errors.append(interpolant_sup_error(traj, f, start).sup_error)
            else:
                errors.append(_particle_sup_error(cfg, variant, eps))
        except (ValueError, StepFailure) as exc:
            step = f" at step {exc.step}" if isinstance(exc, StepFailure) else ""
            failures.append(f"eps={eps:g}{step}: {exc}")
            errors.append(math.nan)
    ratios = [math.nan] + [b / a for a, b in zip(errors[:-1], errors[1:])]
    _csv(out / "sweep.csv", ["epsilon", "sup_error", "ratio"], list(zip(eps_list, errors, ratios)))
    svg.loglog_plot(eps_list, {"sup error": errors, "eps (reference)": eps_list}, title=f"{variant.value} sweep",
                    path=out / "sweep.svg")
    for e, err, r in zip(eps_list, errors, ratios):
        print(f"eps={e:g}  sup_error={err:.6g}  ratio={r:.4f}")
    lo, hi = V.RATE_BAND
    # Particle errors sit at the Monte-Carlo floor, so the first-order band is only asserted in Gaussian mode.
    rate_ok = mode is not Mode.GAUSSIAN or all(lo <= r <= hi for r in ratios[1:])
    ok = not failures and rate_ok
    for msg in failures:
        print(f"stability failure: {msg}", file=sys.stderr)
    if not rate_ok:
        print(f"FAIL  ratios outside [{lo}, {hi}]", file=sys.stderr)
    _write_run(out, "sweep", cfg, {"failures": failures, "passed": ok})
    return 0 if ok else 1


def _particle_sup_error(cfg: dict, variant: Variant, eps: float) -> float:
    if variant is not Variant.ENTROPY:
        raise StabilityError("particle sweeps support only the entropy flow (the reverse flow has no sampler here)")
    spec = bimodal_spec()
    scheme = SchemeConfig(eps, cfg["horizon"], Functional(variant), mode=Mode.PARTICLE, n=cfg["n"], seed=cfg["seed"])
    traj = run_scheme(scheme, sample_mixture(spec, cfg["n"], cfg["seed"]))
    times = [float(t) for t in traj.times]
    return compare_trajectories(traj, HeatReference(spec, cfg["seed"]), times).sup_error


def cmd_thm31(cfg: dict) -> int:
    out = _prepare_out(cfg)
    rows = V.bound_table(cfg["epsilons"], cfg["eta2"])
    keys = ["epsilon", "sym_kl", "rhs", "lhs_over_eps4", "rhs_over_eps3"]
    _csv(out / "thm31.csv", keys, [[r[k] for k in keys] for r in rows])
    failures = [f"sym_kl > rhs at eps={r['epsilon']:g}" for r in rows if r["sym_kl"] > r["rhs"]]
    for r in rows:
        print("  ".join(f"{k}={r[k]:.6g}" for k in keys))
    smallest = min(rows, key=lambda r: r["epsilon"])
    # The 1/1152 limit is stated for unit variance.
    if cfg["eta2"] == 1.0 and abs(smallest["lhs_over_eps4"] * 1152 - 1) > 0.05:
        failures.append(f"sym_kl/eps^4 at eps={smallest['epsilon']:g} is not within 5% of 1/1152")
    r3 = [r["rhs_over_eps3"] for r in sorted(rows, key=lambda r: -r["epsilon"])]
    if len(r3) > 1 and abs(r3[-1] / r3[-2] - 1) > 0.10:
        failures.append("rhs/eps^3 has not stabilized (last ratio drift > 10%)")
    _write_run(out, "thm31", cfg, {"failures": failures, "passed": not failures})
    for msg in failures:
        print(f"FAIL  {msg}", file=sys.stderr)
    return 1 if failures else 0


COMMANDS = {"validate": cmd_validate, "figure1": cmd_figure1, "sweep": cmd_sweep, "thm31": cmd_thm31}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return COMMANDS[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
