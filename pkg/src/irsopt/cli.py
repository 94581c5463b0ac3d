"""Command-line front end: ``irsopt solve | sweep | verify | config``.

Exit codes: 0 success, 1 configuration or usage error, 2 SINR targets
unreachable, 3 numerical failure, 4 worst-case violations found.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import algorithms as alg
from . import config as config_mod
from .channels import (
    ChannelEstimate, channels_to_dict, degrade_csi, estimate_from_dict, estimate_to_dict,
    generate_channels, read_matrices, rng_stream, sinr, write_matrices,
)
from .config import ConfigError, RunConfig
from .errors import InfeasibleProblem, SolverFailure
from .harness import ALGORITHMS, DEFAULT_SDR_BUDGET, collect, csv_text, design, sidecar, summarize
from .robust import verify_worst_case

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_VIOLATIONS = 0, 1, 2, 3, 4

log = logging.getLogger("irsopt")
_print_lock = threading.Lock()


def say(line: str) -> None:
    with _print_lock:
        sys.stdout.write(line + "\n")
        sys.stdout.flush()


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    config_digest: str
    seed: int
    tool_version: str
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n")


def _overrides(args) -> dict[str, str]:
    out = {}
    for flag, key in (("seed", "scenario.seed"), ("mu", "algo.mu"), ("kappa", "scenario.kappa"),
                      ("drops", "experiment.drops")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = str(value)
    algo = getattr(args, "algorithm", None)
    if algo:
        key = "experiment.algorithms" if args.command == "sweep" else "algo.name"
        out[key] = ",".join(algo) if isinstance(algo, list) else algo
    return out


def _load(args) -> RunConfig:
    return config_mod.load(args.config, _overrides(args))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(cfg: RunConfig) -> RunManifest:
    return RunManifest(cfg.digest(), cfg.scenario.seed, tool_version(), _now(),
                       config=cfg.canonical())


def cmd_solve(args) -> int:
    cfg = _load(args)
    scen = cfg.scenario
    out = _out_dir(args)
    manifest = _manifest(cfg)
    ch = generate_channels(scen, args.drop)
    est = degrade_csi(ch, scen.kappa, rng_stream(scen.seed, args.drop, "csi"))
    init = alg.initial_phase(scen, scen.m, args.drop)
    code = EXIT_OK
    try:
        beam, phase, trace, score_on = design(
            cfg.algorithm, ch, est, scen, args.drop, init,
            budget=cfg.sdr_budget or DEFAULT_SDR_BUDGET, max_outer=cfg.max_outer)
    except InfeasibleProblem as exc:
        say(f"infeasible: {exc}")
        manifest.notes.append(f"infeasible: {exc}")
        code = EXIT_INFEASIBLE
    except SolverFailure as exc:
        say(f"numerical failure: {exc}")
        manifest.notes.append(f"numerical failure: {exc}")
        code = EXIT_NUMERICAL
    if cfg.algorithm == "baseline1-no-irs":
        # dump what the design actually saw so `verify` can replay it
        ch, est = ch.without_irs(), est.without_irs()
    paths = {"channels": out / "channels.txt", "estimate": out / "estimate.txt"}
    with paths["channels"].open("w") as f:
        write_matrices(f, channels_to_dict(ch))
    with paths["estimate"].open("w") as f:
        write_matrices(f, estimate_to_dict(est))
    if code == EXIT_OK:
        paths["trace"] = out / "trace.txt"
        paths["solution"] = out / "solution.txt"
        with paths["trace"].open("w") as f:
            trace.write(f)
        with paths["solution"].open("w") as f:
            write_matrices(f, {"w": beam.w, "phi": phase.phi, "gamma": scen.gammas,
                               "sigma2": scen.sigma2s})
        true = sinr(score_on, beam.w, phase.phi, scen.sigma2s)
        say(f"{cfg.algorithm} drop={args.drop} power={10 * np.log10(beam.P * 1e3):.4f} dBm "
            f"iterations={trace.iterations} status={trace.status} "
            f"min_true_slack={float(np.min(true - scen.gammas)):.3e}")
    manifest.outputs = [str(p) for p in paths.values()]
    manifest.finished = _now()
    manifest.write(out / "manifest.json")
    return code


def cmd_sweep(args) -> int:
    cfg = _load(args)
    spec = config_mod.validate_experiment(cfg)
    out = _out_dir(args)
    manifest = _manifest(cfg)
    results = collect(spec)
    rows = summarize(spec, results)
    csv_path, json_path = out / "results.csv", out / "results.json"
    csv_path.write_text(csv_text(spec, rows))
    json_path.write_text(sidecar(results))
    failures = [r for r in results if r.error]
    manifest.notes = [f"drop {r.drop} {r.algorithm} @ {r.sweep_value:g}: {r.error}" for r in failures]
    manifest.outputs = [str(csv_path), str(json_path)]
    manifest.finished = _now()
    manifest.write(out / "manifest.json")
    for row in rows:
        say(",".join(row.csv_cells()))
    if not any(r.drops_used for r in rows):
        say("no drop produced a usable result")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.samples < 1:
        raise ConfigError("--samples must be at least 1")
    try:
        with open(args.solution) as f:
            sol = read_matrices(f)
        with open(args.estimate) as f:
            est: ChannelEstimate = estimate_from_dict(read_matrices(f))
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read dumps: {exc}") from exc
    missing = {"w", "phi", "gamma", "sigma2"} - set(sol)
    if missing:
        raise ConfigError(f"solution dump lacks {sorted(missing)}")
    w, phi = sol["w"], sol["phi"].reshape(-1)
    if w.shape != (est.nt, est.k) or phi.size != est.m:
        raise ConfigError(
            f"dimension mismatch: solution has w {w.shape} and {phi.size} phases, "
            f"estimate has Nt={est.nt}, K={est.k}, M={est.m}")
    beam = alg.BeamState(w)
    phase = alg.PhaseState.from_phi(phi)
    rng = rng_stream(args.seed, 0, "adversary")
    slack, violations = verify_worst_case(
        (beam, phase), est, args.samples, rng, gamma=sol["gamma"].real.reshape(-1),
        sigma2=sol["sigma2"].real.reshape(-1), tol=args.tol)
    kappa = float(np.max(est.kappa))
    say("kappa,samples,min_slack,violations")
    say(f"{kappa:.6g},{args.samples},{slack:.6e},{violations}")
    return EXIT_OK if violations == 0 else EXIT_VIOLATIONS


def cmd_config(args) -> int:
    cfg = _load(args)
    say(json.dumps({"digest": cfg.digest(), "config": cfg.canonical()}, indent=1, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="irsopt", description=(
        "Transmit power minimization with intelligent reflecting surfaces."))
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_algo=True):
        sp.add_argument("--config", help="flat key = value file; defaults ship with the package")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--mu", type=float)
        sp.add_argument("--kappa", type=float)
        if with_algo:
            sp.add_argument("--algorithm", help=f"one of {', '.join(ALGORITHMS)}")

    s = sub.add_parser("solve", help="one design on one drop")
    common(s)
    s.add_argument("--drop", type=int, default=0)
    s.add_argument("--out", default="irsopt-solve")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="Monte-Carlo sweep over drops")
    common(w, with_algo=False)
    w.add_argument("--algorithm", action="append", help="repeat to run several")
    w.add_argument("--drops", type=int)
    w.add_argument("--out", default="irsopt-sweep")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="sampled worst-case check of a solution")
    v.add_argument("--solution", required=True)
    v.add_argument("--estimate", required=True)
    v.add_argument("--samples", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--tol", type=float, default=1e-5)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("config", help="print the resolved configuration and its digest")
    common(c)
    c.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        say(f"config error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
