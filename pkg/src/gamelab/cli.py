"""Batch experiment driver.

Subcommands:

- ``gamelab run --config exp.json --out dir``: run one experiment (or every
  ``*.json`` in a directory, in parallel across ``GAMELAB_WORKERS``
  processes) and write ``runlog.csv``, ``metrics.csv``, ``report.json``.
- ``gamelab verify --game <file-or-builtin> --class <name>``: run a game
  class verifier and print the JSON verdict.
- ``gamelab analyze --a A.csv --b B.csv --eta 0.2``: spectral stability
  report for the bilinear game (A, B).

Exit codes: 0 success, 1 configuration error, 2 certificate violation,
3 run classified divergent.  Identical config and seed produce
byte-identical CSV artifacts (fixed column order, floats at 17 significant
digits).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from gamelab import builtins
from gamelab.continuous import (
    BilinearGame,
    HgdMethod,
    eigenvalues_small,
    ogd_method,
    simulate_hgd,
    spectral_predict,
)
from gamelab.fisher import FisherMarket, run_pr
from gamelab.game_classes import (
    PolymatrixGame,
    polymatrix_to_nfg,
    verify_constant_sum,
    verify_strategically_zero_sum,
)
from gamelab.games import NormalFormGame
from gamelab.learners import (
    LearnerConfig,
    PredictionMechanism,
    RunLog,
    default_eta,
    run_dynamics,
)
from gamelab.metrics import (
    external_regret_series,
    path_length_sq_series,
    regret_report,
    rvu_audit_run,
)
from gamelab.potential import CertificateViolation, PotentialGame, run_md_potential
from gamelab.regularizers import Regularizer

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CERTIFICATE = 2
EXIT_DIVERGED = 3

FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return FLOAT_FMT % value
    return str(value)


def _write_csv(path: Path, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# -- config parsing -----------------------------------------------------------


def _load_json(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def load_game(source) -> NormalFormGame:
    """Builtin name, path to a game JSON, or an inline game dict."""
    if isinstance(source, str):
        if source in builtins.NFG_NAMES:
            return builtins.builtin_nfg(source)
        if Path(source).exists():
            source = _load_json(source)
        else:
            raise ConfigError(f"unknown game {source!r}: not a builtin and not a file")
    if not isinstance(source, dict):
        raise ConfigError("game must be a builtin name, a path, or an object")
    if "edges" in source:
        return polymatrix_to_nfg(PolymatrixGame.from_json_dict(source))
    return NormalFormGame.from_json_dict(source)


def parse_prediction(data) -> PredictionMechanism:
    if data is None:
        return PredictionMechanism()
    if isinstance(data, str):
        data = {"kind": data}
    kind = data.get("kind", "one_step")
    return PredictionMechanism(
        kind,
        window=int(data.get("window", 1)),
        discount=float(data.get("discount", 0.5)),
        order=int(data.get("order", 1)),
    )


def parse_learner(data, n_players: int) -> LearnerConfig:
    if not isinstance(data, dict) or "algorithm" not in data:
        raise ConfigError("learner config needs an 'algorithm' field")
    try:
        return LearnerConfig(
            data["algorithm"],
            float(data.get("eta", default_eta(n_players))),
            Regularizer(data.get("regularizer", "euclidean" if data["algorithm"] != "omwu" else "negative_entropy")),
            parse_prediction(data.get("prediction")),
            data.get("transform", "identity"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# -- artifact writers -----------------------------------------------------------


def write_runlog_csv(path: Path, log: RunLog):
    """One row per (iter, player): iter,player,x*,u*,regret,path_sq_l1,nash_gap,welfare.

    Players with fewer actions than the widest leave trailing cells empty.
    """
    dmax = max(log.game.action_counts)
    header = (["iter", "player"]
              + [f"x{j}" for j in range(dmax)]
              + [f"u{j}" for j in range(dmax)]
              + ["regret", "path_sq_l1", "nash_gap", "welfare"])
    gaps = log.nash_gap_series()
    welfare = log.welfare_series()
    regs = [external_regret_series(xi, ui) for xi, ui in zip(log.x, log.u)]
    paths = [path_length_sq_series(xi, "l1") for xi in log.x]

    def rows():
        T = log.num_iterations
        for t in range(T + 1):
            for i in range(log.num_players):
                d = log.game.action_counts[i]
                pad = [""] * (dmax - d)
                reg = regs[i][t - 1] if t >= 1 else 0.0
                pth = paths[i][t - 1] if t >= 1 else 0.0
                yield ([t, i] + list(log.x[i][t]) + pad + list(log.u[i][t]) + pad
                       + [reg, pth, gaps[t], welfare[t]])

    _write_csv(path, header, rows())


def write_metrics_csv(path: Path, entries: list[tuple]):
    _write_csv(path, ["metric", "player", "value"], entries)


def _check(name: str, ok: bool, slack, prefix=None) -> dict:
    return {"check": name, "pass": bool(ok), "worst_slack": float(slack),
            "prefix": None if prefix is None else int(prefix)}


# -- experiment kinds --------------------------------------------------------------


def run_nfg(config: dict, out: Path) -> int:
    game = load_game(config["game"])
    n = game.num_players
    raw = config.get("learners")
    if raw is None:
        raise ConfigError("nfg_run needs a 'learners' entry")
    if isinstance(raw, dict):
        learner_cfgs = [parse_learner(raw, n)] * n
    else:
        if len(raw) != n:
            raise ConfigError(f"{len(raw)} learner configs for {n} players")
        learner_cfgs = [parse_learner(item, n) for item in raw]
    T = int(config.get("T", 1000))
    seed = config.get("seed")
    log = run_dynamics(game, learner_cfgs, T, seed=seed,
                       random_init=bool(config.get("random_init", False)))
    write_runlog_csv(out / "runlog.csv", log)

    report = regret_report(log)
    checks = []
    for i, audit in enumerate(rvu_audit_run(log)):
        if audit is not None:
            checks.append(_check(f"rvu_player_{i}", audit["pass"], audit["worst_slack"], audit["worst_prefix"]))
    entries = []
    for i in range(n):
        entries.append(("final_regret", i, report.per_player[i][-1]))
        entries.append(("path_sq_l1", i, path_length_sq_series(log.x[i], "l1")[-1]))
    entries.append(("regret_sum_min", "", report.total.min()))
    entries.append(("final_nash_gap", "", log.nash_gap_series()[-1]))
    write_metrics_csv(out / "metrics.csv", entries)
    payload = {
        "kind": "nfg_run", "game": str(config["game"]), "T": T, "seed": seed,
        "checks": checks,
        "final_nash_gap": float(log.nash_gap_series()[-1]),
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_CERTIFICATE


def run_potential(config: dict, out: Path) -> int:
    source = config["game"]
    if isinstance(source, str):
        source = _load_json(source)
    base = NormalFormGame.from_json_dict(source, rescale="error")
    pgame = PotentialGame(base, np.asarray(source["phi_table"], float),
                          np.asarray(source.get("weights", [1.0] * base.num_players), float))
    regs = config.get("regularizers", ["euclidean"] * base.num_players)
    if isinstance(regs, str):
        regs = [regs] * base.num_players
    T = int(config.get("T", 1000))
    eta = config.get("eta")
    try:
        plog = run_md_potential(pgame, [Regularizer(r) for r in regs], T,
                                eta=None if eta is None else float(eta))
    except CertificateViolation as exc:
        (out / "report.json").write_text(json.dumps(
            {"kind": "potential_run", "error": str(exc), "exit": EXIT_CERTIFICATE},
            indent=2, sort_keys=True) + "\n")
        return EXIT_CERTIFICATE
    write_runlog_csv(out / "runlog.csv", plog.run)
    slacks = plog.step_slacks()
    entries = [("phi_final", "", plog.phi_series[-1]),
               ("monotonicity_min_slack", "", slacks.min()),
               ("cumulative_bound_slack", "", plog.cumulative_bound_slack())]
    write_metrics_csv(out / "metrics.csv", entries)
    payload = {
        "kind": "potential_run", "T": T, "eta": plog.eta,
        "checks": [_check("potential_monotone", slacks.min() >= -1e-9, slacks.min()),
                   _check("cumulative_path", plog.cumulative_bound_slack() >= -1e-9,
                          plog.cumulative_bound_slack())],
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def run_fisher(config: dict, out: Path) -> int:
    source = config["game"]
    if isinstance(source, str):
        source = _load_json(source)
    market = FisherMarket.from_json_dict(source)
    T = int(config.get("T", 1000))
    log = run_pr(market, T)
    header = (["iter", "buyer"] + [f"b{j}" for j in range(market.num_goods)]
              + ["phi", "residual"])

    def rows():
        for t in range(T + 1):
            for i in range(market.num_buyers):
                yield [t, i] + list(log.spending[t][i]) + [log.phi[t], log.residual[t]]

    _write_csv(out / "runlog.csv", header, rows())
    mono = log.monotonicity_slack()
    write_metrics_csv(out / "metrics.csv", [
        ("phi_final", "", log.phi[-1]),
        ("monotonicity_min_slack", "", mono),
        ("final_residual", "", log.residual[-1]),
    ])
    ok = mono >= -1e-10
    payload = {"kind": "fisher_run", "T": T,
               "checks": [_check("phi_monotone", ok, mono)],
               "final_residual": float(log.residual[-1])}
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if ok else EXIT_CERTIFICATE


def run_continuous(config: dict, out: Path) -> int:
    name = config.get("game")
    if isinstance(name, str) and name in builtins.CONTINUOUS_NAMES:
        game = builtins.builtin_continuous(name)
    else:
        game = BilinearGame(np.asarray(config["A"], float), np.asarray(config["B"], float),
                            radius=config.get("radius"))
    eta = float(config.get("eta", 0.1))
    method = ogd_method(eta)
    if "method" in config:
        method = HgdMethod(tuple(config["method"]["a"]), tuple(config["method"]["b"]))
    T = int(config.get("T", 1000))
    rng = np.random.default_rng(config.get("seed", 0))
    log = simulate_hgd(game, method, T, rng=rng)
    verdict = spectral_predict(game, eta, method)
    header = ["iter", "player"] + [f"x{j}" for j in range(game.dim)] + ["norm"]

    def rows():
        for t in range(log.states.shape[0]):
            for i in range(2):
                yield [t, i] + list(log.states[t, i]) + [log.norms[t]]

    _write_csv(out / "runlog.csv", header, rows())
    write_metrics_csv(out / "metrics.csv", [
        ("final_norm", "", log.norms[-1]),
        ("max_norm", "", log.norms.max()),
        ("predicted_rate", "", verdict.rate if verdict.rate is not None else ""),
    ])
    payload = {
        "kind": "continuous_run", "T": T, "eta": eta,
        "verdict": verdict.verdict,
        "eigenvalues": [[float(ev.real), float(ev.imag)] for ev in verdict.eigenvalues],
        "diverged": bool(log.diverged),
        "halted_at": log.halted_at,
    }
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_DIVERGED if log.diverged else EXIT_OK


def run_bspp(config: dict, out: Path) -> int:
    from gamelab.bspp import Bspp, Treeplex, TreeplexDomain, bspp_omd_run, matrix_game_bspp

    source = config.get("game", "kuhn")
    if source in builtins.BSPP_NAMES:
        problem = builtins.builtin_bspp(source)
    else:
        data = _load_json(source) if isinstance(source, str) else source
        domain = data.get("domain", "simplex")
        if domain == "simplex":
            problem = matrix_game_bspp(np.asarray(data["A"], float))
        elif domain == "treeplex":
            dom_x = TreeplexDomain(Treeplex.from_json_dict(data["treeplex_x"]))
            dom_y = TreeplexDomain(Treeplex.from_json_dict(data["treeplex_y"]))
            problem = Bspp(np.asarray(data["A"], float), dom_x, dom_y)
        else:
            raise ConfigError(f"unknown BSPP domain {domain!r}; expected simplex or treeplex")
    T = int(config.get("T", 1000))
    eta = config.get("eta")
    log = bspp_omd_run(problem, T, eta=None if eta is None else float(eta))
    _write_csv(out / "gap.csv", ["iter", "last_gap", "avg_gap"],
               ([t, log.last_gap[t], log.avg_gap[t]] for t in range(T + 1)))
    path, bound = log.path_length_sq(), log.path_bound()
    write_metrics_csv(out / "metrics.csv", [
        ("final_last_gap", "", log.last_gap[-1]),
        ("final_avg_gap", "", log.avg_gap[-1]),
        ("path_length_sq", "", path),
        ("path_bound", "", bound),
    ])
    ok = path <= bound + 1e-9
    payload = {"kind": "bspp_run", "T": T, "eta": log.eta,
               "checks": [_check("path_bound", ok, bound - path)],
               "final_last_gap": float(log.last_gap[-1])}
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if ok else EXIT_CERTIFICATE


RUNNERS = {
    "nfg_run": run_nfg,
    "potential_run": run_potential,
    "fisher_run": run_fisher,
    "continuous_run": run_continuous,
    "bspp_run": run_bspp,
}


def run_experiment(config_path: Path, out_dir: Path) -> int:
    try:
        config = _load_json(config_path)
        kind = config.get("kind")
        if kind not in RUNNERS:
            raise ConfigError(f"unknown experiment kind: {kind!r}")
        out_dir.mkdir(parents=True, exist_ok=True)
        return RUNNERS[kind](config, out_dir)
    except (ConfigError, KeyError, json.JSONDecodeError, FileNotFoundError, ValueError) as exc:
        print(f"config error in {config_path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _suite_worker(args):
    cfg, out = args
    return run_experiment(Path(cfg), Path(out))


def cmd_run(args) -> int:
    config = Path(args.config)
    out = Path(args.out)
    if config.is_dir():
        jobs = sorted(config.glob("*.json"))
        if not jobs:
            print(f"no *.json configs under {config}", file=sys.stderr)
            return EXIT_CONFIG
        workers = int(os.environ.get("GAMELAB_WORKERS", "0")) or min(4, os.cpu_count() or 1)
        pairs = [(str(j), str(out / j.stem)) for j in jobs]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                codes = list(pool.map(_suite_worker, pairs))
        else:
            codes = [_suite_worker(p) for p in pairs]
        return max(codes)
    return run_experiment(config, out)


def cmd_verify(args) -> int:
    name = args.game
    try:
        if args.cls == "strategically_zero_sum":
            game = load_game(name)
            if game.num_players != 2:
                raise ConfigError("strategically_zero_sum applies to bimatrix games")
            dec = verify_strategically_zero_sum(game.utilities[0], game.utilities[1])
            result = {"class": args.cls, "pass": bool(dec.ok), "scale": None if np.isnan(dec.scale) else dec.scale,
                      "residual": dec.residual, "singular": dec.singular,
                      "v_a": dec.v_a.tolist(), "v_b": dec.v_b.tolist()}
        elif args.cls == "constant_sum":
            game = load_game(name)
            result = {"class": args.cls}
            result.update(verify_constant_sum(game))
            result["pass"] = result.pop("constant_sum")
        elif args.cls == "polymatrix_zero_sum":
            data = _load_json(name)
            pg = PolymatrixGame.from_json_dict(data)
            result = {"class": args.cls, "pass": bool(pg.has_zero_sum_edges())}
        elif args.cls == "weighted_potential":
            data = _load_json(name)
            base = NormalFormGame.from_json_dict(data, rescale="error")
            try:
                pgame = PotentialGame(base, np.asarray(data["phi_table"], float),
                                      np.asarray(data.get("weights", [1.0] * base.num_players), float))
                result = {"class": args.cls, "pass": True, "alignment_error": pgame.alignment_error()}
            except ValueError as exc:
                result = {"class": args.cls, "pass": False, "reason": str(exc)}
        else:
            print(f"unknown class {args.cls!r}", file=sys.stderr)
            return EXIT_CONFIG
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"verify failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(result, indent=2, sort_keys=True, default=float))
    return EXIT_OK if result.get("pass") else EXIT_CERTIFICATE


def cmd_analyze(args) -> int:
    try:
        A = np.loadtxt(args.a, delimiter=",", ndmin=2)
        B = np.loadtxt(args.b, delimiter=",", ndmin=2)
        game = BilinearGame(A, B)
    except ValueError as exc:
        print(f"analyze failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    verdict = spectral_predict(game, args.eta)
    M = game.interaction_matrix()
    eig = eigenvalues_small(M)
    report = {
        "eigenvalues": [[float(ev.real), float(ev.imag)] for ev in eig],
        "condition": verdict.reason or "real negative spectrum",
        "verdict": verdict.verdict,
        "predicted_rate": verdict.rate,
        "eta": args.eta,
        "eta_bound": verdict.eta_bound,
    }
    print(json.dumps(report, indent=2, sort_keys=True, default=float))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gamelab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config (or a directory of them)")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="verify a game against a structural class")
    p_ver.add_argument("--game", required=True)
    p_ver.add_argument("--class", dest="cls", required=True,
                       choices=["strategically_zero_sum", "constant_sum",
                                "polymatrix_zero_sum", "weighted_potential"])
    p_ver.set_defaults(func=cmd_verify)

    p_an = sub.add_parser("analyze", help="spectral stability report for (A, B)")
    p_an.add_argument("--a", required=True)
    p_an.add_argument("--b", required=True)
    p_an.add_argument("--eta", type=float, required=True)
    p_an.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
