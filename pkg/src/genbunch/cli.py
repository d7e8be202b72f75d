"""Command-line front end.

Usage::

    genbunch table1 [--out FILE]
    genbunch fig2 [--seed S] [--trials T] [--runs R] [--out FILE]
    genbunch assess --config FILE [--seed S] [--runs R]
    genbunch scattershot --config FILE [--seed S] [--runs R]
    genbunch approx_per --config FILE [--seed S] [--trials T]
    genbunch loophole [--config FILE]
    genbunch lossy --config FILE
    genbunch spectra [--config FILE] [--seed S]

Exit codes: 0 on success or PASS, 1 on FAIL or INCONCLUSIVE, 2 on usage errors
and malformed input.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys

import numpy as np

from . import bunching, haarstats, indist, protocol
from .config import parse_overrides, settings, use_settings
from .errors import ContractError
from .numkit import (
    RngStream,
    haar_isometry,
    haar_unitary,
    matrix_from_dict,
    matrix_to_dict,
    permanent_ryser,
)

log = logging.getLogger("genbunch")

FIG2_COLUMNS = [
    "N", "M", "K", "L",
    "analytic_boson", "analytic_classical",
    "mc_boson_mean", "mc_boson_se", "mc_classical_mean", "mc_classical_se",
    "scattershot_boson", "scattershot_classical",
]


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def _write_csv(rows: list[dict], columns: list[str], out) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    _emit(buf.getvalue(), out)


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return matrix_to_dict(obj) if obj.ndim == 2 else [[z.real, z.imag] for z in obj]
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _write_json(obj, out) -> None:
    _emit(json.dumps(obj, indent=2, default=_json_default) + "\n", out)


# -- tables and figures -------------------------------------------------------------


def table1_rows(n_values=range(3, 21)) -> list[dict]:
    return [{"N": r.n, "L": r.l, "M": r.m, "K": r.k} for r in haarstats.table1(n_values)]


def fig2_rows(n_values=range(3, 8), trials: int = 1000, runs: int = 500, seed: int = 0,
              workers: int = 1) -> list[dict]:
    """Analytic, Monte Carlo and scattershot bunching probabilities in the standard geometry.

    Row ``N`` uses ``RngStream(seed, N)`` and its children: 0 boson MC,
    1 classical MC, 2 scattershot network, 3 and 4 scattershot runs.
    """
    rows = []
    for n in n_values:
        try:
            geo = haarstats.select_k(n)
            spec = haarstats.AverageSpec(n, geo.m, geo.k)
            base = RngStream(seed, n)
            boson = haarstats.monte_carlo_avg(spec, trials=trials, rng=base.child(0), workers=workers)
            classical = haarstats.monte_carlo_avg(spec.with_species("classical"), trials=trials,
                                                  rng=base.child(1), workers=workers)
            u = haar_unitary(geo.m, base.child(2))
            subset = tuple(range(geo.k))
            sb = protocol.run_scattershot(u, n, runs, indist.j_indistinguishable(n), base.child(3), subset)
            sc = protocol.run_scattershot(u, n, runs, indist.j_distinguishable([1] * n), base.child(4), subset)
        except ContractError as exc:
            log.warning("skipping N=%d: %s", n, exc)
            continue
        rows.append({
            "N": n, "M": geo.m, "K": geo.k, "L": geo.l,
            "analytic_boson": haarstats.avg_quantum(spec),
            "analytic_classical": haarstats.avg_classical_approx(spec).value,
            "mc_boson_mean": boson.mean, "mc_boson_se": boson.std_error,
            "mc_classical_mean": classical.mean, "mc_classical_se": classical.std_error,
            "scattershot_boson": sb.report.frequency,
            "scattershot_classical": sc.report.frequency,
        })
    return rows


# -- config parsing ---------------------------------------------------------------------


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise UsageError(f"config is missing '{key}'")
    return cfg[key]


def _network(obj, rng) -> np.ndarray:
    if isinstance(obj, dict) and "haar" in obj:
        return haar_unitary(int(obj["haar"]), rng)
    return matrix_from_dict(obj)


def source_from_config(obj: dict, n: int):
    """Build a source from ``{"kind": ..., ...}``.

    Kinds: ``indistinguishable``, ``distinguishable``, ``first_order``
    (``fidelity``), ``independent`` (``fidelity``), ``pure_product`` (``gram``
    matrix), ``j_function`` (``j`` object), ``random_phase`` (``s``),
    ``multinomial``, ``fock_mixture`` (``weights``, ``occupations``).
    """
    kind = obj.get("kind", "indistinguishable")
    if kind == "indistinguishable":
        return indist.IdealIndistinguishable(n)
    if kind == "distinguishable":
        return indist.IdealDistinguishable(tuple(obj.get("occupation", [1] * n)))
    if kind == "first_order":
        return indist.FirstOrderFidelity(n, float(_require(obj, "fidelity")))
    if kind == "independent":
        return indist.IndependentSources(n, float(_require(obj, "fidelity")))
    if kind == "pure_product":
        return indist.PureProduct(matrix_from_dict(_require(obj, "gram")))
    if kind == "j_function":
        j = indist.j_from_dict(_require(obj, "j"))
        return _FixedJ(j)
    if kind == "random_phase":
        return protocol.RandomPhase(n, int(obj.get("s", n)))
    if kind == "multinomial":
        return protocol.UniformMultinomial(n)
    if kind == "fock_mixture":
        return protocol.ExplicitFockMixture(
            tuple(float(w) for w in _require(obj, "weights")),
            tuple(tuple(int(x) for x in o) for o in _require(obj, "occupations")),
        )
    raise UsageError(f"unknown source kind {kind!r}")


@dataclasses.dataclass(frozen=True)
class _FixedJ:
    j: indist.JFunction

    def j_function(self):
        return self.j.validate()


# -- commands ------------------------------------------------------------------------------


def cmd_table1(args, cfg) -> int:
    _write_csv(table1_rows(), ["N", "L", "M", "K"], args.out)
    return 0


def cmd_fig2(args, cfg) -> int:
    n_values = cfg.get("n_values", list(range(3, 8)))
    rows = fig2_rows(n_values, args.trials, args.runs, args.seed, int(cfg.get("workers", 1)))
    _write_csv(rows, FIG2_COLUMNS, args.out)
    return 0


def cmd_assess(args, cfg) -> int:
    problem = _require(cfg, "problem")
    stream = RngStream(args.seed)
    u = _network(_require(problem, "network"), stream.child(0))
    modes = tuple(int(k) for k in _require(problem, "input_modes"))
    subset = tuple(int(k) for k in _require(problem, "output_subset"))
    source = source_from_config(cfg.get("source", {}), len(modes))
    device = protocol.DeviceModel(u, modes, source, lossy=bool(cfg.get("lossy", False)))
    report = protocol.run_standard_protocol(device, subset, args.runs, stream.child(1))
    _write_json(report.to_dict(), args.out)
    return 0 if report.verdict == "PASS" else 1


def cmd_scattershot(args, cfg) -> int:
    stream = RngStream(args.seed)
    n = int(_require(cfg, "n"))
    u = _network(_require(cfg, "network"), stream.child(0))
    subset = cfg.get("output_subset")
    source = source_from_config(cfg.get("source", {}), n)
    res = protocol.run_scattershot(u, n, args.runs, source, stream.child(1),
                                   None if subset is None else tuple(subset))
    out = res.report.to_dict()
    out.update({
        "mean_prob": res.mean_prob,
        "mean_prob_se": res.mean_prob_se,
        "analytic_boson": res.analytic_boson,
        "analytic_classical": res.analytic_classical,
        "classical_correction": res.classical_correction,
        "inputs": [list(r.inputs) for r in res.records],
    })
    _write_json(out, args.out)
    return 0 if res.report.verdict == "PASS" else 1


def cmd_approx_per(args, cfg) -> int:
    est = protocol.EstimatorConfig(
        float(cfg.get("kappa", 2.0)),
        float(cfg.get("delta", 0.5)),
        cfg.get("truncation_order"),
    )
    if "problem" in cfg:
        prob = bunching.BunchingProblem.from_dict(cfg["problem"])
        draws = [(prob.network[list(prob.input_modes)],
                  np.setdiff1d(np.arange(prob.m), prob.output_subset))]
    else:
        stream = RngStream(args.seed)
        n = int(cfg.get("n", 14))
        m = int(cfg.get("m", round(2 * n ** (2 + est.delta))))
        l = int(cfg.get("l", n))
        draws = [(haar_isometry(m, n, stream.child(i)).T, np.arange(m - l, m))
                 for i in range(args.trials)]
    results = []
    for rows, comp in draws:
        res = protocol.approx_permanent_from_rows(rows, comp, est)
        kept = np.delete(rows, comp, axis=1)
        exact = permanent_ryser(kept @ kept.conj().T).real
        row = dataclasses.asdict(res)
        row["exact"] = exact
        row["relative_error"] = abs(res.estimate - exact) / exact
        results.append(row)
    hits = sum(r["relative_error"] <= r["epsilon"] for r in results)
    _write_json({"seed": args.seed, "draws": len(results), "within_epsilon": hits,
                 "results": results}, args.out)
    return 0


def cmd_loophole(args, cfg) -> int:
    rep = protocol.loophole_demo(int(cfg.get("n1", 2)), int(cfg.get("k1", 1)))
    _write_json({
        "input_modes": list(rep.input_modes),
        "all_outputs_in_allowed_set": rep.all_outputs_in_allowed_set,
        "block_laws_hold": rep.block_laws_hold,
        "support_size": rep.support_size,
        "honest_forbidden_prob": rep.honest_forbidden_prob,
        "adversary_network": matrix_to_dict(rep.adversary_network),
    }, args.out)
    return 0 if rep.all_outputs_in_allowed_set else 1


def cmd_lossy(args, cfg) -> int:
    u = matrix_from_dict(_require(cfg, "network"))
    emb = protocol.lossy_embedding(u)
    m = u.shape[0]
    _write_json({
        "embedding": matrix_to_dict(emb),
        "unitarity_error": float(np.max(np.abs(emb.conj().T @ emb - np.eye(2 * m)))),
        "block_error": float(np.max(np.abs(emb[:m, :m] - u))),
    }, args.out)
    return 0


def cmd_spectra(args, cfg) -> int:
    stream = RngStream(args.seed)
    if "problem" in cfg:
        prob = bunching.BunchingProblem.from_dict(cfg["problem"])
    else:
        n, m, k = int(cfg.get("n", 4)), int(cfg.get("m", 8)), int(cfg.get("k", 5))
        prob = bunching.BunchingProblem(haar_unitary(m, stream), tuple(range(n)), tuple(range(k)))
    h = bunching.build_h(prob)
    report = bunching.spectral_claims(bunching.schur_power_matrix(h), h)
    out = dataclasses.asdict(report)
    out["seed"] = args.seed
    _write_json(out, args.out)
    return 0


COMMANDS = {
    "table1": cmd_table1,
    "fig2": cmd_fig2,
    "assess": cmd_assess,
    "scattershot": cmd_scattershot,
    "approx_per": cmd_approx_per,
    "loophole": cmd_loophole,
    "lossy": cmd_lossy,
    "spectra": cmd_spectra,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genbunch", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--seed", type=int, default=None, help="64-bit master seed")
    parser.add_argument("--trials", type=int, default=None, help="Haar networks per estimate")
    parser.add_argument("--runs", type=int, default=None, help="simulated device runs")
    parser.add_argument("--out", default=None, help="output file (default stdout)")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--set", action="append", default=[], metavar="NAME=VALUE",
                        help="override a tolerance or cap")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)
    try:
        cfg = _load_config(args.config)
        # flags win over config values
        args.seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        args.trials = args.trials if args.trials is not None else int(cfg.get("trials", 1000))
        default_runs = 10000 if args.command == "assess" else 500
        args.runs = args.runs if args.runs is not None else int(cfg.get("runs", default_runs))
        if not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if args.trials < 1 or args.runs < 0:
            raise UsageError("--trials must be positive and --runs non-negative")
        try:
            overrides = parse_overrides(f"{k}={v}" for k, v in cfg.get("settings", {}).items())
            overrides.update(parse_overrides(args.set))
        except KeyError as exc:
            raise UsageError(f"unknown setting {exc}") from exc
        with use_settings(**overrides):
            resolved = {
                "command": args.command, "seed": args.seed, "trials": args.trials,
                "runs": args.runs, "out": args.out, "config": args.config,
                "settings": dataclasses.asdict(settings()),
            }
            log.info("resolved config: %s", json.dumps(resolved, sort_keys=True))
            return COMMANDS[args.command](args, cfg)
    except (UsageError, ContractError, ValueError, TypeError, KeyError) as exc:
        print(f"genbunch: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
