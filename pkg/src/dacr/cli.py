"""Command line entry point: ``dacr <subcommand>`` (or ``python -m dacr``).

Exit codes: 0 ok, 1 invariant violation, 2 usage / configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import resources
from pathlib import Path

from . import lite, navigator, simnet
from .simnet import ConfigError, ScenarioConfig

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2
BUNDLED = ("honest", "tamper")


def _num(x) -> str:
    return format(float(x), ".12g")


def _emit(rows, header, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def load_config(name_or_path: str) -> ScenarioConfig:
    path = Path(name_or_path)
    if path.exists():
        text = path.read_text()
    elif name_or_path.removesuffix(".json") in BUNDLED:
        name = name_or_path.removesuffix(".json") + ".json"
        text = resources.files("dacr").joinpath("scenarios", name).read_text()
    else:
        raise ConfigError(f"no such config file: {name_or_path}")
    return ScenarioConfig.from_json(text)


# -- subcommands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.print_defaults:
        sys.stdout.write(json.dumps(ScenarioConfig().to_dict(), indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    if not args.config:
        raise ConfigError("simulate needs --config (or --print-defaults)")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out) if args.out else None
    if cfg.protocol != "card7":
        return _simulate_da(cfg, out)
    res = simnet.run(cfg)
    metrics = res.metrics()
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(res.metrics_json())
        (out / "trace.jsonl").write_text(res.trace_lines())
        _emit(_flat(metrics), ("metric", "value"), out / "metrics.csv")
    else:
        sys.stdout.write(res.metrics_json())
    if not res.ok:
        for v in res.sim.violations:
            print(f"invariant violation: {v}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


_DA_STRATEGY = {"HonestAll": "honest", "TamperColumn": "tamper", "CensorReplicas": "censor"}


def _simulate_da(cfg: ScenarioConfig, out) -> int:
    """Dispersal-only mode for the comparison protocols (one instance)."""
    from .variants import run_da
    strat = cfg.adversary.strategy
    if cfg.adversary.params.get("capture"):
        mode = "capture"
    elif strat in _DA_STRATEGY:
        mode = _DA_STRATEGY[strat]
    else:
        raise ConfigError(f"adversary.strategy {strat} is not available in dispersal-only mode "
                          f"(choose from {', '.join(_DA_STRATEGY)})")
    r = run_da(cfg.protocol, cfg.n, cfg.f, d=cfg.d, seed=cfg.seed, strategy=mode,
               malicious=cfg.adversary.malicious, field_=simnet.FIELDS[cfg.field])
    metrics = {"protocol": r.protocol, "n": r.n, "f": r.f, "seed": cfg.seed, "strategy": mode,
               "complete": r.complete, "approvals": r.approvals, "reject_reasons": dict(sorted(r.reasons.items())),
               "download": r.download, "block_bytes": r.block_bytes, "honest_untampered": r.honest_untampered,
               "captured": r.captured, "tampered_undetected": r.tampered_undetected}
    text = json.dumps(metrics, sort_keys=True, indent=1) + "\n"
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(text)
        _emit(_flat(metrics), ("metric", "value"), out / "metrics.csv")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _flat(d, prefix=""):
    rows = []
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows += _flat(v, key + ".")
        elif isinstance(v, list):
            rows.append((key, json.dumps(v, sort_keys=True)))
        else:
            rows.append((key, v))
    return rows


def cmd_prob_honest(args) -> int:
    n, f = args.n, args.f
    t = args.t if args.t is not None else n - 2 * f
    if not 0 <= t <= n - f:
        raise ConfigError(f"--t must lie in [0, {n - f}]")
    grid = navigator.honest_heatmap(n, f, t)
    header = ["x"] + [f"q={q}" for q in range(t, n - f + 1)]
    _emit([[x] + [_num(p) for p in row] for x, row in enumerate(grid)], header, args.out)
    return EXIT_OK


def cmd_prob_malicious(args) -> int:
    n, f = args.n, args.f
    rows = [[x, _num(x / (2 * f)) if f else "", _num(navigator.pr_inclusion_malicious(n, f, x))]
            for x in range(n + 1)]
    _emit(rows, ["x", "x_over_2f", "probability"], args.out)
    return EXIT_OK


def cmd_censor_bound(args) -> int:
    Ts = args.T or list(range(args.T_step, args.T_max + 1, args.T_step))
    rows = []
    for T in Ts:
        b = navigator.censor_bound(args.n, args.f, args.x, args.alpha, T)
        rows.append([T, _num(b.value), _num(b.log_value), _num(b.p), int(b.valid)])
    _emit(rows, ["T", "bound", "log_bound", "p", "valid"], args.out)
    return EXIT_OK


def cmd_retrieve_curve(args) -> int:
    n = 3 * args.f + 1
    rows = [[y, _num(navigator.pr_reconstruct(args.f, y))] for y in range(n + 1)]
    _emit(rows, ["y", "probability"], args.out)
    return EXIT_OK


def cmd_lite_params(args) -> int:
    fs = args.f
    rows = []
    for f in fs:
        p = lite.lite_params(f, args.tau, args.s)
        row = [f, _num(p.tau), p.s, _num(p.p_h), _num(p.p_d), _num(p.rho), p.k, p.L, p.s_star,
               _num(lite.batch_success_prob(p.p_h, p.k, p.L)), _num(lite.batch_success_prob(p.p_d, p.k, p.L))]
        if args.seeds:
            (_, _, _, _, _, hon, mal), = lite.separation_table((f,), args.tau, args.seeds, s=p.s)
            row += [_num(hon), _num(mal)]
        rows.append(row)
    header = ["f", "tau", "s", "p_h", "p_d", "rho", "k", "L", "s_star", "P1", "P2"]
    if args.seeds:
        header += ["honest_rate", "censor_rate"]
    _emit(rows, header, args.out)
    return EXIT_OK


def cmd_scaling(args) -> int:
    rows = simnet.measure_throughput_scaling(tuple(args.ns), d=args.d, protocols=tuple(args.protocols.split(",")),
                                             seed=args.seed)
    _emit([[r["protocol"], r["n"], r["f"], r["block_bytes"], _num(r["download"]), int(r["complete"])] for r in rows],
          ["protocol", "n", "f", "block_bytes", "download_per_replica", "complete"], args.out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dacr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one scenario")
    s.add_argument("--config", help="JSON scenario file, or a bundled name: " + ", ".join(BUNDLED))
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="directory for metrics.json, metrics.csv and trace.jsonl")
    s.add_argument("--print-defaults", action="store_true")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("prob-honest", help="inclusion probability heatmap over (x, q) for an honest leader")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--f", type=int, required=True)
    s.add_argument("--t", type=int)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_prob_honest)

    s = sub.add_parser("prob-malicious", help="inclusion probability against a censoring leader")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--f", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_prob_malicious)

    s = sub.add_parser("censor-bound", help="Hoeffding/union bound on censoring a fraction of T txs")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--f", type=int, required=True)
    s.add_argument("--x", type=int, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--T", type=_ints, help="comma-separated T values")
    s.add_argument("--T-max", type=int, default=5000)
    s.add_argument("--T-step", type=int, default=250)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_censor_bound)

    s = sub.add_parser("retrieve-curve", help="reconstruction probability vs replicas contacted")
    s.add_argument("--f", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_retrieve_curve)

    s = sub.add_parser("lite-params", help="sampling-game parameters")
    s.add_argument("--f", type=_ints, required=True, help="one or more f values, comma-separated")
    s.add_argument("--tau", type=float, default=1.5)
    s.add_argument("--s", type=int)
    s.add_argument("--seeds", type=int, default=0, help="also play the game over this many seeds")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_lite_params)

    s = sub.add_parser("scaling", help="per-replica dispersal download against n")
    s.add_argument("--ns", type=_ints, default=[7, 13, 31, 61])
    s.add_argument("--d", type=int, default=256)
    s.add_argument("--protocols", default="card7,vanilla")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_scaling)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
