"""Command-line experiment runner.

    btsl3 <command> --config <path> [--out <dir>] [--seed <u64>] [--workers <n>]

Exit status: 0 on success, 2 for configuration errors, 3 for math errors.
The ``check`` command additionally exits 1 when a self-test fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from collections import Counter
from fractions import Fraction
from pathlib import Path

from . import padic, sampling, tree, walk
from .building import Flag, cartan_type, flag_distance, sqrt_le_sum
from .config import ExperimentConfig, config_to_json, load_config
from .errors import BuildingError, ConfigError
from .weyl import opposition_involution

COMMANDS = ("walk", "lyapunov", "opposition", "stationary", "germ", "tree-demo", "check")


class Emitter:
    """Collects named artifacts; writes them under ``out`` or to stdout."""

    def __init__(self, out, stdout):
        self.out = Path(out) if out else None
        self.stdout = stdout
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, content: str, echo: bool = True):
        if self.out:
            (self.out / name).write_text(content, encoding="utf-8")
        if echo or not self.out:
            self.stdout.write(content)

    def json(self, name: str, obj, echo: bool = True):
        self.text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n", echo)

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        if self.out:
            (self.out / name).write_text(buf.getvalue(), encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_walk(cfg: ExperimentConfig, em: Emitter, workers: int) -> int:
    spec = cfg.measure()
    lines = []
    for t in range(cfg.walk_trajectories):
        for rec in walk.iterate_path(spec, cfg.N, t):
            lines.append(json.dumps(rec.to_json(t), sort_keys=True, separators=(",", ":")))
    em.text("walk.jsonl", "\n".join(lines) + "\n")
    return 0


def cmd_lyapunov(cfg: ExperimentConfig, em: Emitter, workers: int) -> int:
    if cfg.M < 2:
        raise ConfigError("lyapunov needs M >= 2")
    spec = cfg.measure()
    summaries = walk.summarize_many(spec, cfg.N, range(cfg.M), cfg.tol_exponent, workers)
    report = walk.estimate_from_thetas([s.theta for s in summaries], cfg.N)
    em.json("lyapunov.json", {"config": config_to_json(cfg), "report": report.to_json()})
    em.csv(
        "lyapunov_trajectories.csv",
        ["traj", "theta1", "theta2", "theta3"],
        [[s.trajectory_id, *s.theta.to_json()] for s in summaries],
    )
    return 0


def cmd_opposition(cfg: ExperimentConfig, em: Emitter, workers: int) -> int:
    spec = cfg.measure()
    summaries = walk.summarize_many(spec, cfg.N, range(2 * cfg.M), cfg.tol_exponent, workers)
    report = walk.opposition_from_limits([s.limit for s in summaries])
    em.json("opposition.json", {"config": config_to_json(cfg), "report": report.to_json()})
    return 0


def cmd_stationary(cfg: ExperimentConfig, em: Emitter, workers: int) -> int:
    spec = cfg.measure()
    summaries = walk.summarize_many(spec, cfg.N, range(cfg.M), cfg.tol_exponent, workers)
    flags = [s.limit for s in summaries if not isinstance(s.limit, walk.NotConverged)]
    rows = []
    for k in cfg.depths:
        if not flags:
            rows.append({"depth": k, "residual": None, "bootstrap_se": None})
            continue
        r = walk.stationarity_residual(spec, flags, k)
        se = walk.bootstrap_residual_se(spec, flags, k, cfg.bootstrap, cfg.seed)
        rows.append({"depth": k, "residual": r, "bootstrap_se": se})
    near = [s.last_near for s in summaries]
    report = {
        "flags": len(flags),
        "not_converged": len(summaries) - len(flags),
        "residuals": rows,
        "ball_radius": cfg.near_radius,
        "max_last_visit": max(near),
        "fraction_last_visit_below_half": sum(1 for n in near if n < cfg.N / 2) / len(near),
    }
    em.json("stationary.json", {"config": config_to_json(cfg), "report": report})
    em.csv(
        "stationary.csv",
        ["depth", "residual", "bootstrap_se"],
        [[r["depth"], r["residual"], r["bootstrap_se"]] for r in rows],
    )
    return 0


def _germ_task(args):
    spec, N, tid, k, depth = args
    first = 1 if depth > 1 else N - max(1, N // 4) + 1
    path = list(walk.iterate_path(spec, N, tid, flags_from=first))
    lim = walk.limit_flag(path, k, spec.prime)
    return walk.cell_stabilization(path, lim, spec.prime, depth)


def cmd_germ(cfg: ExperimentConfig, em: Emitter, workers: int) -> int:
    spec = cfg.measure()
    tasks = [(spec, cfg.N, t, cfg.tol_exponent, cfg.germ_depth) for t in range(cfg.M)]
    results = walk.map_trajectories(_germ_task, tasks, workers)
    width = max(1, cfg.N // 20)
    hist = Counter()
    for r in results:
        hist["never" if r.n0 is None else (r.n0 - 1) // width * width + 1] += 1
    bins = sorted((b for b in hist if b != "never"))
    report = {
        "depth": cfg.germ_depth,
        "trajectories": len(results),
        "stabilized": sum(1 for r in results if r.n0 is not None),
        "matched": sum(1 for r in results if r.match),
        "histogram": [{"from": b, "to": b + width - 1, "count": hist[b]} for b in bins]
        + [{"from": None, "to": None, "count": hist["never"]}],
        "n0": [r.n0 for r in results],
    }
    em.json("germ.json", {"config": config_to_json(cfg), "report": report})
    em.csv(
        "germ.csv",
        ["traj", "n0", "match"],
        [[t, "" if r.n0 is None else r.n0, int(r.match)] for t, r in enumerate(results)],
    )
    return 0


def tree_demo(p: int) -> dict:
    u = (1, 0, 0)
    flags = [Flag(u, (0, a, b)) for a, b in ((0, 1), (1, 0), (1, -1), (p, 1), (1, p))]
    roundtrip = all(
        tree.end_to_chamber(u, tree.chamber_end_bijection(u, C, p), p) == C for C in flags
    )
    e1, e2 = tree.TreeEnd((1, 0)), tree.TreeEnd((0, 1))
    S1 = [e1, e2, tree.TreeEnd((1, 1))]
    S2 = [e1, e2, tree.TreeEnd((1, p))]
    base = tree.base_vertex(p)
    far = tree.TreeVertex.from_basis(((1, 0), (0, p * p)), p)
    half = Fraction(1, 4)
    return {
        "bijection_roundtrip": roundtrip,
        "bary_three_generic": tree.bary_ends(S1, p).to_json(),
        "bary_branching": tree.bary_ends(S2, p).to_json(),
        "gromov_e1_e1_plus_p_e2": str(tree.gromov_product(base, e1, tree.TreeEnd((1, p)))),
        "beta_eps_two_atoms": tree.beta_eps({base: Fraction(1, 2), far: Fraction(1, 2)}, half).to_json(),
        "pushforward_uniform_three": [
            {"point": x.to_json(), "mass": str(w)}
            for x, w in sorted(
                tree.measure_pushforward({e: Fraction(1, 3) for e in S1}, p).items(),
                key=lambda t: (t[0].anchor.canon, t[0].toward.canon, t[0].offset),
            )
        ],
    }


def cmd_tree_demo(cfg, em: Emitter, workers: int) -> int:
    p = cfg.prime if cfg else 3
    em.json("tree_demo.json", tree_demo(p))
    return 0


def self_check(p: int = 3, seed: int = 0, count: int = 200) -> list:
    """Exact oracle suites; returns (name, passed, detail) triples."""
    rng = random.Random(seed)
    results = []

    bad = 0
    for _ in range(count):
        M = sampling.entry_matrix(rng, p)
        dec = padic.smith_decompose(M, p)
        if dec.valuations != padic.minor_valuations(M, p) or dec.reconstruct() != M:
            bad += 1
    results.append(("smith-vs-minors", bad == 0, f"{count - bad}/{count}"))

    bad = 0
    for _ in range(count):
        M = sampling.group_element(rng, p)
        H = padic.hermite_canonical(M, p)
        if padic.hermite_canonical(H, p) != H:
            bad += 1
            continue
        k = sampling.unimodular(rng, p)
        if padic.hermite_canonical(padic.mat_mul(M, k), p) != H:
            bad += 1
    results.append(("hermite-idempotent-invariant", bad == 0, f"{count - bad}/{count}"))

    bad = 0
    for _ in range(count):
        x, y, z = (sampling.vertex(rng, p) for _ in range(3))
        txy = cartan_type(x, y)
        if cartan_type(y, x) != opposition_involution(txy):
            bad += 1
            continue
        if not sqrt_le_sum(txy.norm2(), cartan_type(x, z).norm2(), cartan_type(z, y).norm2()):
            bad += 1
    results.append(("metric-axioms", bad == 0, f"{count - bad}/{count}"))

    bad = 0
    for _ in range(count):
        F, G, H = (sampling.flag(rng, p) for _ in range(3))
        if flag_distance(F, H, p) > max(flag_distance(F, G, p), flag_distance(G, H, p)):
            bad += 1
    results.append(("flag-ultrametric", bad == 0, f"{count - bad}/{count}"))
    return results


def cmd_check(cfg, em: Emitter, workers: int) -> int:
    p = cfg.prime if cfg else 3
    seed = cfg.seed if cfg else 0
    results = self_check(p, seed)
    lines = [f"{'PASS' if ok else 'FAIL'} {name} ({detail})" for name, ok, detail in results]
    em.text("check.txt", "\n".join(lines) + "\n")
    return 0 if all(ok for _, ok, _ in results) else 1


HANDLERS = {
    "walk": cmd_walk,
    "lyapunov": cmd_lyapunov,
    "opposition": cmd_opposition,
    "stationary": cmd_stationary,
    "germ": cmd_germ,
    "tree-demo": cmd_tree_demo,
    "check": cmd_check,
}


def run_experiment(cfg, command: str, out=None, workers: int = 1, stdout=None) -> int:
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    em = Emitter(out, stdout or sys.stdout)
    return HANDLERS[command](cfg, em, workers)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="btsl3", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="experiment config (JSON); optional for check and tree-demo")
    ap.add_argument("--out", help="directory for output files (default: stdout only)")
    ap.add_argument("--seed", help="override the config seed (unsigned 64-bit)")
    ap.add_argument("--workers", type=int, default=1, help="worker processes for trajectories")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        if args.config is None:
            if args.command not in ("check", "tree-demo"):
                raise ConfigError(f"{args.command} needs --config")
            cfg = None
        else:
            cfg = load_config(args.config, args.seed)
        return run_experiment(cfg, args.command, args.out, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BuildingError, ArithmeticError) as exc:
        print(f"math error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
