"""Command-line entry point: ``detect simulate|kinetic|invert|check``.

Every command writes its files into ``--out`` and finishes with
``manifest.json``, which lists each output with its sha256. Exit codes: 0 ok,
2 invalid input, 3 runtime failure, 4 not converged.
"""
import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .errors import NotConverged, TokenWealthError, ValidationError
from .inverse import InverseProblem, solve_equilibrium_rates, verify_solution
from .kinetic import Variant, driven_out_fraction, max_share, run_kinetic
from .macro import simulate
from .scenario import RunManifest, apply_patch, parse_scenario, rates_block
from .seeding import run_seed
from .supply import SupplyPath, check_time_translation

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_NOT_CONVERGED = 0, 2, 3, 4


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _num(x):
    return repr(float(x))


class Output:
    """Collects files for one command; the manifest is written last."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = []

    def write_text(self, name, text):
        data = text.encode("utf-8")
        (self.root / name).write_bytes(data)
        self.files.append({"path": name, "sha256": hashlib.sha256(data).hexdigest()})

    def write_json(self, name, obj):
        self.write_text(name, json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
        self.write_text(name, buf.getvalue())

    def write_manifest(self, manifest):
        manifest.files = list(self.files)
        text = json.dumps(_clean(manifest.to_dict()), indent=2, sort_keys=True) + "\n"
        (self.root / "manifest.json").write_text(text, encoding="utf-8")


def _threads():
    try:
        return max(1, int(os.environ.get("DETECT_THREADS", "1")))
    except ValueError:
        return 1


def _map_runs(fn, count):
    """Run ``fn(i)`` for each ensemble member; results come back in index order."""
    workers = min(_threads(), count)
    if workers <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def _runs(master, count):
    return [{"index": i, "seed": run_seed(master, i)} for i in range(count)]


def _need(condition, field):
    if not condition:
        raise ValidationError(field, "missing", f"this command needs a {field} block")


def cmd_check(sc, out, master, count):
    summary = {"valid": True, "scenario_digest": sc.digest, "macro": sc.has_macro, "kinetic": sc.kinetic is not None,
               "inverse": sc.inverse is not None}
    if sc.has_macro:
        summary.update(categories=sc.taxonomy.ids, mode=sc.schedule.mode.value,
                       supply=type(sc.supply).__name__, horizon=sc.horizon, dt=sc.dt)
    out.write_json("check.json", summary)
    return EXIT_OK


def cmd_simulate(sc, out, master, count):
    _need(sc.has_macro, "taxonomy")
    trajs = _map_runs(lambda i: simulate(sc, seed=master, run_index=i), count)
    ids = sc.taxonomy.ids
    reports = []
    finals = []
    for i, tr in enumerate(trajs):
        rows = ([k, _num(k * tr.dt), _num(tr.supply[k])] + [_num(v) for v in tr.wealth[k]] for k in range(len(tr)))
        out.write_csv(f"trajectory_{i:03d}.csv", ["step", "t", "M"] + ids, rows)
        rep = check_time_translation(tr.wealth, sc.supply, dt=tr.dt, path=SupplyPath(tr.supply, tr.dt))
        reports.append({"run": i, "seed": tr.seed, **rep.to_dict()})
        finals.append(dict(zip(ids, tr.wealth[-1])))
    out.write_json("symmetry_report.json", {"runs": reports, "passed": all(r["passed"] for r in reports)})
    out.write_json("summary.json", {
        "categories": ids,
        "horizon": sc.horizon,
        "dt": sc.dt,
        "ensemble_size": count,
        "final_wealth": finals,
        "final_supply": [float(tr.supply[-1]) for tr in trajs],
    })
    return EXIT_OK if all(r["passed"] for r in reports) else EXIT_RUNTIME


def cmd_kinetic(sc, out, master, count):
    _need(sc.kinetic is not None, "kinetic")
    ks = sc.kinetic

    def one(i):
        return run_kinetic(ks.agents, ks.total_wealth, ks.model, ks.steps, ks.snapshot_every,
                           seed=run_seed(master, i), initial=ks.initial_wealth)

    runs = _map_runs(one, count)
    header = ["step"] + [f"agent{j}" for j in range(ks.agents)]
    per_run = []
    not_converged = False
    for i, r in enumerate(runs):
        out.write_csv(f"snapshots_{i:03d}.csv", header,
                      ([int(s)] + [_num(v) for v in w] for s, w in zip(r.snapshot_steps, r.snapshots)))
        entry = {"run": i, "seed": r.seed, "final_total": float(r.final.sum()),
                 "gini": analysis.gini(r.final), "max_share": float(max_share(r.final)),
                 "driven_out_fraction": float(driven_out_fraction(r.final))}
        if ks.equilibrium_window:
            try:
                idx = analysis.equilibrium_detect(r.snapshots, ks.equilibrium_window, ks.equilibrium_tol)
                entry["equilibrium_step"] = int(r.snapshot_steps[idx])
            except NotConverged:
                entry["equilibrium_step"] = None
                not_converged = True
            except ValueError as exc:
                entry["equilibrium_step"] = None
                entry["equilibrium_note"] = str(exc)
        per_run.append(entry)
    pooled = np.concatenate([r.final for r in runs])
    edges, counts, density = analysis.histogram(pooled, bins=ks.histogram_bins)
    out.write_csv("histogram.csv", ["bin_left", "bin_right", "count", "density"],
                  ([_num(edges[b]), _num(edges[b + 1]), int(counts[b]), _num(density[b])] for b in range(len(counts))))
    fits = {"samples": int(pooled.size), "mean": float(pooled.mean()), "gini": analysis.gini(pooled),
            "top_share_0.2": analysis.top_share(pooled, 0.2)}
    for name, fit in (("exponential", analysis.fit_exponential), ("gamma", analysis.fit_gamma),
                      ("pareto_tail", analysis.fit_pareto_tail)):
        try:
            res = fit(pooled)
            fits[name] = res.to_dict()
        except TokenWealthError as exc:
            fits[name] = {"error": exc.code, "message": str(exc)}
    if ks.model.variant is Variant.GLOBAL_SAVING:
        fits["prediction"] = analysis.GammaPrediction.for_lambda(ks.model.lam, ks.total_wealth / ks.agents).to_dict()
    out.write_json("fit_report.json", {
        "model": ks.model.variant.name.lower(),
        "lambda": ks.model.lam,
        "agents": ks.agents,
        "total_wealth": ks.total_wealth,
        "steps": ks.steps,
        "snapshot_every": ks.snapshot_every,
        "runs": per_run,
        "pooled_final": fits,
    })
    return EXIT_NOT_CONVERGED if not_converged else EXIT_OK


def cmd_invert(sc, out, master, count):
    _need(sc.inverse is not None, "inverse")
    inv = sc.inverse
    M = sc.supply.M_initial
    B0, G0 = sc.schedule.start(sc.initial_wealth, M, sc.dt, master).rates(0, sc.initial_wealth, M)
    problem = InverseProblem(sc.taxonomy, inv.target, M, inv.free_beta, inv.free_gamma, B0, G0, inv.regularization)
    sol = solve_equilibrium_rates(problem)
    report = verify_solution(sol, problem, inv.perturbation, inv.horizon, sc.dt, seed=master)
    patch = {"rates": rates_block(sc.taxonomy, sol.B, sol.Gamma)}
    out.write_json("patch.json", patch)
    out.write_json("verification.json", {"solution": sol.to_dict(), "verification": report.to_dict(),
                                         "M": M, "target": inv.target})
    # the patched scenario must still validate
    parse_scenario(apply_patch(sc.raw, patch))
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


COMMANDS = {"simulate": cmd_simulate, "kinetic": cmd_kinetic, "invert": cmd_invert, "check": cmd_check}


def build_parser():
    p = argparse.ArgumentParser(prog="detect", description="Token-economy wealth simulations.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the scenario)")
    p.add_argument("--ensemble", type=int, default=None, help="number of runs (overrides the scenario)")
    return p


def _fail(out_dir, exc, code):
    err = exc.to_dict() if isinstance(exc, TokenWealthError) else {"code": "core.InternalError", "message": str(exc)}
    cause = exc.__cause__
    if isinstance(cause, TokenWealthError):
        err["cause"] = cause.code
    print(f"error: {err['code']}: {err['message']}", file=sys.stderr)
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "error.json").write_text(json.dumps(err, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError:
        pass
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.scenario).read_bytes()
    except OSError as exc:
        return _fail(args.out, exc, EXIT_VALIDATION)
    try:
        sc = parse_scenario(text)
        master = sc.seed if args.seed is None else args.seed
        count = sc.ensemble_size if args.ensemble is None else args.ensemble
        if count < 1 or master < 0:
            raise ValidationError("ensemble" if count < 1 else "seed", "out of range")
        out = Output(args.out)
        status = COMMANDS[args.command](sc, out, master, count)
    except TokenWealthError as exc:
        return _fail(args.out, exc, exc.exit_code)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        return _fail(args.out, exc, EXIT_RUNTIME)
    out.write_manifest(RunManifest(args.command, sc.digest, master, _runs(master, count), __version__))
    return status


if __name__ == "__main__":
    sys.exit(main())
