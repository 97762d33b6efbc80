"""Sweep execution with append-only checkpoints, CSV tables and a JSON summary."""

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..finite_temp import (
    QuadraticModel,
    concentration_sweep,
    free_energy_ti,
    gap_report,
    gaussian_free_energy,
    rescaling_point,
    two_temperature_report,
)
from ..zero_temp import (
    CellProblem,
    cell_graph,
    growth_sandwich,
    minimize_cell,
    partition_grid,
    rank_one_report,
    subadditivity_check,
    w_inf_from_densities,
)
from .config import StudyConfig
from .poincare import poincare_probe

CSV_COLUMNS = ("point", "status", "Lambda", "window", "seed", "beta", "N", "t", "value", "stderr", "diagnostics",
               "error", "config_hash", "version")

CHECKPOINT = "checkpoint.jsonl"
RESULTS = "results.csv"
SUMMARY = "summary.json"


def pool_size():
    """Worker cap from ``POLYHOM_THREADS`` (default 1, serial)."""
    raw = os.environ.get("POLYHOM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass
class StudyResult:
    """Records, fits and verdicts of one study run.

    Every record carries ``config_hash`` and ``version``. ``verdicts`` maps
    criterion names to booleans; ``passed`` is their conjunction (and false
    when any point failed).
    """

    config: StudyConfig
    config_hash: str
    version: str
    records: list
    fits: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    @property
    def failed(self):
        return [r for r in self.records if r["status"] != "ok"]

    @property
    def passed(self):
        return bool(self.verdicts) and all(self.verdicts.values()) and not self.failed

    def summary(self):
        return {
            "config": self.config.to_dict(), "config_hash": self.config_hash, "version": self.version,
            "n_points": len(self.records), "n_failed": len(self.failed), "fits": self.fits,
            "verdicts": self.verdicts, "passed": self.passed,
        }

    def rows(self):
        """CSV rows in point order with the stable column set."""
        return [_csv_row(r) for r in self.records]

    def table(self):
        """Text table with the same values as the CSV file."""
        buf = io.StringIO()
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        cols = CSV_COLUMNS[:10]
        w.writerow(cols)
        for row in self.rows():
            w.writerow([row[c] for c in cols])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def _csv_row(rec):
    inp = rec.get("inputs", {})
    res = rec.get("result") or {}
    diag = {k: v for k, v in res.items() if k not in ("value", "stderr")}
    row = {
        "point": rec["point"], "status": rec["status"], "Lambda": inp.get("Lambda"), "window": inp.get("window"),
        "seed": inp.get("seed"), "beta": inp.get("beta"), "N": inp.get("N"), "t": inp.get("t"),
        "value": res.get("value"), "stderr": res.get("stderr"), "diagnostics": diag or None,
        "error": rec.get("error"), "config_hash": rec["config_hash"], "version": rec["version"],
    }
    return {k: _fmt(v) for k, v in row.items()}


# ----------------------------------------------------------------------------
# point enumeration


def _geometries(cfg):
    """``(label, D, eps)`` for the explicit domain or each window."""
    d = cfg.graph_params().dimension
    if cfg.domain is not None:
        return [(None, np.asarray(cfg.domain, dtype=float), float(cfg.eps))]
    return [(float(L), np.array([np.zeros(d), np.full(d, float(L))]), 1.0) for L in cfg.windows]


def _points(cfg):
    k = cfg.kind
    lams = [L.tolist() for L in cfg.lambda_matrices()]
    geo = [g[0] for g in _geometries(cfg)]
    pts = []
    if k == "phantom":
        betas = cfg.betas or [1.0]
        for i, L in enumerate(lams):
            for w in geo:
                for s in cfg.seeds:
                    for b in betas:
                        pts.append({"Lambda": L, "lambda_index": i, "window": w, "seed": s, "beta": b})
    elif k in ("w-inf-convergence", "growth-sandwich"):
        ws = geo if k == "w-inf-convergence" else geo[:1]
        for i, L in enumerate(lams):
            for w in ws:
                for s in cfg.seeds:
                    pts.append({"Lambda": L, "lambda_index": i, "window": w, "seed": s})
    elif k == "beta-gap":
        for i, L in enumerate(lams):
            pts.append({"Lambda": L, "lambda_index": i, "window": geo[0], "seed": cfg.seeds[0], "beta": None})
            for b in cfg.betas:
                pts.append({"Lambda": L, "lambda_index": i, "window": geo[0], "seed": cfg.seeds[0], "beta": b})
    elif k == "two-temp":
        for i, L in enumerate(lams):
            for j, N in enumerate(cfg.n_grid):
                pts.append({"Lambda": L, "lambda_index": i, "window": geo[0], "seed": cfg.seeds[0], "N": N,
                            "stream": j})
    elif k == "rank-one":
        o = cfg.options.get("rank_one", {})
        ts = o.get("ts", [-0.2, -0.1, 0.0, 0.1, 0.2])
        for t in ts:
            for s in cfg.seeds:
                pts.append({"Lambda": lams[0], "window": geo[0], "seed": s, "t": t})
    elif k == "concentration":
        pts.append({"Lambda": lams[0], "window": geo[0], "seed": cfg.seeds[0], "betas": list(cfg.betas)})
    elif k == "poincare":
        for w in geo:
            for s in cfg.seeds:
                pts.append({"window": w, "seed": s})
    elif k == "subadditivity":
        for i, L in enumerate(lams):
            for counts in cfg.options.get("partitions", [[2, 2], [4, 1]]):
                pts.append({"Lambda": L, "lambda_index": i, "window": geo[0], "seed": cfg.seeds[0],
                            "partition": list(counts)})
    for n, p in enumerate(pts):
        p["id"] = f"{k}:{n}"
    return pts


# ----------------------------------------------------------------------------
# per-point evaluation


def _domain(cfg, window):
    for w, D, eps in _geometries(cfg):
        if w == window:
            return D, eps
    raise KeyError(window)


def _evaluate(cfg, pt):
    k = cfg.kind
    gp = cfg.graph_params()
    pair = cfg.pair_potential()
    vol = cfg.volumetric_potential()
    solver = dict(cfg.budget.get("solver", {}))
    chain = dict(cfg.budget.get("chain", {}))
    if k == "poincare":
        p = float(cfg.options.get("p", pair.p))
        rep = poincare_probe(gp, [pt["window"]], p, [pt["seed"]], delta=cfg.options.get("delta", (
            gp.interaction_range + 1.0) / min(cfg.windows)), **cfg.options.get("probe", {}))
        return {"value": float(rep.constants[0]), "stderr": 0.0}
    D, eps = _domain(cfg, pt["window"])
    G = cell_graph(gp, D, eps, seed=pt["seed"])
    Lam = np.asarray(pt["Lambda"], dtype=float)
    band = cfg.band
    if k == "phantom":
        m1 = QuadraticModel.build(G, D, eps, pair, Lambda=Lam, band=band)
        m0 = QuadraticModel.build(G, D, eps, pair, Lambda=np.zeros_like(Lam), band=band)
        f1 = gaussian_free_energy(m1, pt["beta"]).value
        f0 = gaussian_free_energy(m0, pt["beta"]).value
        dF = f1 - f0
        dH = (m1.min_energy - m0.min_energy) / m1.volume
        rel = abs(dF - dH) / max(abs(dH), np.finfo(float).tiny)
        return {"value": dF, "stderr": 0.0, "min_energy_diff": dH, "rel_error": rel, "F_Lambda": f1, "F_zero": f0,
                "m": m1.m}
    if k in ("w-inf-convergence", "growth-sandwich", "rank-one"):
        if k == "rank-one":
            o = cfg.options.get("rank_one", {})
            a = np.asarray(o.get("a", [1.0] + [0.0] * (Lam.shape[0] - 1)))
            n = np.asarray(o.get("n", [0.0] * (Lam.shape[1] - 1) + [1.0]))
            Lam = Lam + pt["t"] * np.outer(a, n)
        res = minimize_cell(CellProblem(G, D, eps, pair, vol, Lambda=Lam, band=band), **solver)
        return {"value": res.density, "stderr": 0.0, "spread": res.spread, "grad_norm": res.grad_norm,
                "converged": res.converged, "norm": float(np.linalg.norm(Lam))}
    if k == "beta-gap":
        if pair.kind == "quadratic" and (vol is None or not vol.active):
            model = QuadraticModel.build(G, D, eps, pair, Lambda=Lam, band=band)
            if pt["beta"] is None:
                return {"value": model.min_energy / model.volume, "stderr": 0.0, "method": "minimization"}
            e = gaussian_free_energy(model, pt["beta"])
            return {"value": e.value, "stderr": 0.0, "method": e.method}
        if pt["beta"] is None:
            res = minimize_cell(CellProblem(G, D, eps, pair, vol, Lambda=Lam, band=band), **solver)
            return {"value": res.density, "stderr": 0.0, "method": "minimization", "spread": res.spread}
        kw = dict(chain)
        kw.setdefault("seed", int(pt["seed"]) * 1000 + cfg.betas.index(pt["beta"]))
        e = free_energy_ti(G, D, eps, Lam, pt["beta"], pair, vol, band=band, **kw)
        return {"value": e.value, "stderr": e.stderr, "method": e.method, "min_ess": e.metadata["min_ess"],
                "acceptance": e.metadata["acceptance"]}
    if k == "two-temp":
        ti = dict(chain)
        row = rescaling_point(G, D, eps, Lam, cfg.beta0, pt["N"], pair, cfg.options.get("vol_K"), band, ti, solver,
                              seed=int(pt["seed"]) * 1000 + pt["stream"])
        return dict(row, value=row["lhs"], stderr=row["lhs_stderr"])
    if k == "concentration":
        sw = concentration_sweep(G, D, eps, Lam, pt["betas"], pair, vol, band=band, seed=int(pt["seed"]),
                                 solver=solver, **chain)
        return {"value": float(sw.p95[-1]), "stderr": float(sw.p95_stderr[-1]), "betas": sw.betas.tolist(),
                "p95": sw.p95.tolist(), "p95_stderr": sw.p95_stderr.tolist(), "median": sw.medians.tolist(),
                "acceptance": sw.acceptance.tolist()}
    if k == "subadditivity":
        I = np.array([np.zeros(gp.dimension), np.full(gp.dimension, float(pt["window"]))])
        parts = partition_grid(I, pt["partition"])
        rep = subadditivity_check(Lam, I, parts, pair, vol, graph_params=gp, seed=int(pt["seed"]), **solver)
        return {"value": rep.sigma_I, "stderr": 0.0, "slack": rep.slack, "stitched_slack": rep.stitched_slack,
                "tolerance": rep.tolerance, "passed": rep.passed}
    raise ValueError(k)


def _run_point(cfg_dict, pt):
    cfg = StudyConfig.from_dict(cfg_dict)
    inputs = {k: v for k, v in pt.items() if k != "id"}
    try:
        return {"point": pt["id"], "status": "ok", "inputs": inputs, "result": _jsonable(_evaluate(cfg, pt))}
    except Exception as exc:  # failed points are recorded, never fatal to the sweep
        return {"point": pt["id"], "status": "failed", "inputs": inputs, "result": None,
                "error": f"{type(exc).__name__}: {exc}"}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ----------------------------------------------------------------------------
# summaries


def _ok(records):
    return [r for r in records if r["status"] == "ok"]


def _summarize(cfg, records):
    k = cfg.kind
    ok = _ok(records)
    fits, verdicts = {}, {}
    if not ok:
        return fits, verdicts
    if k == "phantom":
        worst = max(r["result"]["rel_error"] for r in ok)
        fits["max_rel_error"] = worst
        verdicts["identity"] = worst <= cfg.threshold("phantom_rtol")
    elif k == "w-inf-convergence":
        windows = sorted({r["inputs"]["window"] for r in ok})
        for i, Lam in enumerate(cfg.lambda_matrices()):
            rows = [r for r in ok if r["inputs"]["lambda_index"] == i]
            dens = np.full((len(windows), len(cfg.seeds)), np.nan)
            spr = np.zeros_like(dens)
            for r in rows:
                a, b = windows.index(r["inputs"]["window"]), cfg.seeds.index(r["inputs"]["seed"])
                dens[a, b] = r["result"]["value"]
                spr[a, b] = r["result"]["spread"]
            if np.any(np.isnan(dens)) or len(windows) < 3:
                verdicts[f"lambda{i}"] = False
                continue
            est = w_inf_from_densities(Lam, windows, cfg.seeds, dens, spr)
            fits[f"lambda{i}"] = est.to_dict()
            verdicts[f"lambda{i}"] = bool(est.relative_gap <= cfg.threshold("cauchy_gap")
                                          and est.max_spread <= cfg.threshold("restart_spread"))
    elif k == "beta-gap":
        for i in range(len(cfg.lambdas)):
            rows = [r for r in ok if r["inputs"]["lambda_index"] == i]
            W = [r["result"]["value"] for r in rows if r["inputs"]["beta"] is None]
            fe = sorted((r["inputs"]["beta"], r["result"]["value"], r["result"]["stderr"], r["result"]["method"])
                        for r in rows if r["inputs"]["beta"] is not None)
            if not W or len(fe) < 4:
                verdicts[f"lambda{i}"] = False
                continue
            b, v, s, m = zip(*fe)
            rep = gap_report(b, v, s, W[0], m[0])
            fits[f"lambda{i}"] = rep.to_dict()
            verdicts[f"lambda{i}"] = rep.passed(cfg.threshold("ratio_factor"))
    elif k == "two-temp":
        for i in range(len(cfg.lambdas)):
            rows = [r["result"] for r in ok if r["inputs"]["lambda_index"] == i]
            if len(rows) < 3:
                verdicts[f"lambda{i}"] = False
                continue
            rep = two_temperature_report(rows)
            fits[f"lambda{i}"] = rep.to_dict()
            verdicts[f"identity{i}"] = rep.identity_holds(cfg.threshold("identity_rtol"), cfg.threshold("identity_k"))
            verdicts[f"scaling{i}"] = rep.ratio_factor <= cfg.threshold("ratio_factor")
    elif k == "growth-sandwich":
        norms, vals = [], []
        for i in range(len(cfg.lambdas)):
            rows = [r["result"] for r in ok if r["inputs"]["lambda_index"] == i]
            if rows:
                norms.append(rows[0]["norm"])
                vals.append(float(np.mean([r["value"] for r in rows])))
        c, C, good = growth_sandwich(norms, vals, cfg.pair_potential().p)
        fits["sandwich"] = {"c": c, "C": C, "norms": norms, "values": vals}
        verdicts["sandwich"] = good
    elif k == "rank-one":
        ts = sorted({r["inputs"]["t"] for r in ok})
        vals, errs = [], []
        for t in ts:
            v = np.array([r["result"]["value"] for r in ok if r["inputs"]["t"] == t])
            vals.append(float(v.mean()))
            errs.append(float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0)
        if len(ts) >= 3:
            rep = rank_one_report(ts, vals, errs)
            fits["rank_one"] = rep.to_dict()
            verdicts["midpoint_convexity"] = rep.passed(cfg.threshold("defect_k"))
    elif k == "concentration":
        res = ok[0]["result"]
        q, s = np.array(res["p95"]), np.array(res["p95_stderr"])
        fits["p95"] = res["p95"]
        verdicts["nonincreasing"] = bool(np.all(q[1:] <= q[:-1] + cfg.threshold("concentration_k")
                                                * np.sqrt(s[1:] ** 2 + s[:-1] ** 2)))
    elif k == "poincare":
        windows = sorted({r["inputs"]["window"] for r in ok})
        consts = [max(r["result"]["value"] for r in ok if r["inputs"]["window"] == w) for w in windows]
        factor = max(consts) / min(consts) if min(consts) > 0 else float("inf")
        fits["poincare"] = {"windows": windows, "constants": consts, "factor": factor}
        verdicts["bounded"] = factor <= cfg.threshold("poincare_factor")
    elif k == "subadditivity":
        for r in ok:
            verdicts[r["point"]] = bool(r["result"]["passed"])
    return fits, verdicts


# ----------------------------------------------------------------------------
# driver


def _load_checkpoint(path, chash):
    done = {}
    if not path.exists():
        return done
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn final line after an interrupt
            if rec.get("config_hash") == chash and rec.get("version") == __version__:
                done[rec["point"]] = rec
    return done


def run_study(config, output=None, resume=True, threads=None, progress=None):
    """Run every point of a study, checkpointing each as it completes.

    Parameters
    ----------
    config : StudyConfig, dict or path
    output : path, optional
        Output directory (defaults to ``config.output``); receives
        ``checkpoint.jsonl``, ``results.csv`` and ``summary.json``.
    resume : bool
        Reuse checkpointed points with the same config hash and version.
    threads : int, optional
        Worker processes; defaults to ``POLYHOM_THREADS`` (1 means serial).
    progress : callable, optional
        Called with each new record.

    Returns
    -------
    StudyResult
    """
    if isinstance(config, (str, Path)):
        config = StudyConfig.from_json(config)
    elif isinstance(config, dict):
        config = StudyConfig.from_dict(config)
    out = Path(output if output is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    chash = config.hash
    ck = out / CHECKPOINT
    done = _load_checkpoint(ck, chash) if resume else {}
    if not resume and ck.exists():
        ck.unlink()
    points = _points(config)
    todo = [p for p in points if p["id"] not in done]
    cfg_dict = config.to_dict()
    n = pool_size() if threads is None else max(1, int(threads))

    def stamp(rec):
        rec["config_hash"] = chash
        rec["version"] = __version__
        return rec

    with ck.open("a") as fh:
        def write(rec):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
            done[rec["point"]] = rec
            if progress is not None:
                progress(rec)

        if n == 1 or len(todo) <= 1:
            for p in todo:
                write(stamp(_run_point(cfg_dict, p)))
        else:
            with ProcessPoolExecutor(max_workers=n) as pool:
                futs = [pool.submit(_run_point, cfg_dict, p) for p in todo]
                for f in futs:
                    write(stamp(f.result()))

    records = [done[p["id"]] for p in points]
    fits, verdicts = _summarize(config, records)
    result = StudyResult(config, chash, __version__, records, _jsonable(fits), _jsonable(verdicts))
    write_outputs(result, out)
    return result


def write_outputs(result, out):
    """Write ``results.csv`` (stable column order) and ``summary.json``."""
    out = Path(out)
    with (out / RESULTS).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(result.rows())
    with (out / SUMMARY).open("w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
