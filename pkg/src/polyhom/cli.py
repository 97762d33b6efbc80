"""Command-line interface: ``polyhom <command> [<action>] [options]``.

Exit codes: 0 success, 1 scientific or validation failure, 2 usage error.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ConfigError, GridTooSmall, PolyhomError

log = logging.getLogger("polyhom")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p, config=True):
    if config:
        p.add_argument("--config", required=True, help="study or problem configuration (JSON)")
    p.add_argument("--output", help="output directory (defaults to the config's output)")
    p.add_argument("--seed", type=int, help="override the configured seeds with this one")
    p.add_argument("--threads", type=int, help="worker cap (overrides POLYHOM_THREADS)")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")


def build_parser():
    ap = _Parser(prog="polyhom", description="Effective energy densities of random polymer-chain networks.")
    ap.add_argument("--version", action="version", version=f"polyhom {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("graph", help="generate or validate admissible graphs")
    gs = g.add_subparsers(dest="action", required=True, parser_class=_Parser)
    gg = gs.add_parser("generate", help="sample a graph and write it as JSON")
    gg.add_argument("--params", help="GraphParams as a JSON file")
    gg.add_argument("--window", type=float, nargs="+", required=True, metavar="X",
                    help="lo_1 .. lo_d hi_1 .. hi_d, or a single side L for [0, L)^d")
    gg.add_argument("--ensemble", choices=["jittered-lattice", "hardcore-poisson"])
    gg.add_argument("--dimension", type=int)
    _common(gg, config=False)
    gv = gs.add_parser("validate", help="check the admissibility conditions of a saved graph")
    gv.add_argument("path")
    gv.add_argument("--pairs", type=int, default=200, help="sampled vertex pairs for the corridor check")
    _common(gv, config=False)

    e = sub.add_parser("energy", help="evaluate the Hamiltonian")
    es = e.add_subparsers(dest="action", required=True, parser_class=_Parser)
    _common(es.add_parser("eval", help="affine energy density for each configured Λ"))
    gc = es.add_parser("grad-check", help="analytic gradient against central differences")
    gc.add_argument("--samples", type=int, default=5)
    gc.add_argument("--h", type=float, default=1e-5)
    gc.add_argument("--tol", type=float, default=1e-6)
    gc.add_argument("--noise", type=float, default=0.2)
    _common(gc)

    z = sub.add_parser("zero-temp", help="zero-temperature cell problems")
    zs = z.add_subparsers(dest="action", required=True, parser_class=_Parser)
    _common(zs.add_parser("minimize", help="minimal energy density for each configured Λ"))
    _common(zs.add_parser("sweep", help="window sweep and extrapolation (w-inf-convergence study)"))

    f = sub.add_parser("free-energy", help="finite-temperature free energy densities")
    fs = f.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name, hlp in (("exact", "exact Gaussian free energy (quadratic pair)"),
                      ("ti", "thermodynamic integration from a Gaussian reference")):
        fp = fs.add_parser(name, help=hlp)
        fp.add_argument("--beta", type=float, action="append", help="inverse temperature (repeatable)")
        _common(fp)

    for name, hlp in (("phantom-check", "phantom identity on a quadratic fixture"),
                      ("gap-sweep", "free energy gap against log(β)/β"),
                      ("two-temp", "rescaling identity and large-N gap"),
                      ("poincare", "empirical Poincaré constants over a window sweep"),
                      ("rank-one", "midpoint convexity along a rank-one line")):
        _common(sub.add_parser(name, help=hlp))

    s = sub.add_parser("study", help="run a configured study")
    ss = s.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sr = ss.add_parser("run", help="run (or resume) a study")
    sr.add_argument("--fresh", action="store_true", help="ignore an existing checkpoint")
    _common(sr)
    return ap


# ----------------------------------------------------------------------------
# helpers


def _load_config(args, kind=None):
    from .studies import StudyConfig

    path = Path(args.config)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    with path.open() as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if kind is not None:
        if data.get("kind") != kind:
            raise ConfigError(f"--config: this command needs kind {kind!r}, got {data.get('kind')!r} at /kind")
    if args.seed is not None:
        data["seeds"] = [args.seed]
    return StudyConfig.from_dict(data)


def _outdir(args, cfg=None):
    out = Path(args.output if args.output else (cfg.output if cfg is not None else "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o).__name__)


def _problems(cfg):
    """``(index, Λ, G, D, eps)`` for each configured Λ on the first geometry and seed."""
    from .zero_temp import cell_graph

    gp = cfg.graph_params()
    d = gp.dimension
    if cfg.domain is not None:
        D, eps = np.asarray(cfg.domain, dtype=float), float(cfg.eps)
    else:
        L = float(cfg.windows[0])
        D, eps = np.array([np.zeros(d), np.full(d, L)]), 1.0
    G = cell_graph(gp, D, eps, seed=cfg.seeds[0])
    return [(i, L, G, D, eps) for i, L in enumerate(cfg.lambda_matrices())]


def _print_rows(header, rows, out):
    print("\t".join(header))
    for r in rows:
        print("\t".join(repr(v) if isinstance(v, float) else str(v) for v in r))
    with open(out, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in r) + "\n")


# ----------------------------------------------------------------------------
# commands


def _graph_generate(args):
    from .graph import GraphParams, generate_graph, save_graph

    data = {}
    if args.params:
        p = Path(args.params)
        if not p.is_file():
            raise FileNotFoundError(f"params file not found: {p}")
        data = json.loads(p.read_text())
    if args.ensemble:
        data["ensemble"] = args.ensemble
    if args.dimension:
        data["dimension"] = args.dimension
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        params = GraphParams(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--params: {exc}") from None
    d = params.dimension
    w = args.window
    if len(w) == 1:
        window = [[0.0] * d, [w[0]] * d]
    elif len(w) == 2 * d:
        window = [w[:d], w[d:]]
    else:
        raise UsageError(f"--window needs 1 or {2 * d} numbers, got {len(w)}")
    G = generate_graph(params, window)
    out = _outdir(args) / "graph.json"
    save_graph(G, out)
    print(f"{G.n_vertices} vertices, {len(G.edges)} edges, {len(G.simplices)} simplices -> {out}")
    return EXIT_OK


def _graph_validate(args):
    from .graph import load_graph, validate_graph

    path = Path(args.path)
    if not path.is_file():
        raise FileNotFoundError(f"graph file not found: {path}")
    G = load_graph(path)
    rep = validate_graph(G, n_pairs=args.pairs, seed=0 if args.seed is None else args.seed)
    print(rep.summary())
    if args.output:
        _write_json(_outdir(args) / "validation.json", rep.to_dict())
    return EXIT_OK if rep.verdict else EXIT_FAIL


def _energy_eval(args):
    from .energy import Deformation, Hamiltonian

    cfg = _load_config(args)
    out = _outdir(args, cfg)
    rows = []
    for i, L, G, D, eps in _problems(cfg):
        H = Hamiltonian(G, D, eps, cfg.pair_potential(), cfg.volumetric_potential())
        U = H.values_from(Deformation.affine(G, D, eps, L, band=cfg.band))
        e = H.energy(U)
        rows.append((i, float(e), float(e / np.prod(H.box[1] - H.box[0]))))
    _print_rows(("lambda", "energy", "density"), rows, out / "energy_eval.csv")
    return EXIT_OK


def _energy_grad_check(args):
    from .energy import Deformation, Hamiltonian, gradient_check

    cfg = _load_config(args)
    out = _outdir(args, cfg)
    rng = np.random.default_rng(cfg.seeds[0])
    rows = []
    worst = 0.0
    for i, L, G, D, eps in _problems(cfg):
        H = Hamiltonian(G, D, eps, cfg.pair_potential(), cfg.volumetric_potential())
        U0 = H.values_from(Deformation.affine(G, D, eps, L, band=cfg.band))
        for k in range(args.samples):
            U = U0 + args.noise * rng.standard_normal(U0.shape)
            err = gradient_check(H, U, h=args.h)[0]
            worst = max(worst, err)
            rows.append((i, k, err))
    _print_rows(("lambda", "sample", "max_rel_error"), rows, out / "grad_check.csv")
    ok = worst <= args.tol
    print(f"max relative error {worst:.3e} ({'within' if ok else 'above'} {args.tol:g})")
    return EXIT_OK if ok else EXIT_FAIL


def _zero_temp_minimize(args):
    from .zero_temp import CellProblem, minimize_cell

    cfg = _load_config(args)
    out = _outdir(args, cfg)
    rows, full = [], []
    for i, L, G, D, eps in _problems(cfg):
        prob = CellProblem(G, D, eps, cfg.pair_potential(), cfg.volumetric_potential(), Lambda=L, band=cfg.band)
        res = minimize_cell(prob, seed=cfg.seeds[0], **cfg.budget.get("solver", {}))
        rows.append((i, res.density, res.spread, res.grad_norm, res.converged))
        full.append(res.to_dict())
    _print_rows(("lambda", "density", "spread", "grad_norm", "converged"), rows, out / "minimize.csv")
    _write_json(out / "minimize.json", full)
    return EXIT_OK


def _free_energy(args, method):
    from .finite_temp import QuadraticModel, free_energy_ti, gaussian_free_energy

    cfg = _load_config(args)
    out = _outdir(args, cfg)
    betas = args.beta or cfg.betas or [1.0]
    pair, vol = cfg.pair_potential(), cfg.volumetric_potential()
    rows, full = [], []
    for i, L, G, D, eps in _problems(cfg):
        for b in betas:
            if method == "exact":
                est = gaussian_free_energy(QuadraticModel.build(G, D, eps, pair, Lambda=L, band=cfg.band), b)
            else:
                kw = dict(cfg.budget.get("chain", {}))
                kw.setdefault("seed", cfg.seeds[0])
                est = free_energy_ti(G, D, eps, L, b, pair, vol, band=cfg.band, **kw)
            rows.append((i, float(b), est.value, est.stderr, est.method))
            full.append(dict(est.to_dict(), lambda_index=i))
    _print_rows(("lambda", "beta", "value", "stderr", "method"), rows, out / f"free_energy_{method}.csv")
    _write_json(out / f"free_energy_{method}.json", full)
    return EXIT_OK


def _study(args, kind=None, fresh=False):
    from .studies import run_study

    cfg = _load_config(args, kind)
    out = _outdir(args, cfg)
    cfg = replace(cfg, output=str(out))
    res = run_study(cfg, output=out, resume=not fresh, threads=args.threads,
                    progress=lambda r: log.info("%s %s", r["point"], r["status"]))
    print(res.table(), end="")
    for r in res.failed:
        print(f"failed {r['point']}: {r['error']}")
    for name, ok in res.verdicts.items():
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    if cfg.kind == "phantom":
        tol = cfg.threshold("phantom_rtol")
        worst = res.fits.get("max_rel_error", float("nan"))
        if res.passed:
            print(f"identity holds to {tol:g} (max relative error {worst:.3e})")
        else:
            print(f"identity FAILS at {tol:g} (max relative error {worst:.3e})")
    print(f"results: {out}")
    return EXIT_OK if res.passed else EXIT_FAIL


COMMANDS = {
    ("graph", "generate"): _graph_generate,
    ("graph", "validate"): _graph_validate,
    ("energy", "eval"): _energy_eval,
    ("energy", "grad-check"): _energy_grad_check,
    ("zero-temp", "minimize"): _zero_temp_minimize,
    ("zero-temp", "sweep"): lambda a: _study(a, "w-inf-convergence"),
    ("free-energy", "exact"): lambda a: _free_energy(a, "exact"),
    ("free-energy", "ti"): lambda a: _free_energy(a, "ti"),
    ("phantom-check", None): lambda a: _study(a, "phantom"),
    ("gap-sweep", None): lambda a: _study(a, "beta-gap"),
    ("two-temp", None): lambda a: _study(a, "two-temp"),
    ("poincare", None): lambda a: _study(a, "poincare"),
    ("rank-one", None): lambda a: _study(a, "rank-one"),
    ("study", "run"): lambda a: _study(a, None, fresh=a.fresh),
}


def main(argv=None):
    """Run the command line; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        os.environ["POLYHOM_THREADS"] = str(args.threads)
    handler = COMMANDS[(args.command, getattr(args, "action", None))]
    try:
        return handler(args)
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"polyhom: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, GridTooSmall, UsageError) as exc:
        print(f"polyhom: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PolyhomError as exc:
        print(f"polyhom: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except KeyboardInterrupt:
        # checkpoint lines are flushed as points finish, so a rerun resumes
        print("polyhom: interrupted; checkpoint flushed", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
