"""Experiment dispatch, seeded cell parallelism and CSV/JSON emission."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import mpmath
import numpy as np

from .. import __version__
from ..annuli import (DoublingBound, SubpolynomialFn, bad_radii_scan, doubling_report, thin_annuli_ratio)
from ..gallery import (build_system, farey_chain_derivative, farey_closed_derivative, farey_weights,
                       finite_measure_case, induced_summable)
from ..geometry import ball_measure_bounds, bowen_parameter, geometric_potential, sample_points
from ..returns import (ZeroMassError, ball_code_target, cylinder_code_target, cylinder_target_chain,
                       empirical_law, entry_law_distance, exact_b_sequence, hsv_quantities, markov_survival,
                       pointwise_dimension)
from ..symbolic import admissible_words
from ..thermo import Potential, pressure
from .config import ExperimentConfig, parse_config

SCHEMA_VERSION = 1
WORKERS_ENV = "THINANNULI_WORKERS"

_LAW = ["cell", "target", "mu", "mu_width", "window", "n_samples", "horizon", "censored", "ambiguous", "ks",
        "ks_error_bar", "ks_tol", "status"]

COLUMNS = {
    "return-law": _LAW,
    "entry-law": _LAW,
    "thin-annuli": ["cell", "x", "k", "r", "kappa", "ratio_lower", "ratio_upper", "ball_lower", "ball_upper",
                    "ball_generation", "annulus_lower", "annulus_upper", "annulus_generation", "resolved",
                    "threshold", "status"],
    "doubling": ["cell", "x", "j", "r", "k", "ball_lower", "ball_upper", "ball_generation", "ball2_lower",
                 "ball2_upper", "ball2_generation", "G", "doubling", "shell_implied", "status"],
    "bad-radii": ["cell", "A", "r", "ratio_lower", "ratio_upper", "membership", "z_length", "bound",
                  "bound_ratio", "gamma", "generation_cap", "status"],
    "dimension": ["cell", "x", "lower", "upper", "ratio_lower", "ratio_upper", "slope", "radii_used",
                  "radii_excluded", "generation_cap", "expected", "tol", "status"],
    "pressure": ["cell", "row_type", "t", "value", "residual", "tol", "status"],
    "hsv-bound": ["cell", "target", "mu", "c", "d", "optimal_N", "c_bound", "d_bound", "sup_distance",
                  "curve_length", "tail_certified", "dps", "status"],
    "parabolic-asymptotics": ["cell", "row_type", "t", "n", "x", "derivative_chain", "derivative_closed",
                              "rel_error", "scaled", "summable", "tail_fraction", "finite_case", "status"],
}

CLAIMS = {
    "return-law": "normalized first return times to the target are close to Exp(1) in KS distance",
    "entry-law": "normalized first entry times to the target are close to Exp(1) in KS distance",
    "thin-annuli": "mu(B(x, r + r^kappa) minus B(x, r)) / mu(B(x, r)) is at most the threshold",
    "doubling": "mu(B(x, 2r)) <= log2(1/r)^(2 + eps) mu(B(x, r)) at dyadic radii",
    "bad-radii": "l(Z_x(A) cap (0, r]) <= 2 r^kappa ln G(r) / ((1 - gamma/2) ln(1 + A))",
    "dimension": "ln mu(B(x, r)) / ln r converges to the local dimension",
    "pressure": "Bowen parameter solves P(t zeta) = 0",
    "hsv-bound": "sup_t |mu(tau_U > t/mu(U)) - e^-t| <= 4 mu(U) + c(1 - ln c) with c from the best N",
    "parabolic-asymptotics": "parabolic branch derivatives decay like n^-(beta+1)/beta and the induced potential "
                             "is summable iff t > beta/(beta+1)",
}

TOLERANCES = {
    "return-law": ("ks_tol",),
    "entry-law": ("ks_tol",),
    "thin-annuli": ("threshold",),
    "doubling": ("eps",),
    "bad-radii": ("A",),
    "dimension": ("tol",),
    "pressure": ("tol",),
    "hsv-bound": (),
    "parabolic-asymptotics": (),
}


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple
    summary: dict
    csv_path: Path
    json_path: Path


# -- helpers -------------------------------------------------------------------------


@lru_cache(maxsize=8)
def _system(name: str, params_json: str):
    return build_system(name, json.loads(params_json))


def _sys(cfg: ExperimentConfig):
    return _system(cfg.system.name, json.dumps(cfg.system.params, sort_keys=True))


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def _status(ok):
    return "inconclusive" if ok is None else ("pass" if ok else "fail")


def _need_ifs(system):
    if system.ifs is None:
        raise ValueError(f"system {system.name!r} has no geometric realization")
    return system.ifs


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating, Fraction, mpmath.mpf)):
        return repr(float(v))
    return str(v)


def _word_str(w) -> str:
    return "".join(str(a) for a in w) if all(a < 10 for a in w) else ".".join(str(a) for a in w)


def _points(cfg, system, n):
    ifs = _need_ifs(system)
    return sample_points(ifs, system.measure, n, _rng(cfg.seed, 0))


# -- kinds ---------------------------------------------------------------------------


def _law_cells(cfg, system):
    p = cfg.params
    cells = [{"word": list(w)} for w in p.words]
    if p.ball_center is not None:
        cells.append({"ball": [p.ball_center, p.ball_radius]})
    if not cells:
        raise ValueError("no targets")
    return cells


def _law_cell(cfg, system, i, cell):
    p = cfg.params
    m = system.measure
    kind = "return" if cfg.kind == "return-law" else "entry"
    if "word" in cell:
        w = tuple(cell["word"])
        L = max(len(w), m.order)
        target = cylinder_code_target(m.alphabet_size, [w], L)
        mu = m.mass(w)
        width = 0.0
        label = _word_str(w)
    else:
        ifs = _need_ifs(system)
        x, r = cell["ball"]
        conv = Fraction if ifs.exact else float
        mu = ball_measure_bounds(ifs, m, conv(x), conv(r), p.ball_depth)
        width = mu.width
        target = ball_code_target(ifs, m, x, r, p.ball_depth)
        label = f"B({x!r},{r!r})"
    law = empirical_law(m, target, mu, p.n_samples, cfg.seed, kind, p.horizon, stream=i + 1)
    status = "inconclusive" if law.flagged else _status(law.ks <= p.ks_tol)
    mu_f = law.mu
    return [dict(cell=i, target=label, mu=mu_f, mu_width=width, window=target.L, n_samples=p.n_samples,
                 horizon=law.horizon, censored=law.censored, ambiguous=law.ambiguous, ks=law.ks,
                 ks_error_bar=law.ks_error_bar, ks_tol=p.ks_tol, status=status)]


def _annuli_cells(cfg, system):
    return [{"x": x} for x in _points(cfg, system, cfg.params.n_points)]


def _annuli_cell(cfg, system, i, cell):
    p = cfg.params
    ifs = _need_ifs(system)
    kappa = SubpolynomialFn.from_dict(p.kappa)
    rng = _rng(cfg.seed, i + 1)
    x = cell["x"]
    rows = []
    for k in range(p.k_min, p.k_max + 1):
        u = rng.random()
        r = float(p.base) ** -k * (1 + p.jitter * (2 * u - 1))
        r = Fraction(r) if ifs.exact else r
        q = thin_annuli_ratio(ifs, system.measure, x, r, kappa, p.generation_cap)
        st = _status(q.upper <= p.threshold) if q.resolved else "inconclusive"
        rows.append(dict(cell=i, x=x, k=k, r=r, kappa=q.kappa, ratio_lower=q.lower, ratio_upper=q.upper,
                         ball_lower=q.ball.lower, ball_upper=q.ball.upper, ball_generation=q.ball.generation,
                         annulus_lower=q.annulus.lower, annulus_upper=q.annulus.upper,
                         annulus_generation=q.annulus.generation, resolved=q.resolved, threshold=p.threshold,
                         status=st))
    return rows


def _doubling_cells(cfg, system):
    return [{"x": x} for x in _points(cfg, system, cfg.params.n_points)]


def _doubling_cell(cfg, system, i, cell):
    p = cfg.params
    ifs = _need_ifs(system)
    js = list(range(p.j_min, p.j_max + 1))
    grid = [Fraction(1, 2**j) if ifs.exact else 2.0**-j for j in js]
    rep = doubling_report(ifs, system.measure, cell["x"], grid, p.eps, p.generation_cap)
    rows = []
    for j, row in zip(js, rep.rows):
        st = _status(row.doubling) if row.resolved else "inconclusive"
        rows.append(dict(cell=i, x=cell["x"], j=j, r=row.r, k=row.k, ball_lower=row.ball.lower,
                         ball_upper=row.ball.upper, ball_generation=row.ball.generation,
                         ball2_lower=row.ball2.lower, ball2_upper=row.ball2.upper,
                         ball2_generation=row.ball2.generation, G=row.G, doubling=row.doubling,
                         shell_implied=row.shell_implied, status=st))
    return rows


def _bad_cells(cfg, system):
    return [{"A": a} for a in cfg.params.A]


def _bad_cell(cfg, system, i, cell):
    p = cfg.params
    ifs = _need_ifs(system)
    kappa = SubpolynomialFn.from_dict(p.kappa)
    G = DoublingBound.log_power(p.eps, [2.0**-j for j in range(p.gamma_j_min, 61)])
    grid = [Fraction(1, 2**j) for j in range(p.j_min, p.j_max + 1)]
    x = Fraction(p.x) if ifs.exact else float(p.x)
    scan = bad_radii_scan(ifs, system.measure, x, cell["A"], kappa, grid, G, p.generation_cap)
    rows = []
    for row, b in zip(scan.rows, scan.bound_rows):
        st = "inconclusive" if row.status == "inconclusive" else _status(b.ratio <= 1)
        rows.append(dict(cell=i, A=cell["A"], r=row.r, ratio_lower=row.lower, ratio_upper=row.upper,
                         membership=row.status, z_length=b.measured, bound=b.bound, bound_ratio=b.ratio,
                         gamma=scan.gamma, generation_cap=p.generation_cap, status=st))
    return rows


def _dimension_cells(cfg, system):
    return [{"x": x} for x in cfg.params.points]


def _dimension_cell(cfg, system, i, cell):
    p = cfg.params
    ifs = _need_ifs(system)
    grid = [Fraction(1, p.base**k) if ifs.exact else float(p.base) ** -k for k in range(p.k_min, p.k_max + 1)]
    x = Fraction(cell["x"]) if ifs.exact or isinstance(cell["x"], str) else float(cell["x"])
    est = pointwise_dimension(ifs, system.measure, x, grid, p.generation_cap)
    if p.expected is None:
        st = "n/a"
    else:
        st = _status(max(abs(est.lower - p.expected), abs(est.upper - p.expected)) <= p.tol)
    return [dict(cell=i, x=x, lower=est.lower, upper=est.upper, ratio_lower=est.ratio_lower,
                 ratio_upper=est.ratio_upper, slope=est.slope, radii_used=est.used, radii_excluded=est.excluded,
                 generation_cap=p.generation_cap, expected=p.expected, tol=p.tol, status=st)]


def _pressure_cells(cfg, system):
    return [{"t": t} for t in cfg.params.t] + ([{"bowen": True}] if cfg.params.bowen and system.ifs else [])


def _pressure_cell(cfg, system, i, cell):
    p = cfg.params
    if system.ifs is not None:
        zeta = geometric_potential(system.ifs)
    else:
        zeta = Potential.constant(system.space, 0.0)
    if "bowen" in cell:
        h = bowen_parameter(system.ifs)
        res = pressure(system.space, zeta.scaled(h))
        return [dict(cell=i, row_type="bowen", t=None, value=h, residual=res, tol=p.tol,
                     status=_status(abs(res) <= p.tol))]
    v = pressure(system.space, zeta.scaled(cell["t"]))
    return [dict(cell=i, row_type="pressure", t=cell["t"], value=v, residual=None, tol=p.tol, status="n/a")]


def _hsv_cells(cfg, system):
    p = cfg.params
    words = [list(w) for w in p.words]
    for n in range(1, p.depth + 1):
        words += [list(w) for w in admissible_words(system.space, n) if system.measure.mass(w) > 0]
    if not words:
        raise ValueError("no targets")
    return [{"word": w} for w in words]


def _hsv_cell(cfg, system, i, cell):
    p = cfg.params
    w = tuple(cell["word"])
    ch = cylinder_target_chain(system.measure, [w])
    entry, ret = markov_survival(ch.chain, ch.U, p.N_max, p.dps)
    b = exact_b_sequence(ch.chain, ch.U, p.N_max, p.dps)
    with mpmath.workdps(p.dps):
        mu = mpmath.fsum(mpmath.mpf(float(ch.chain.pi[u])) for u in ch.U)
        rep = hsv_quantities(entry, ret, mu, b, p.N_max)
    sup, K, cert = entry_law_distance(ch.chain, ch.U, p.dps)
    ok = bool(sup <= rep.d_bound) if cert else None
    return [dict(cell=i, target=_word_str(w), mu=mu, c=rep.c, d=rep.d, optimal_N=rep.optimal_N,
                 c_bound=rep.c_bound, d_bound=rep.d_bound, sup_distance=sup, curve_length=K + 1,
                 tail_certified=cert, dps=p.dps, status=_status(ok))]


def _parabolic_cells(cfg, system):
    p = cfg.params
    return [{"n": n} for n in p.n] + [{"t": t} for t in p.t]


def _parabolic_cell(cfg, system, i, cell):
    p = cfg.params
    row = dict(cell=i, t=None, n=None, x=None, derivative_chain=None, derivative_closed=None, rel_error=None,
               scaled=None, summable=None, tail_fraction=None, finite_case=None)
    if "n" in cell:
        n, x = int(cell["n"]), float(p.x)
        a, c = farey_chain_derivative(n, x), farey_closed_derivative(n, x)
        err = abs(a - c) / abs(c)
        scaled = n**2 * abs(a)
        ok = err <= 1e-10 and (n < 9 or 0.8 <= scaled <= 1.0)
        row.update(row_type="derivative", n=n, x=x, derivative_chain=a, derivative_closed=c, rel_error=err,
                   scaled=scaled, status=_status(ok))
    else:
        t = float(cell["t"])
        summable = induced_summable(t)
        frac = None
        if summable:
            _, tail, total = farey_weights(t, p.N_trunc)
            frac = tail / total
        row.update(row_type="summability", t=t, summable=summable, tail_fraction=frac,
                   finite_case=finite_measure_case(t), status=_status(summable == (t > 0.5)))
    return [row]


KINDS = {
    "return-law": (_law_cells, _law_cell),
    "entry-law": (_law_cells, _law_cell),
    "thin-annuli": (_annuli_cells, _annuli_cell),
    "doubling": (_doubling_cells, _doubling_cell),
    "bad-radii": (_bad_cells, _bad_cell),
    "dimension": (_dimension_cells, _dimension_cell),
    "pressure": (_pressure_cells, _pressure_cell),
    "hsv-bound": (_hsv_cells, _hsv_cell),
    "parabolic-asymptotics": (_parabolic_cells, _parabolic_cell),
}


def _system_for(cfg):
    return None if cfg.kind == "parabolic-asymptotics" else _sys(cfg)


def _run_cell(cfg_dict: dict, i: int, cell: dict) -> list:
    cfg = parse_config(cfg_dict)
    system = _system_for(cfg)
    try:
        return KINDS[cfg.kind][1](cfg, system, i, cell)
    except (ZeroMassError, MemoryError) as exc:
        # budget or support failures are data, not crashes
        return [{"cell": i, "status": "inconclusive", "target": f"error: {exc}"}]


def worker_count(workers=None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if workers is None and env:
        workers = int(env)
    return max(1, int(workers or 1))


# -- aggregates ----------------------------------------------------------------------


def _aggregate(cfg, rows) -> dict:
    extra = {}
    if cfg.kind == "thin-annuli":
        res = [r for r in rows if r.get("resolved")]
        good = sum(r["status"] == "pass" for r in res)
        by_k = {}
        for r in res:
            by_k[r["k"]] = max(by_k.get(r["k"], 0.0), float(r["ratio_upper"]))
        ks = sorted(by_k)
        extra = {"resolved": len(res), "pass_fraction": good / len(res) if res else None,
                 "max_ratio_by_scale": {str(k): by_k[k] for k in ks},
                 "max_nonincreasing": all(by_k[a] >= by_k[b] for a, b in zip(ks, ks[1:]))}
    elif cfg.kind == "doubling":
        res = [r for r in rows if r["status"] != "inconclusive"]
        good = sum(r["status"] == "pass" for r in res)
        extra = {"resolved": len(res), "pass_fraction": good / len(res) if res else None,
                 "violations": [[float(r["x"]), float(r["r"])] for r in rows if r["status"] == "fail"]}
    elif cfg.kind == "bad-radii":
        per = {}
        for r in rows:
            if "z_length" not in r:
                continue
            e = per.setdefault(str(r["A"]), {"z_length_total": 0.0, "worst_bound_ratio": 0.0, "in": 0,
                                             "inconclusive": 0})
            e["z_length_total"] = max(e["z_length_total"], float(r["z_length"]))
            e["worst_bound_ratio"] = max(e["worst_bound_ratio"], float(r["bound_ratio"]))
            e["in"] += r["membership"] == "in"
            e["inconclusive"] += r["membership"] == "inconclusive"
        extra = {"per_A": per}
    elif cfg.kind in ("return-law", "entry-law"):
        extra = {"max_ks": max((float(r["ks"]) for r in rows if "ks" in r), default=None)}
    return extra


# -- output --------------------------------------------------------------------------


def render_csv(kind: str, rows) -> str:
    cols = COLUMNS[kind]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(a) for k, a in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(a) for a in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (Fraction, np.floating, mpmath.mpf)):
        return float(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def run_experiment(config, output_dir=None, workers=None) -> ExperimentReport:
    """Run every cell of ``config`` and write ``<name>.csv`` and ``<name>.json``.

    Cells are independent; their RNG streams are ``SeedSequence([seed, cell])``
    (stream 0 draws shared sample points), so the worker count never changes
    the rows.  Claim failures are recorded as rows with status ``fail``.
    """
    cfg = config if isinstance(config, ExperimentConfig) else parse_config(config)
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    system = _system_for(cfg)
    cells = KINDS[cfg.kind][0](cfg, system)
    cfg_dict = cfg.to_dict()
    n = worker_count(workers)
    if n > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(_run_cell, [cfg_dict] * len(cells), range(len(cells)), cells))
    else:
        chunks = [_run_cell(cfg_dict, i, c) for i, c in enumerate(cells)]
    rows = tuple(r for chunk in chunks for r in chunk)
    counts = {s: sum(r["status"] == s for r in rows) for s in ("pass", "fail", "inconclusive")}
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": cfg.kind,
        "claim": CLAIMS[cfg.kind],
        "counts": counts,
        "rows": len(rows),
        "tolerances": {k: getattr(cfg.params, k) for k in TOLERANCES[cfg.kind]},
        "aggregate": _aggregate(cfg, rows),
        "wall_time_s": time.perf_counter() - t0,
        "config": cfg_dict,
        "version": __version__,
    }
    csv_path = out / f"{cfg.name}.csv"
    json_path = out / f"{cfg.name}.json"
    csv_path.write_text(render_csv(cfg.kind, rows))
    json_path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return ExperimentReport(rows, summary, csv_path, json_path)
