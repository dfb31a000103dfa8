"""Entry and return time statistics.

Exact side: survival curves of a finite stationary chain avoiding a set of
states, the decomposition ``a_N, b_N, c(U), d(U)`` bounding the distance to
the exponential law, and the exact sup distance of the normalized step
function from ``e^-t``.  Curves can be computed in floats or with mpmath
at a chosen precision.

Empirical side: a vectorised sampler of first entry/return times for
cylinder and ball targets, the KS distance to Exp(1), correlation probes,
pointwise dimension estimates and no-small-returns bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import mpmath
import numpy as np

from .geometry import ConformalIFS, MeasureInterval, Shell, ball_measure_bounds
from .symbolic import CylinderMeasure, SymbolicSpace, Word, block_index_table, sample_sequences, word_self_overlap
from .thermo import MarkovMeasure

MAX_CODE_BITS = 62


class ZeroMassError(ValueError):
    pass


class RejectionSamplingError(RuntimeError):
    pass


class EmptySampleError(ValueError):
    pass


# -- targets and curves -----------------------------------------------------------


@dataclass(frozen=True)
class TargetSet:
    """``kind`` is ``"cylinder"`` (``words``) or ``"ball"`` (``center``, ``radius``)."""

    kind: str
    words: tuple = ()
    center: object = None
    radius: object = None
    mass: object = None

    @classmethod
    def cylinder(cls, *words, measure: Optional[CylinderMeasure] = None) -> "TargetSet":
        words = tuple(tuple(w) for w in words)
        mass = math.fsum(measure.mass(w) for w in words) if measure is not None else None
        return cls("cylinder", words, mass=mass)

    @classmethod
    def ball(cls, center, radius, mass: Optional[MeasureInterval] = None) -> "TargetSet":
        return cls("ball", (), center, radius, mass)

    @property
    def mass_value(self) -> float:
        if isinstance(self.mass, MeasureInterval):
            return self.mass.midpoint
        return float(self.mass)


@dataclass(frozen=True)
class SurvivalCurve:
    """``values[k-1] = s_k`` for ``k = 1..K``; ``s_0 = 1`` is implicit."""

    values: tuple
    kind: str
    exact: bool

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k: int):
        if k == 0:
            return 1
        return self.values[k - 1]


def _mp_vec(v):
    return [mpmath.mpf(float(a)) for a in v]


def _states(U) -> list:
    U = sorted(set(int(u) for u in U))
    if not U:
        raise ZeroMassError("empty target")
    return U


def markov_survival(m: MarkovMeasure, U: Sequence[int], k_max: int, dps: Optional[int] = None) -> tuple:
    """Entry and return survival curves ``mu(tau_U > k)`` and ``mu_U(tau_U > k)``.

    ``Q`` is the transition matrix with the columns of ``U`` zeroed, so
    ``Q^k 1`` is the probability of avoiding ``U`` at steps ``1..k``.  With
    ``dps`` set, the float entries of ``P`` and ``pi`` are taken as exact
    and propagated with mpmath at that many digits.
    """
    U = _states(U)
    n = m.n_states
    mu = float(sum(m.pi[u] for u in U))
    if mu <= 0:
        raise ZeroMassError("mu(U) = 0")
    if dps is None:
        Q = m.P.copy()
        Q[:, U] = 0.0
        cond = np.zeros(n)
        cond[U] = m.pi[U] / mu
        w = np.ones(n)
        entry, ret = [], []
        for _ in range(k_max):
            w = Q @ w
            entry.append(float(m.pi @ w))
            ret.append(float(cond @ w))
        return SurvivalCurve(tuple(entry), "entry", False), SurvivalCurve(tuple(ret), "return", False)
    with mpmath.workdps(dps):
        P = [_mp_vec(row) for row in m.P]
        pi = _mp_vec(m.pi)
        Us = set(U)
        muU = mpmath.fsum(pi[u] for u in U)
        cond = [pi[i] / muU if i in Us else mpmath.mpf(0) for i in range(n)]
        w = [mpmath.mpf(1)] * n
        entry, ret = [], []
        for _ in range(k_max):
            w = [mpmath.fsum(P[i][j] * w[j] for j in range(n) if j not in Us) for i in range(n)]
            entry.append(mpmath.fsum(pi[i] * w[i] for i in range(n)))
            ret.append(mpmath.fsum(cond[i] * w[i] for i in range(n)))
    return SurvivalCurve(tuple(entry), "entry", True), SurvivalCurve(tuple(ret), "return", True)


def exact_b_N(m: MarkovMeasure, U: Sequence[int], N: int, dps: Optional[int] = None):
    """``sup_V |mu_U(T^-N V) - mu(V)|``: the positive part of ``mu_U P^N - pi``."""
    return exact_b_sequence(m, U, N, dps)[N - 1]


def exact_b_sequence(m: MarkovMeasure, U: Sequence[int], N_max: int, dps: Optional[int] = None) -> list:
    U = _states(U)
    n = m.n_states
    if dps is None:
        law = np.zeros(n)
        law[U] = m.pi[U] / m.pi[U].sum()
        out = []
        for _ in range(N_max):
            law = law @ m.P
            out.append(float(np.sum(np.maximum(0.0, law - m.pi))))
        return out
    with mpmath.workdps(dps):
        P = [_mp_vec(row) for row in m.P]
        pi = _mp_vec(m.pi)
        muU = mpmath.fsum(pi[u] for u in U)
        law = [pi[i] / muU if i in U else mpmath.mpf(0) for i in range(n)]
        out = []
        for _ in range(N_max):
            law = [mpmath.fsum(law[i] * P[i][j] for i in range(n)) for j in range(n)]
            out.append(mpmath.fsum(max(mpmath.mpf(0), law[j] - pi[j]) for j in range(n)))
    return out


def _xlogterm(c):
    """``c (1 - ln c)`` with the continuous value 0 at ``c = 0``."""
    if c == 0:
        return 0 * c
    if isinstance(c, mpmath.mpf):
        return c * (1 - mpmath.log(c))
    return c * (1 - math.log(c))


def d_value(mu_U, c):
    return 4 * mu_U + _xlogterm(c)


@dataclass(frozen=True)
class HsvReport:
    mu: object
    a: tuple
    b: tuple
    bound: tuple
    c_k: tuple
    c: object
    d: object
    optimal_N: Optional[int]
    c_bound: object
    d_bound: object


def hsv_quantities(entry: SurvivalCurve, ret: SurvivalCurve, mu_U, b_N: Optional[Sequence] = None,
                   N_max: Optional[int] = None) -> HsvReport:
    """Assemble ``a_N, b_N, c(U), d(U)`` from survival curves.

    ``c_bound`` is ``min(1, min_N a_N + b_N + N mu(U))`` and ``d_bound`` the
    value of ``d`` with ``c_bound`` in place of ``c`` (``c(1 - ln c)`` is
    increasing on ``[0, 1]``).
    """
    K = min(len(entry), len(ret))
    if K < 1:
        raise ValueError("curves must be non-empty")
    c_k = tuple(ret[k] - entry[k] for k in range(1, K + 1))
    c = max(abs(v) for v in c_k)
    d = d_value(mu_U, c)
    a, bound = (), ()
    opt = None
    c_b = d_b = None
    if b_N is not None:
        N_max = min(N_max or len(b_N), len(b_N), K)
        a = tuple(1 - ret[N] for N in range(1, N_max + 1))
        bound = tuple(a[N - 1] + b_N[N - 1] + N * mu_U for N in range(1, N_max + 1))
        opt = int(min(range(N_max), key=lambda i: bound[i])) + 1
        c_b = min(bound[opt - 1], 1)
        d_b = d_value(mu_U, c_b)
    return HsvReport(mu_U, a, tuple(b_N[: len(a)]) if b_N is not None else (), bound, c_k, c, d, opt, c_b, d_b)


def exponential_sup_distance(values: Sequence, mu) -> tuple:
    """Sup over ``t >= 0`` of ``|s_floor(t/mu) - e^-t|`` from ``s_1..s_{K+1}``.

    Returns ``(sup over the first K+1 steps, tail bound)``; the tail bound
    ``max(s_{K+1}, e^-(K+1)mu)`` dominates every later deviation.  Works on
    floats or mpmath numbers.
    """
    use_mp = isinstance(mu, mpmath.mpf) or any(isinstance(v, mpmath.mpf) for v in values[:1])
    exp = mpmath.exp if use_mp else math.exp
    K = len(values) - 1
    s = [1] + list(values)
    best = 0 * mu
    for k in range(K + 1):
        lo, hi = exp(-(k + 1) * mu), exp(-k * mu)
        best = max(best, abs(s[k] - hi), abs(s[k] - lo))
    tail = max(s[K + 1], exp(-(K + 1) * mu))
    return best, tail


def entry_law_distance(m: MarkovMeasure, U: Sequence[int], dps: Optional[int] = 50, k_start: int = 64,
                       k_limit: int = 1 << 16) -> tuple:
    """Exact normalized-entry sup distance, extending the curve until the tail is dominated."""
    U = _states(U)
    K = k_start
    while True:
        entry, _ = markov_survival(m, U, K + 1, dps)
        if dps is None:
            mu = float(sum(m.pi[u] for u in U))
            sup, tail = exponential_sup_distance(entry.values, mu)
        else:
            with mpmath.workdps(dps):
                mu = mpmath.fsum(mpmath.mpf(float(m.pi[u])) for u in U)
                sup, tail = exponential_sup_distance(entry.values, mu)
        if tail <= sup or K >= k_limit:
            return sup, K, tail <= sup
        K *= 2


# -- cylinder targets as chains --------------------------------------------------------


@dataclass(frozen=True)
class CylinderChain:
    chain: MarkovMeasure
    blocks: tuple
    U: tuple
    L: int
    mass: float


def cylinder_target_chain(measure: CylinderMeasure, words: Sequence[Sequence[int]], L: Optional[int] = None) -> CylinderChain:
    """Recode ``measure`` as a first-order chain on ``L``-blocks with target ``U``.

    ``L = max(max |w|, order)``; the target states are the blocks that
    begin with one of ``words``.
    """
    words = [tuple(w) for w in words]
    L = L or max(max(len(w) for w in words), measure.order)
    from .symbolic import admissible_words

    blocks = [b for b in admissible_words(measure.space, L) if measure.mass(b) > 0]
    index = {b: i for i, b in enumerate(blocks)}
    n = len(blocks)
    P = np.zeros((n, n))
    pi = np.array([measure.mass(b) for b in blocks])
    for i, b in enumerate(blocks):
        for e in measure.space.followers(b[-1]):
            j = index.get(b[1:] + (e,))
            if j is not None:
                P[i, j] = measure.mass(b + (e,)) / pi[i]
    P /= P.sum(axis=1, keepdims=True)
    pi /= pi.sum()
    U = tuple(i for i, b in enumerate(blocks) if any(b[: len(w)] == w for w in words))
    if not U:
        raise ZeroMassError("target has zero mass")
    return CylinderChain(MarkovMeasure(P, pi), tuple(blocks), U, L, float(pi[list(U)].sum()))


# -- empirical laws -------------------------------------------------------------------


@dataclass(frozen=True)
class Ecdf:
    """Sorted normalized times ``t_i = tau_i mu(U)``; censored samples lie beyond ``horizon``."""

    times: np.ndarray
    n_total: int
    censored: int = 0
    horizon: float = math.inf

    def __post_init__(self):
        t = np.sort(np.asarray(self.times, dtype=float))
        if np.any(t < 0):
            raise ValueError("times must be nonnegative")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.n_total if self.n_total else 0.0

    def survival(self, t: float) -> float:
        return 1.0 - np.searchsorted(self.times, t, side="right") / self.n_total


def ks_exponential(e: Ecdf) -> float:
    """``sup_t |F_hat(t) - (1 - e^-t)|`` evaluated on both sides of every jump."""
    if e.n_total == 0:
        raise EmptySampleError("empty sample")
    t = e.times
    if t.size == 0:
        return 1.0
    u, counts = np.unique(t, return_counts=True)
    after = np.cumsum(counts) / e.n_total
    before = after - counts / e.n_total
    F = -np.expm1(-u)
    d = max(float(np.max(np.abs(after - F))), float(np.max(np.abs(before - F))))
    return max(d, e.censored / e.n_total)


@dataclass(frozen=True)
class CodeTarget:
    """Target windows of length ``L`` as sorted half-open code ranges."""

    L: int
    starts: np.ndarray
    ends: np.ndarray
    ambiguous: int = 0

    def hit(self, codes: np.ndarray) -> np.ndarray:
        i = np.searchsorted(self.starts, codes, side="right") - 1
        ok = i >= 0
        out = np.zeros(codes.shape, dtype=bool)
        out[ok] = codes[ok] < self.ends[i[ok]]
        return out


def _merge_ranges(ranges):
    ranges.sort()
    merged = []
    for a, b in ranges:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    starts = np.array([a for a, _ in merged], dtype=np.int64)
    ends = np.array([b for _, b in merged], dtype=np.int64)
    return starts, ends


def _word_code(word, base):
    c = 0
    for a in word:
        c = c * base + int(a)
    return c


def _max_window(base: int) -> int:
    return max(1, MAX_CODE_BITS // max(1, math.ceil(math.log2(base))))


def cylinder_code_target(base: int, words: Sequence[Sequence[int]], L: Optional[int] = None) -> CodeTarget:
    words = [tuple(w) for w in words]
    L = L or max(len(w) for w in words)
    if L > _max_window(base):
        raise ValueError("window too long for 64-bit codes")
    ranges = []
    for w in words:
        span = base ** (L - len(w))
        c = _word_code(w, base) * span
        ranges.append((c, c + span))
    s, e = _merge_ranges(ranges)
    return CodeTarget(L, s, e)


def ball_code_target(ifs: ConformalIFS, measure: CylinderMeasure, x, r, L: int) -> CodeTarget:
    """Code ranges of length-``L`` windows whose cylinders meet ``B(x, r)``.

    Ranges from hulls inside the ball are exact; hulls straddling the
    boundary at depth ``L`` are included and counted as ambiguous.
    """
    base = ifs.space.alphabet_size
    if L > _max_window(base):
        raise ValueError("window too long for 64-bit codes")
    if ifs.exact:
        x, r = Fraction(x), Fraction(r)
    region = Shell(x, 0, r)
    ranges, amb = [], 0
    stack = [ifs.root()]
    while stack:
        node = stack.pop()
        for e in ifs.followers(node.word):
            ch = ifs.child(node, e)
            if measure.mass(ch.word) == 0.0:
                continue
            k = region.classify(ch.lo, ch.hi)
            if k == -1:
                continue
            if k == 1 or len(ch.word) == L:
                span = base ** (L - len(ch.word))
                c = _word_code(ch.word, base) * span
                ranges.append((c, c + span))
                amb += k == 0
            else:
                stack.append(ch)
    if not ranges:
        raise ZeroMassError("ball misses the support")
    s, e = _merge_ranges(ranges)
    return CodeTarget(L, s, e, amb)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def _window_codes(rows: np.ndarray, base: int) -> np.ndarray:
    codes = np.zeros(rows.shape[0], dtype=np.int64)
    for j in range(rows.shape[1]):
        codes = codes * base + rows[:, j]
    return codes


def simulate_first_hits(measure: CylinderMeasure, target: CodeTarget, n: int, horizon: int,
                        rng: np.random.Generator, kind: str = "entry", max_attempts: int = 10**8) -> tuple:
    """First ``k >= 1`` with the window at time ``k`` in the target, for ``n`` starts.

    Entry starts are ``measure``-distributed; return starts are drawn by
    rejection inside the target.  Returns ``(times, censored_mask)``.
    """
    base = measure.alphabet_size
    L = max(target.L, measure.order)
    if L != target.L:
        raise ValueError("target windows shorter than the measure order")
    if kind == "entry":
        codes = _window_codes(sample_sequences(measure, n, L, rng), base)
    elif kind == "return":
        got, drawn = [], 0
        need = n
        while need > 0:
            batch = max(1024, 4 * need)
            c = _window_codes(sample_sequences(measure, batch, L, rng), base)
            drawn += batch
            c = c[target.hit(c)]
            got.append(c[:need])
            need -= len(got[-1])
            if need > 0 and drawn > max_attempts:
                raise RejectionSamplingError(f"only {n - need} of {n} starts accepted after {drawn} draws")
        codes = np.concatenate(got)
    else:
        raise ValueError("kind must be 'entry' or 'return'")
    table = block_index_table(measure)
    cum = np.cumsum(measure.transition, axis=1)
    mod_state = base ** measure.order
    mod_window = base ** (L - 1)
    times = np.full(n, horizon, dtype=np.int64)
    active = np.arange(n)
    for step in range(1, horizon + 1):
        state = table[codes % mod_state]
        u = rng.random(active.size)
        sym = np.minimum((u[:, None] >= cum[state]).sum(axis=1), base - 1)
        codes = (codes % mod_window) * base + sym
        h = target.hit(codes)
        if h.any():
            times[active[h]] = step
            keep = ~h
            active = active[keep]
            codes = codes[keep]
            if active.size == 0:
                break
    censored = np.zeros(n, dtype=bool)
    censored[active] = True
    return times, censored


@dataclass(frozen=True)
class EmpiricalLaw:
    ecdf: Ecdf
    ks: float
    mu: float
    horizon: int
    censored: int
    ambiguous: int
    ks_error_bar: float = 0.0

    @property
    def flagged(self) -> bool:
        return self.ecdf.censored_fraction >= 0.01


def empirical_law(measure: CylinderMeasure, target: CodeTarget, mu_U, n_samples: int, seed: int,
                  kind: str = "entry", horizon: Optional[int] = None, stream: int = 0) -> EmpiricalLaw:
    """Normalized first entry (or return) times and their KS distance to Exp(1).

    ``mu_U`` may be a float or a ``MeasureInterval``; intervals normalize by
    the midpoint and carry the induced KS error bar.
    """
    if isinstance(mu_U, MeasureInterval):
        mu, err = mu_U.midpoint, mu_U.width / 2
    else:
        mu, err = float(mu_U), 0.0
    if mu <= 0:
        raise ZeroMassError("mu(U) = 0")
    horizon = horizon or math.ceil(50.0 / mu)
    times, cens = simulate_first_hits(measure, target, n_samples, horizon, _rng(seed, stream), kind)
    e = Ecdf(times[~cens] * mu, n_samples, int(cens.sum()), horizon * mu)
    tmax = float(e.times[-1]) if e.times.size else 0.0
    return EmpiricalLaw(e, ks_exponential(e), mu, horizon, int(cens.sum()), target.ambiguous,
                        err / mu * tmax)


def ks_geometric(p: float) -> float:
    """KS distance of the normalized geometric law (success ``p``) from Exp(1)."""
    return exponential_sup_distance([(1 - p) ** k for k in range(1, 1 + math.ceil(60 / p))], p)[0]


# -- bumps and correlations ------------------------------------------------------------


def bump_eval(r: float, alpha: float, t):
    """Lipschitz bump: 1 on ``[0, r]``, linear ramp to 0 on ``[r, r + r^alpha]``."""
    w = r**alpha
    t = np.asarray(t, dtype=float)
    out = np.clip((r + w - t) / w, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def bump_function(x, r: float, alpha: float) -> Callable:
    """``z -> bump_eval(r, alpha, |z - x|)``."""

    def g(z):
        z = np.asarray(z, dtype=float)
        d = np.abs(z - float(x)) if z.ndim <= 1 else np.linalg.norm(z - np.asarray(x, dtype=float), axis=-1)
        return bump_eval(r, alpha, d)

    return g


def coded_points(ifs: ConformalIFS, seqs: np.ndarray) -> np.ndarray:
    """Hull centers of the cylinders spelled by the rows of ``seqs``."""
    if ifs.dim == 1 and ifs.similarity:
        # compose affine maps left to right with float coefficients
        S = np.ones(seqs.shape[0])
        T = np.zeros(seqs.shape[0])
        ratio = np.array([float(m.ratio) * m.orientation for m in ifs.maps])
        trans = np.array([float(m.translation) for m in ifs.maps])
        for j in range(seqs.shape[1]):
            e = seqs[:, j]
            T = T + S * trans[e]
            S = S * ratio[e]
        a, b = float(ifs.seed[0]), float(ifs.seed[1])
        return T + S * (a + b) / 2
    return np.array([float((ifs.node(tuple(row)).lo + ifs.node(tuple(row)).hi) / 2) for row in seqs])


@dataclass(frozen=True)
class CorrelationProbe:
    n: tuple
    estimate: tuple
    stderr: tuple
    C: Optional[float]
    gamma: Optional[float]


def correlation_probe(measure: CylinderMeasure, g: Callable, f: Callable, n_list: Sequence[int], n_samples: int,
                      seed: int = 0, window: int = 1) -> CorrelationProbe:
    """Monte Carlo ``|mu(f o T^n g) - mu(g) mu(f)|`` from sampled sequences.

    ``g`` and ``f`` map an integer array of sequences (rows) to values; ``f``
    sees the sequence shifted by ``n``.  The returned ``(C, gamma)`` is a
    least-squares fit of ``ln |estimate|`` over the estimates exceeding three
    standard errors, and is an empirical estimate only.
    """
    n_list = [int(n) for n in n_list]
    rng = _rng(seed, 0)
    seqs = sample_sequences(measure, n_samples, max(n_list) + window + 64, rng)
    gv = np.asarray(g(seqs), dtype=float)
    est, se = [], []
    for n in n_list:
        fv = np.asarray(f(seqs[:, n:]), dtype=float)
        mf, mg = fv.mean(), gv.mean()
        est.append(float(abs(np.mean(fv * gv) - mf * mg)))
        infl = fv * gv - mf * gv - mg * fv
        se.append(float(infl.std(ddof=1) / math.sqrt(n_samples)))
    keep = [(n, e) for n, e, s in zip(n_list, est, se) if e > 3 * s and e > 0]
    C = gam = None
    if len(keep) >= 2:
        ns = np.array([k[0] for k in keep], dtype=float)
        ys = np.log([k[1] for k in keep])
        slope, icpt = np.polyfit(ns, ys, 1)
        C, gam = float(math.exp(icpt)), float(math.exp(slope))
    return CorrelationProbe(tuple(n_list), tuple(est), tuple(se), C, gam)


def exact_correlation(m: MarkovMeasure, f: np.ndarray, g: np.ndarray, n: int) -> float:
    """``|E[g(X_0) f(X_n)] - E g E f|`` for state functions of a stationary chain."""
    Pn = np.linalg.matrix_power(m.P, n)
    joint = float((m.pi * g) @ Pn @ f)
    return abs(joint - float(m.pi @ g) * float(m.pi @ f))


# -- pointwise dimension ---------------------------------------------------------------


@dataclass(frozen=True)
class DimensionEstimate:
    lower: float
    upper: float
    ratio_lower: float
    ratio_upper: float
    slope: float
    used: int
    excluded: int


def pointwise_dimension(ifs: ConformalIFS, mu: CylinderMeasure, x, r_grid: Sequence, generation_cap: int = 60,
                        node_budget: int = 10**6) -> DimensionEstimate:
    """Local dimension of the projected measure at ``x`` along a radii grid.

    ``lower``/``upper`` are the extreme log-log slopes between consecutive
    grid radii, using interval ends pessimistically.  ``ratio_*`` are the
    extremes of ``ln mu(B(x, r)) / ln r`` itself and ``slope`` the least
    squares fit of ``ln mu`` on ``ln r``.
    """
    conv = Fraction if ifs.exact else float
    grid = sorted((conv(r) for r in r_grid), reverse=True)
    rows = []
    excluded = 0
    for r in grid:
        b = ball_measure_bounds(ifs, mu, conv(x), r, generation_cap, node_budget)
        if b.lower <= 0:
            excluded += 1
            continue
        rows.append((math.log(float(r)), math.log(b.lower), math.log(b.upper)))
    if len(rows) < 2:
        raise ValueError("fewer than two resolved radii")
    lo = math.inf
    hi = -math.inf
    for (lr0, l0, u0), (lr1, l1, u1) in zip(rows, rows[1:]):
        span = lr0 - lr1
        lo = min(lo, (l0 - u1) / span)
        hi = max(hi, (u0 - l1) / span)
    ratios_lo = [u / lr for lr, _, u in rows]
    ratios_hi = [l / lr for lr, l, _ in rows]
    lr = np.array([r[0] for r in rows])
    mid = np.array([(r[1] + r[2]) / 2 for r in rows])
    slope = float(np.polyfit(lr, mid, 1)[0])
    return DimensionEstimate(lo, hi, min(ratios_lo), max(ratios_hi), slope, len(rows), excluded)


# -- no small returns -------------------------------------------------------------------


def cylinder_return_time(space: SymbolicSpace, word: Sequence[int]) -> int:
    """``tau([w]) = min_{y in [w]} tau_[w](y)``: self-overlap or shortest reconnection."""
    word = space.check(word)
    n = len(word)
    k = word_self_overlap(space, word)
    if k < n or space.allowed(word[-1], word[0]):
        return k
    # breadth-first search for the shortest bridge from word[-1] to word[0]
    frontier, seen, gap = {word[-1]}, {word[-1]}, 0
    while frontier:
        gap += 1
        nxt = set()
        for a in frontier:
            for b in space.followers(a):
                if space.allowed(b, word[0]):
                    return n + gap
                if b not in seen:
                    seen.add(b)
                    nxt.add(b)
        frontier = nxt
    raise ValueError("the cylinder never returns")


@dataclass(frozen=True)
class ReturnBound:
    r: float
    lower: int
    upper: Optional[int]
    depth: int

    @property
    def stat_lower(self) -> float:
        return self.lower / -math.log(self.r)

    @property
    def stat_upper(self) -> float:
        return math.inf if self.upper is None else self.upper / -math.log(self.r)


def _cover_words(ifs: ConformalIFS, region: Shell, L: int) -> dict:
    out = {}
    stack = [ifs.root()]
    while stack:
        node = stack.pop()
        for e in ifs.followers(node.word):
            ch = ifs.child(node, e)
            k = region.classify(ch.lo, ch.hi)
            if k == -1:
                continue
            if len(ch.word) == L:
                out[ch.word] = k
            else:
                stack.append(ch)
    return out


def ball_return_bounds(ifs: ConformalIFS, x, r, depth: Optional[int] = None, horizon: Optional[int] = None) -> ReturnBound:
    """Certified bounds on ``tau(B(x, r))`` for the shift acting on the limit set.

    ``y`` and ``T^n y`` both in the ball force the ``(n + L)``-prefix ``u`` of
    the coding of ``y`` to have ``u[:L]`` and ``u[n:]`` in the depth-``L``
    cover of the ball; if no such ``u`` has a hull meeting the ball, the
    return time exceeds ``n``.  When both hulls lie inside, ``n`` is
    attained.  ``horizon`` is capped at ``L``.
    """
    conv = Fraction if ifs.exact else float
    x, r = conv(x), conv(r)
    region = Shell(x, 0, r)
    if depth is None:
        lam = float(ifs.lam)
        depth = max(2, math.ceil((math.log(float(r) / float(ifs.diam)) - 4 * math.log(2)) / math.log(lam)))
    L = depth
    cover = _cover_words(ifs, region, L)
    if not cover:
        raise ZeroMassError("ball misses the limit set")
    horizon = min(horizon or L, L)
    by_prefix: dict = {}
    for w in cover:
        for j in range(1, L + 1):
            by_prefix.setdefault(w[:j], []).append(w)
    lower = None
    for n in range(1, horizon + 1):
        possible = attained = False
        for v in cover:
            if n < L:
                cands = by_prefix.get(v[n:], [])
                words = [v + w[L - n:] for w in cands]
            else:
                words = [v + w for w in cover if ifs.space.allowed(v[-1], w[0])]
            for u in words:
                node = ifs.node(u)
                k = region.classify(node.lo, node.hi)
                if k == -1:
                    continue
                possible = True
                if k == 1 and cover[u[n:]] == 1:
                    attained = True
                    break
            if attained:
                break
        if possible and lower is None:
            lower = n
        if attained:
            return ReturnBound(float(r), lower, n, L)
    return ReturnBound(float(r), lower if lower is not None else horizon + 1, None, L)


def no_small_returns_stat(ifs: ConformalIFS, x, r_grid: Sequence, depth: Optional[int] = None,
                          horizon: Optional[int] = None) -> list:
    """``tau(B_r(x)) / (-ln r)`` bounds along the grid."""
    return [ball_return_bounds(ifs, x, r, depth, horizon) for r in r_grid]
