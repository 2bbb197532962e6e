"""Random walks Z_n = w_1 ... w_n on the building and their statistics.

The product Z_n is tracked exactly: an integer matrix A proportional to Z_n
together with the p-adic valuation offset of the proportionality constant,
and likewise for Z_n^{-1}. Every statistic is a function of the homothety
class, so common integer content is divided out as the walk proceeds.

For det(Z_n) = 1 the Smith valuations s1 <= s2 <= s3 of Z_n are read off
from minimal valuations: s1 over the entries of Z_n, s1 + s2 over the
entries of Z_n^{-1} (the 2x2 minors of Z_n), and s1 + s2 + s3 = 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from . import padic
from .building import (
    Flag,
    GermChamber,
    adapted_basis,
    flag_gap_exponent,
    projective_mod,
    type_from_valuations,
    weyl_distance,
)
from .errors import EmptyMeasure, InvalidArgument, InvalidDepth, NonRegular, NotInGroup
from .padic import INF, int_valuation
from .weyl import TypeVector, opposition_involution, regularity_diagnostics, root_pairings

RNG_FAMILIES = ("philox4x64",)
_TWO64 = 1 << 64
_CONTENT_EVERY = 4


# ---------------------------------------------------------------------------
# measure specification


def _integer_scaled(M):
    """(integer matrix, v_p of the scale) with integer matrix = c * M."""
    den = reduce(lambda a, b: a * b // gcd(a, b), (x.denominator for row in M for x in row), 1)
    return tuple(tuple(int(x * den) for x in row) for row in M), den


@dataclass(frozen=True)
class MeasureSpec:
    """Finitely supported probability measure on SL3(Q) plus sampling keys."""

    atoms: tuple
    prime: int
    seed: int = 0
    symmetrize: bool = False
    rng: str = "philox4x64"
    _support: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.atoms:
            raise EmptyMeasure("measure has no atoms")
        if self.rng not in RNG_FAMILIES:
            raise InvalidArgument(f"unknown generator family {self.rng!r}")
        if not 0 <= self.seed < _TWO64:
            raise InvalidArgument("seed must be an unsigned 64-bit integer")
        merged: dict = {}
        order = []
        for g, w in self.atoms:
            g = padic.as_matrix(g)
            w = Fraction(w)
            if w <= 0:
                raise InvalidArgument("atom weights must be positive")
            if padic.det(g) != 1:
                raise NotInGroup(f"atom {g} does not have determinant 1")
            pairs = [(g, w)]
            if self.symmetrize:
                pairs.append((padic.inverse(g), w))
            for h, x in pairs:
                if h not in merged:
                    order.append(h)
                    merged[h] = Fraction(0)
                merged[h] += x
        total = sum(merged.values())
        object.__setattr__(self, "_support", tuple((h, merged[h] / total) for h in order))

    @property
    def support(self) -> tuple:
        """Normalized ``(matrix, weight)`` pairs, after symmetrization."""
        return self._support

    def thresholds(self) -> list:
        acc = Fraction(0)
        out = []
        for _, w in self._support:
            acc += w
            out.append(math.floor(acc * _TWO64))
        out[-1] = _TWO64
        return out


def draw_indices(spec: MeasureSpec, trajectory_id: int, n: int) -> list:
    """Atom indices for steps 1..n of a trajectory.

    Philox4x64 keyed by (seed, trajectory_id); the k-th raw output drives
    step k, so prefixes agree across run lengths and worker layouts.
    """
    if trajectory_id < 0 or trajectory_id >= _TWO64:
        raise InvalidArgument("trajectory id must be an unsigned 64-bit integer")
    bg = np.random.Philox(key=(spec.seed << 64) | trajectory_id)
    raw = bg.random_raw(n) if n else []
    thr = spec.thresholds()
    out = []
    for r in raw:
        r = int(r)
        out.append(next(i for i, t in enumerate(thr) if r < t))
    return out


# ---------------------------------------------------------------------------
# exact running product


class ProductState(NamedTuple):
    """A ~ Z_n with v_p(Z_n entries) = v_p(A entries) - a_shift; same for B ~ Z_n^{-1}."""

    A: tuple
    a_shift: int
    B: tuple
    b_shift: int


def _mm(X, Y):
    return tuple(
        tuple(X[i][0] * Y[0][j] + X[i][1] * Y[1][j] + X[i][2] * Y[2][j] for j in range(3))
        for i in range(3)
    )


def _strip_content(X, shift, p):
    g = 0
    for row in X:
        for x in row:
            g = gcd(g, x)
    if g > 1:
        X = tuple(tuple(x // g for x in row) for row in X)
        shift -= int_valuation(g, p)
    return X, shift


def _smith_from_state(st: ProductState, p: int) -> tuple:
    s1 = min(int_valuation(x, p) for row in st.A for x in row) - st.a_shift
    s12 = min(int_valuation(x, p) for row in st.B for x in row) - st.b_shift
    return (s1, s12 - s1, -s12)


class _Step(NamedTuple):
    matrix: tuple
    shift: int
    inverse: tuple
    inv_shift: int
    disp2: Fraction


def _prepare_steps(spec: MeasureSpec) -> list:
    p = spec.prime
    out = []
    for g, _ in spec.support:
        gi = padic.inverse(g)
        A, da = _integer_scaled(g)
        B, db = _integer_scaled(gi)
        vals = padic.smith_decompose(g, p).valuations
        out.append(
            _Step(A, int_valuation(da, p), B, int_valuation(db, p), type_from_valuations(vals).norm2())
        )
    return out


def _line_from_state(st: ProductState, s: tuple, p: int):
    """Attracting line and plane, reduced mod p**(s3 - s1).

    The line is accurate to p**(s2 - s1) and the plane to p**(s3 - s2), but
    the line lies in the true plane to p**(s3 - s1); keeping that joint
    accuracy is what pins the vertices of sectors based at o.
    """
    s1, s2, s3 = s
    k_line = k_plane = s3 - s1
    A, B = st.A, st.B
    best, col = None, None
    for j in range(3):
        v = min(int_valuation(A[i][j], p) for i in range(3))
        if best is None or v < best:
            best, col = v, j
    div = p**best
    u = projective_mod([A[i][col] // div for i in range(3)], p, k_line)
    best, row = None, None
    for i in range(3):
        v = min(int_valuation(B[i][j], p) for j in range(3))
        if best is None or v < best:
            best, row = v, i
    div = p**best
    n = list(projective_mod([B[row][j] // div for j in range(3)], p, k_plane))
    return u, n


def _flag_from_state(st: ProductState, s: tuple, p: int) -> Flag:
    u, n = _line_from_state(st, s, p)
    # u has a 1 at its first unit coordinate; fix n there to get exact incidence
    i = next(t for t in range(3) if u[t] % p)
    n[i] -= sum(a * b for a, b in zip(u, n))
    return Flag(u, n)


def _germ_from_state(st: ProductState, s: tuple, p: int) -> GermChamber:
    s1, s2, s3 = s
    u, n = _line_from_state(st, (s1, s1 + 1, s1 + 2), p)
    return GermChamber(u, n, p)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class TrajectoryRecord:
    n: int
    theta: TypeVector
    step_disp2: Fraction
    flag: Optional[Flag] = None
    germ: Optional[GermChamber] = None
    gap_exp: object = None
    precision: Optional[tuple] = None
    product: Optional[ProductState] = None

    @property
    def step_disp(self) -> float:
        return math.sqrt(self.step_disp2)

    def to_json(self, trajectory_id: int) -> dict:
        gap = self.gap_exp
        if gap == INF:
            gap = "inf"
        return {
            "traj": trajectory_id,
            "n": self.n,
            "theta": self.theta.to_json(),
            "step": repr(self.step_disp),
            "step2": str(self.step_disp2),
            "flag": None if self.flag is None else self.flag.to_json(),
            "germ": None if self.germ is None else self.germ.to_json(),
            "gap_exp": gap,
        }


def iterate_path(
    spec: MeasureSpec,
    N: int,
    trajectory_id: int,
    flags_from: int = 1,
    keep_products: bool = False,
):
    """Yield a TrajectoryRecord for n = 1..N.

    Flags (and flag gaps) are only extracted for n >= ``flags_from``; germs
    are always extracted when the type is regular.
    """
    if N < 1:
        raise InvalidArgument("need at least one step")
    p = spec.prime
    steps = _prepare_steps(spec)
    idx = draw_indices(spec, trajectory_id, N)
    one = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    A, sa, B, sb = one, 0, one, 0
    prev_flag = None
    for n, i in enumerate(idx, start=1):
        st = steps[i]
        A = _mm(A, st.matrix)
        B = _mm(st.inverse, B)
        sa += st.shift
        sb += st.inv_shift
        if n % _CONTENT_EVERY == 0:
            A, sa = _strip_content(A, sa, p)
            B, sb = _strip_content(B, sb, p)
        state = ProductState(A, sa, B, sb)
        s = _smith_from_state(state, p)
        theta = TypeVector((-s[0], -s[1], -s[2]))
        rec = TrajectoryRecord(n, theta, st.disp2)
        if s[0] < s[1] < s[2]:
            rec.germ = _germ_from_state(state, s, p)
            if n >= flags_from:
                rec.flag = _flag_from_state(state, s, p)
                rec.precision = (s[1] - s[0], s[2] - s[1])
                if prev_flag is not None:
                    rec.gap_exp = flag_gap_exponent(prev_flag, rec.flag, p)
        prev_flag = rec.flag
        if keep_products:
            rec.product = state
        yield rec


def sample_path(
    spec: MeasureSpec, N: int, trajectory_id: int = 0, keep_products: bool = False
) -> list:
    return list(iterate_path(spec, N, trajectory_id, keep_products=keep_products))


# ---------------------------------------------------------------------------
# per-path statistics


@dataclass(frozen=True)
class NotConverged:
    best_exponent: object = None


def limit_flag(path: Sequence[TrajectoryRecord], tol_exponent: int, p: int):
    """F_N when every flag in the last quarter is within p**-k of it."""
    if not path:
        raise InvalidArgument("empty path")
    N = len(path)
    tail = path[N - max(1, N // 4):]
    if any(r.flag is None for r in tail):
        return NotConverged(None)
    final = tail[-1].flag
    m = min(flag_gap_exponent(r.flag, final, p) for r in tail)
    if m >= tol_exponent:
        return final
    return NotConverged(m)


class GermStabilization(NamedTuple):
    n0: Optional[int]
    match: bool


def germ_stabilization(path: Sequence[TrajectoryRecord], limit: Optional[Flag], p: int):
    """Index from which the germ record is constant, and whether that germ is
    the reduction of the limit flag."""
    if not path or path[-1].germ is None:
        return GermStabilization(None, False)
    last = path[-1].germ
    n0 = path[-1].n
    for rec in reversed(path):
        if rec.germ != last:
            break
        n0 = rec.n
    if limit is None or isinstance(limit, NotConverged):
        return GermStabilization(n0, False)
    target = GermChamber(projective_mod(limit.line, p), projective_mod(limit.plane, p), p)
    return GermStabilization(n0, target == last)


def cell_stabilization(path: Sequence[TrajectoryRecord], limit, p: int, depth: int):
    """Like ``germ_stabilization`` for the mod-p**depth cell of the flag.

    Records whose flag is absent or known to less than ``depth`` digits
    count as absent.
    """
    if depth < 1:
        raise InvalidDepth("depth must be at least 1")
    if depth == 1:
        return germ_stabilization(path, limit, p)

    def cell(rec):
        if rec.flag is None or min(rec.precision) < depth:
            return None
        return flag_cell(rec.flag, p, depth)

    cells = [cell(r) for r in path]
    if not cells or cells[-1] is None:
        return GermStabilization(None, False)
    n0 = path[-1].n
    for rec, c in zip(reversed(path), reversed(cells)):
        if c != cells[-1]:
            break
        n0 = rec.n
    if limit is None or isinstance(limit, NotConverged):
        return GermStabilization(n0, False)
    return GermStabilization(n0, flag_cell(limit, p, depth) == cells[-1])


def regularity_from_path(path: Sequence[TrajectoryRecord]):
    return regularity_diagnostics([r.theta for r in path], [r.step_disp for r in path])


def ray_coordinate(lam: TypeVector, n: int) -> tuple:
    """Dominant integer triple with zero sum nearest to n * lam."""
    a1 = round(n * lam[0])
    a3 = round(n * lam[2])
    a2 = -a1 - a3
    if a2 > a1:
        a1 = a2
    if a2 < a3:
        a3 = a2
    a2 = -a1 - a3
    return (a1, a2, a3)


def tracking_deviation(path: Sequence[TrajectoryRecord], F: Flag, lam: TypeVector, p: int) -> list:
    """d(Z_n o, gamma(n)) / n for the lambda-ray gamma from o inside Q(o, F).

    gamma(n) = h diag(p**-a) o with h an adapted basis for F at o and a the
    nearest dominant integer point to n * lam. Singular but nonzero lam is
    accepted (the ray then runs along a wall of the sector). Needs records
    sampled with ``keep_products=True``.
    """
    if lam.is_zero():
        raise NonRegular("zero direction defines no ray")
    from .building import standard_vertex

    h, _ = _integer_scaled(adapted_basis(standard_vertex(p), F))
    adj_h, _ = _integer_scaled(padic.adjugate(padic.as_matrix(h)))
    out = []
    for rec in path:
        st = rec.product
        if st is None:
            raise InvalidArgument("records were sampled without products")
        a = ray_coordinate(lam, rec.n)
        X = _mm(adj_h, st.A)
        Y = _mm(st.B, h)
        e1 = min(int_valuation(X[i][j], p) + a[i] for i in range(3) for j in range(3)) - st.a_shift
        e2 = min(int_valuation(Y[i][j], p) - a[j] for i in range(3) for j in range(3)) - st.b_shift
        t = type_from_valuations((e1, e2 - e1, -e2))
        out.append(math.sqrt(t.norm2()) / rec.n)
    return out


def log_grid(N: int, ratio: float = 1.05, start: int = 1) -> list:
    """Distinct integers round(ratio**k) in [start, N], always including N."""
    out, x = set(), 1.0
    while x <= N:
        n = int(round(x))
        if start <= n <= N:
            out.add(n)
        x *= ratio
    out.add(N)
    return sorted(out)


def loglog_slope(values: Sequence[float], ratio: float = 1.05, start: int = 1) -> float:
    """Least-squares slope of log(values[n-1]) against log(n).

    n runs over a geometric grid so every scale carries equal weight; zero
    values (exact hits, where the log is undefined) are left out. ``ratio=None``
    uses every n.
    """
    N = len(values)
    grid = range(max(1, start), N + 1) if ratio is None else log_grid(N, ratio, start)
    xs, ys = [], []
    for n in grid:
        v = values[n - 1]
        if v > 0:
            xs.append(math.log(n))
            ys.append(math.log(v))
    if len(xs) < 2:
        return float("-inf")
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class TrajectorySummary:
    trajectory_id: int
    theta: TypeVector
    limit: object
    germ: GermStabilization
    last_near: int
    precision: Optional[tuple]


def summarize_trajectory(
    spec: MeasureSpec, N: int, trajectory_id: int, tol_exponent: int = 5, near_radius2=9
) -> TrajectorySummary:
    """One pass over a trajectory collecting the statistics the ensemble
    experiments need. ``last_near`` is the last n with d(o, Z_n o)^2 <= radius^2."""
    flags_from = N - max(1, N // 4) + 1
    path = []
    last_near = 0
    for rec in iterate_path(spec, N, trajectory_id, flags_from=flags_from):
        if rec.theta.norm2() <= near_radius2:
            last_near = rec.n
        path.append(rec)
    lim = limit_flag(path, tol_exponent, spec.prime)
    germ = germ_stabilization(path, lim, spec.prime)
    return TrajectorySummary(trajectory_id, path[-1].theta, lim, germ, last_near, path[-1].precision)


def _summary_task(args):
    spec, N, tid, k = args
    return summarize_trajectory(spec, N, tid, k)


def map_trajectories(func: Callable, tasks: list, workers: int = 1) -> list:
    """Apply ``func`` to each task, results in task order regardless of workers."""
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def summarize_many(spec: MeasureSpec, N: int, ids: Sequence[int], tol_exponent: int = 5, workers: int = 1):
    return map_trajectories(_summary_task, [(spec, N, t, tol_exponent) for t in ids], workers)


@dataclass(frozen=True)
class EstimateReport:
    lambda_hat: TypeVector
    stderr: tuple
    regular: bool
    margin: float
    iota_asymmetry: float
    norm_se: float
    drift_hat: float
    N: int
    M: int

    def to_json(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat.to_json(),
            "stderr": list(self.stderr),
            "regular": self.regular,
            "margin_se": self.margin,
            "iota_asymmetry_se": self.iota_asymmetry,
            "norm_se": self.norm_se,
            "drift_hat": self.drift_hat,
            "N": self.N,
            "M": self.M,
        }


def _mean_se(samples: Sequence) -> tuple:
    arr = np.array([float(x) for x in samples])
    if len(arr) < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def _ratio(value: float, se: float) -> float:
    if se == 0:
        return 0.0 if value == 0 else math.copysign(math.inf, value)
    return value / se


def estimate_from_thetas(thetas: Sequence[TypeVector], N: int) -> EstimateReport:
    """Lyapunov report from final types theta(o, Z_N o) of M trajectories.

    Standard errors are across-trajectory sample deviations over sqrt(M).
    """
    M = len(thetas)
    if M < 2:
        raise InvalidArgument("need at least two trajectories")
    scaled = [t.scale(Fraction(1, N)) for t in thetas]
    lam = TypeVector(tuple(sum(t[i] for t in scaled) / M for i in range(3)))
    stderr = tuple(_mean_se([t[i] for t in scaled])[1] for i in range(3))
    margins = []
    for k in range(2):
        m, se = _mean_se([root_pairings(t)[k] for t in scaled])
        margins.append(_ratio(m, se))
    diffs = [[t[i] - opposition_involution(t)[i] for i in range(3)] for t in scaled]
    dstats = [_mean_se([d[i] for d in diffs]) for i in range(3)]
    dnorm = math.sqrt(sum(m * m for m, _ in dstats))
    dse = math.sqrt(sum(se * se for _, se in dstats))
    norm_se = _ratio(lam.norm(), math.sqrt(sum(se * se for se in stderr)))
    drift = float(np.mean([t.norm() for t in scaled]))
    margin = min(margins)
    return EstimateReport(
        lam,
        stderr,
        root_pairings(lam).regular,
        margin,
        _ratio(dnorm, dse),
        norm_se,
        drift,
        N,
        M,
    )


def lyapunov_estimate(spec: MeasureSpec, N: int, M: int, workers: int = 1) -> EstimateReport:
    if M < 2:
        raise InvalidArgument("need at least two trajectories")
    summaries = summarize_many(spec, N, range(M), workers=workers)
    return estimate_from_thetas([s.theta for s in summaries], N)


class OppositionReport(NamedTuple):
    rate: float
    opposite: int
    converged: int
    skipped: int
    pairs: int

    def to_json(self) -> dict:
        return self._asdict()


def opposition_from_limits(limits: Sequence) -> OppositionReport:
    """Pairs (0,1), (2,3), ... of limit flags; non-converged pairs are skipped."""
    pairs = len(limits) // 2
    opp = conv = 0
    for i in range(pairs):
        a, b = limits[2 * i], limits[2 * i + 1]
        if isinstance(a, NotConverged) or isinstance(b, NotConverged):
            continue
        conv += 1
        if weyl_distance(a, b).length() == 3:
            opp += 1
    rate = opp / conv if conv else 0.0
    return OppositionReport(rate, opp, conv, pairs - conv, pairs)


def opposition_rate(
    spec: MeasureSpec, N: int, M: int, tol_exponent: int = 5, workers: int = 1
) -> OppositionReport:
    if M < 1:
        raise InvalidArgument("need at least one pair")
    summaries = summarize_many(spec, N, range(2 * M), tol_exponent, workers)
    return opposition_from_limits([s.limit for s in summaries])


def flag_cell(F: Flag, p: int, depth: int) -> tuple:
    return (projective_mod(F.line, p, depth), projective_mod(F.plane, p, depth))


def _cell_counts(spec: MeasureSpec, flags: Sequence[Flag], depth: int, weights=None):
    p = spec.prime
    n = len(flags)
    if weights is None:
        weights = [Fraction(1, n)] * n
    emp: dict = {}
    conv: dict = {}
    for F, w in zip(flags, weights):
        c = flag_cell(F, p, depth)
        emp[c] = emp.get(c, 0) + w
        for g, mu in spec.support:
            c = flag_cell(F.act(g), p, depth)
            conv[c] = conv.get(c, 0) + w * mu
    return emp, conv


def stationarity_residual(spec: MeasureSpec, flags: Sequence[Flag], depth: int) -> float:
    """Total variation between the mod-p**depth cell distribution of a flag
    sample and that of its convolution with the step measure."""
    if depth < 1:
        raise InvalidDepth("depth must be at least 1")
    if not flags:
        raise InvalidArgument("empty flag sample")
    emp, conv = _cell_counts(spec, flags, depth)
    keys = set(emp) | set(conv)
    return float(sum(abs(emp.get(k, 0) - conv.get(k, 0)) for k in keys) / 2)


def bootstrap_residual_se(
    spec: MeasureSpec, flags: Sequence[Flag], depth: int, resamples: int = 200, seed: int = 0
) -> float:
    """Standard deviation of the residual over bootstrap resamples of the flags."""
    if depth < 1:
        raise InvalidDepth("depth must be at least 1")
    p = spec.prime
    # cache per-flag cells so resampling only re-weights
    own = [flag_cell(F, p, depth) for F in flags]
    pushed = [[(flag_cell(F.act(g), p, depth), mu) for g, mu in spec.support] for F in flags]
    rng = np.random.Generator(np.random.Philox(key=seed))
    n = len(flags)
    values = []
    for _ in range(resamples):
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        emp: dict = {}
        conv: dict = {}
        for i in np.nonzero(counts)[0]:
            c = int(counts[i])
            emp[own[i]] = emp.get(own[i], 0) + c
            for cell, mu in pushed[i]:
                conv[cell] = conv.get(cell, 0) + c * float(mu)
        keys = set(emp) | set(conv)
        values.append(sum(abs(emp.get(k, 0) - conv.get(k, 0)) for k in keys) / (2 * n))
    return float(np.std(values, ddof=1))
