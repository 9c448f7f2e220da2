"""Enumeration of norm balls in SL(2,Z), SL(2,Z[1/p]) and SL(n,Z).

The kernels are numpy-vectorized and stream their output in chunks so
ladders and orbit sums never materialize more than one block.  All
norm comparisons reduce to exact integer inequalities (radii are
converted through Fraction, never trusted as floats), and every chunk
passes an exact post-filter, so float square roots only ever widen
candidate ranges.

Element orders are deterministic and documented per group:

* sl2z:  lexicographic on the first column (a, c), then on the
  completion parameter t of the second column.
* sl2zp: levels m ascending, then the sl2z order of the integer
  matrix M = p^m gamma.
* slnz:  lexicographic on the flattened row-major entries.
"""

from __future__ import annotations

import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapacityError, ConfigError
from .places import as_rational, floor_log, is_prime

DEFAULT_CAPACITY = 10**8
_CHUNK_PAIRS = 1 << 21
_MAX_N = 4
_INT_GUARD = 1 << 28  # keeps every intermediate product inside int64


def exact_radius(t) -> Fraction:
    """Radius as an exact rational; floats keep their binary value."""
    return Fraction(t) if isinstance(t, float) else as_rational(t)


def resolve_workers(workers=None) -> int:
    """Worker count: explicit arg, else ORBITLAB_THREADS, else all cores."""
    if workers is None:
        env = os.environ.get("ORBITLAB_THREADS", "").strip()
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigError(f"ORBITLAB_THREADS must be an integer, got {env!r}")
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise ConfigError("worker count must be >= 1")
    return workers


@dataclass(frozen=True)
class BallSpec:
    """What to enumerate: group, size, radii, norm kind, capacity."""

    group: str
    n: int = 2
    t_inf: object = 10
    t_p: object = None
    p: int = 0
    norm: str = "frobenius"
    capacity: int = DEFAULT_CAPACITY

    def __post_init__(self):
        problems = []
        if self.group not in ("sl2z", "sl2zp", "slnz"):
            problems.append(f"unknown group {self.group!r}")
        if self.group in ("sl2z", "sl2zp") and self.n != 2:
            problems.append("sl2 groups are 2x2")
        if self.group == "slnz" and not 2 <= self.n <= _MAX_N:
            problems.append(f"slnz supports 2 <= n <= {_MAX_N}")
        if self.group == "sl2zp":
            if not is_prime(self.p):
                problems.append(f"sl2zp needs a prime p, got {self.p}")
        elif self.p:
            problems.append("p is only meaningful for sl2zp")
        if self.norm not in ("frobenius", "max"):
            problems.append(f"unknown norm {self.norm!r}")
        if self.capacity < 1:
            problems.append("capacity must be positive")
        try:
            if self._exact_t_inf() <= 0:
                problems.append("t_inf must be positive")
            if self.group == "sl2zp" and self._exact_t_p() <= 0:
                problems.append("t_p must be positive")
        except (TypeError, ValueError) as exc:
            problems.append(f"bad radius: {exc}")
        if problems:
            raise ConfigError(problems)

    def _exact_t_inf(self) -> Fraction:
        return exact_radius(self.t_inf)

    def _exact_t_p(self) -> Fraction:
        return exact_radius(self.t_p if self.t_p is not None else self.t_inf)


@dataclass(frozen=True)
class CongruenceWindow:
    """A union of residue classes mod p^m in SL(2,Z)."""

    p: int
    m: int
    reps: tuple  # tuple of flattened (a, b, c, d) residue tuples

    def __post_init__(self):
        if not is_prime(self.p) or self.m < 1:
            raise ConfigError("window needs a prime p and m >= 1")
        mod = self.p**self.m
        for r in self.reps:
            if len(r) != 4:
                raise ConfigError("window reps are flattened 2x2 matrices")
            if (r[0] * r[3] - r[1] * r[2]) % mod != 1:
                raise ConfigError(f"rep {r} has det != 1 mod {mod}")

    @property
    def modulus(self) -> int:
        return self.p**self.m


# ---------------------------------------------------------------------------
# shared vector helpers

def _xgcd_arrays(a, b):
    """Vectorized extended gcd: g >= 0 with x*a + y*b = g."""
    old_r, r = a.astype(np.int64).copy(), b.astype(np.int64).copy()
    old_x, x = np.ones_like(old_r), np.zeros_like(old_r)
    old_y, y = np.zeros_like(old_r), np.ones_like(old_r)
    while True:
        nz = r != 0
        if not nz.any():
            break
        q = np.zeros_like(r)
        np.floor_divide(old_r, r, out=q, where=nz)
        old_r, r = np.where(nz, r, old_r), np.where(nz, old_r - q * r, r)
        old_x, x = np.where(nz, x, old_x), np.where(nz, old_x - q * x, x)
        old_y, y = np.where(nz, y, old_y), np.where(nz, old_y - q * y, y)
    neg = old_r < 0
    sign = np.where(neg, -1, 1)
    return old_r * sign, old_x * sign, old_y * sign


def _ragged_arange(lengths):
    """(index, offset) pairs enumerating range(lengths[i]) for each i."""
    lengths = lengths.astype(np.int64)
    total = int(lengths.sum())
    idx = np.repeat(np.arange(len(lengths)), lengths)
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    offs = np.arange(total) - starts[idx]
    return idx, offs


def _pool_map(fn, args_list, workers):
    """Ordered map over blocks, with a bounded submission window."""
    if workers <= 1 or len(args_list) <= 1:
        for a in args_list:
            yield fn(a)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = []
        it = iter(args_list)
        for a in it:
            pending.append(pool.submit(fn, a))
            if len(pending) >= workers + 2:
                yield pending.pop(0).result()
        while pending:
            yield pending.pop(0).result()


class _CapacityMeter:
    def __init__(self, limit):
        self.limit = limit
        self.count = 0
        self._lock = threading.Lock()

    def add(self, k):
        with self._lock:
            self.count += int(k)
            if self.count > self.limit:
                raise CapacityError(
                    f"ball exceeds capacity {self.limit} elements")


# ---------------------------------------------------------------------------
# the SL(2) column engine: first column (a, c), second column solved

def _sl2_det_blocks(det, bound, sq_int, norm, prim_p, capacity, workers):
    """Chunks of integer matrices M = [[a,b],[c,d]], det M = det.

    ``bound``: max entry modulus allowed (exact int, max norm) and the
    column search radius.  ``sq_int``: floor of the squared Frobenius
    radius (None for max norm).  ``prim_p``: drop matrices that vanish
    mod p (levels >= 1 of SL(2,Z[1/p]))."""
    if bound > _INT_GUARD or det > _INT_GUARD:
        raise CapacityError("radius out of the supported integer range")
    if norm == "frobenius":
        amax = math.isqrt(max(sq_int - 1, 0))
    else:
        amax = bound
    width = 2 * amax + 1
    meter = _CapacityMeter(capacity)
    blocks = [(lo, min(lo + _CHUNK_PAIRS, width * width))
              for lo in range(0, width * width, _CHUNK_PAIRS)]

    def run(span):
        lo, hi = span
        idx = np.arange(lo, hi, dtype=np.int64)
        a = idx // width - amax
        c = idx % width - amax
        g = np.gcd(a, c)
        keep = (g > 0) & (det % np.where(g > 0, g, 1) == 0)
        if norm == "frobenius":
            keep &= a * a + c * c <= sq_int - 1
        a, c, g = a[keep], c[keep], g[keep]
        if len(a) == 0:
            return None
        gg, x, y = _xgcd_arrays(a, c)
        scale = det // gg
        b0, d0 = -y * scale, x * scale
        step_a, step_c = a // gg, c // gg
        q = step_a * step_a + step_c * step_c
        shift = np.rint(-(step_a * b0 + step_c * d0) / q).astype(np.int64)
        b0 += shift * step_a
        d0 += shift * step_c
        if norm == "frobenius":
            rem = sq_int - (a * a + c * c)
            rr = step_a * b0 + step_c * d0
            ss = b0 * b0 + d0 * d0
            disc = rr * rr - q * (ss - rem)
            ok = disc >= 0
            root = np.sqrt(np.maximum(disc, 0).astype(np.float64))
            tlo = np.where(ok, np.floor((-rr - root) / q) - 1, 1).astype(np.int64)
            thi = np.where(ok, np.ceil((-rr + root) / q) + 1, 0).astype(np.int64)
        else:
            huge = np.int64(1) << 60
            tlo = np.full(len(a), -huge)
            thi = np.full(len(a), huge)
            for coef, base in ((step_a, b0), (step_c, d0)):
                zero = coef == 0
                cpos = np.where(zero, 1, np.abs(coef))
                baseq = base * np.where(coef < 0, -1, 1)
                lo1 = -np.floor_divide(bound + baseq, cpos)
                hi1 = np.floor_divide(bound - baseq, cpos)
                bad = zero & (np.abs(base) > bound)
                tlo = np.where(zero, np.where(bad, huge, tlo),
                               np.maximum(tlo, lo1))
                thi = np.where(zero, np.where(bad, -huge, thi),
                               np.minimum(thi, hi1))
        lengths = np.maximum(thi - tlo + 1, 0)
        meter.add(int(lengths.sum()))
        rep, offs = _ragged_arange(lengths)
        tt = tlo[rep] + offs
        aa, cc = a[rep], c[rep]
        bb = b0[rep] + tt * step_a[rep]
        dd = d0[rep] + tt * step_c[rep]
        if norm == "frobenius":
            final = aa * aa + bb * bb + cc * cc + dd * dd <= sq_int
        else:
            final = (np.abs(bb) <= bound) & (np.abs(dd) <= bound)
        if prim_p:
            final &= ~((aa % prim_p == 0) & (bb % prim_p == 0)
                       & (cc % prim_p == 0) & (dd % prim_p == 0))
        aa, bb, cc, dd = aa[final], bb[final], cc[final], dd[final]
        if len(aa) == 0:
            return None
        sample = slice(0, min(len(aa), 512))
        assert np.all(aa[sample] * dd[sample] - bb[sample] * cc[sample] == det)
        out = np.empty((len(aa), 2, 2), dtype=np.int64)
        out[:, 0, 0], out[:, 0, 1] = aa, bb
        out[:, 1, 0], out[:, 1, 1] = cc, dd
        return out

    for block in _pool_map(run, blocks, workers):
        if block is not None:
            yield block


def _frobenius_floor(t: Fraction) -> int:
    return math.floor(t * t)


def iter_sl2z_chunks(spec: BallSpec, workers=None):
    """Yield (levels, mats) chunks for the SL(2,Z) ball of radius t_inf."""
    t = spec._exact_t_inf()
    bound = math.floor(t)
    sq = _frobenius_floor(t) if spec.norm == "frobenius" else None
    for block in _sl2_det_blocks(1, bound, sq, spec.norm, None,
                                 spec.capacity, resolve_workers(workers)):
        yield np.zeros(len(block), dtype=np.int64), block


def iter_sl2_zinvp_chunks(spec: BallSpec, workers=None):
    """Yield (levels, mats) chunks; the group element is p^-level * mat.

    Levels ascend; within a level the integer matrix order matches
    iter_sl2z_chunks.  Level 0 requires t_p >= 1 (p-adic norm of an
    integer SL(2) matrix is exactly 1); level m contributes when
    p^m <= t_p, with the archimedean bound scaled to p^m * t_inf."""
    p, t_inf, t_p = spec.p, spec._exact_t_inf(), spec._exact_t_p()
    workers = resolve_workers(workers)
    mmax = floor_log(t_p, p) if t_p >= 1 else -1
    if mmax >= 0:
        top = p**mmax
        if top * top > _INT_GUARD or math.floor(top * t_inf) > _INT_GUARD:
            raise CapacityError("radius out of the supported integer range")
    meter = _CapacityMeter(spec.capacity)
    for m in range(mmax + 1):
        scale = p**m
        tm = scale * t_inf
        bound = math.floor(tm)
        sq = _frobenius_floor(tm) if spec.norm == "frobenius" else None
        prim = p if m > 0 else None
        for block in _sl2_det_blocks(scale * scale, bound, sq, spec.norm,
                                     prim, spec.capacity, workers):
            meter.add(len(block))
            yield np.full(len(block), m, dtype=np.int64), block


def enum_sl2z(spec: BallSpec, workers=None) -> np.ndarray:
    chunks = [m for _, m in iter_sl2z_chunks(spec, workers)]
    if not chunks:
        return np.empty((0, 2, 2), dtype=np.int64)
    return np.concatenate(chunks)


def enum_sl2_zinvp(spec: BallSpec, workers=None):
    """(levels, mats) arrays for the SL(2,Z[1/p]) ball."""
    levels, mats = [], []
    for lev, blk in iter_sl2_zinvp_chunks(spec, workers):
        levels.append(lev)
        mats.append(blk)
    if not mats:
        return (np.empty(0, dtype=np.int64),
                np.empty((0, 2, 2), dtype=np.int64))
    return np.concatenate(levels), np.concatenate(mats)


# ---------------------------------------------------------------------------
# SL(n,Z): enumerate the first n-1 rows, solve the last by cofactors

def _row_table(n, bound, sq_int, norm):
    """All candidate rows, lex sorted, plus a stable norm-sorted view."""
    if (2 * bound + 1) ** n > 3 * 10**7:
        raise CapacityError("slnz row table out of the supported range")
    rng = np.arange(-bound, bound + 1, dtype=np.int64)
    grids = np.meshgrid(*([rng] * n), indexing="ij")
    rows = np.stack([g.ravel() for g in grids], axis=1)
    norms = (rows * rows).sum(axis=1)
    keep = norms > 0
    if norm == "frobenius":
        keep &= norms <= sq_int - (n - 1)
    rows, norms = rows[keep], norms[keep]
    order = np.argsort(norms, kind="stable")
    return rows, rows[order], norms[order]


def _pack_rows(rows):
    """Row -> single int64 key preserving lex order (entries < 2^15)."""
    key = np.zeros(len(rows), dtype=np.int64)
    for j in range(rows.shape[1]):
        key = (key << 16) | (rows[:, j] + (1 << 15))
    return key


def _cofactor_vector(prefix):
    """Signed minors m with det(prefix stacked over x) = m . x."""
    k = prefix.shape[2]  # n
    if k == 2:
        r = prefix[:, 0]
        return np.stack([-r[:, 1], r[:, 0]], axis=1)
    if k == 3:
        u, v = prefix[:, 0], prefix[:, 1]
        return np.cross(u, v)
    u, v, w = prefix[:, 0], prefix[:, 1], prefix[:, 2]

    def det3(c0, c1, c2):
        return (u[:, c0] * (v[:, c1] * w[:, c2] - v[:, c2] * w[:, c1])
                - u[:, c1] * (v[:, c0] * w[:, c2] - v[:, c2] * w[:, c0])
                + u[:, c2] * (v[:, c0] * w[:, c1] - v[:, c1] * w[:, c0]))

    m0 = -det3(1, 2, 3)
    m1 = det3(0, 2, 3)
    m2 = -det3(0, 1, 3)
    m3 = det3(0, 1, 2)
    return np.stack([m0, m1, m2, m3], axis=1)


def _particular_solution(m):
    """Integer x0 with m . x0 = 1, assuming gcd of each row of m is 1."""
    n = m.shape[1]
    g = m[:, 0].copy()
    coeffs = [np.ones(len(m), dtype=np.int64)]
    for j in range(1, n):
        g2, s, t = _xgcd_arrays(g, m[:, j])
        for i in range(j):
            coeffs[i] = coeffs[i] * s
        coeffs.append(t)
        g = g2
    assert np.all(g == 1)
    return np.stack(coeffs, axis=1)


def _size_reduce_basis(ws):
    """Cheap pairwise Lagrange sweeps on a (N, k, n) batch of bases.

    Only shrinks the search boxes; correctness never depends on the
    reduction quality because ranges come from exact Gram bounding
    boxes and candidates pass an exact norm filter."""
    ws = ws.copy()
    k = ws.shape[1]
    for _ in range(64):
        changed = False
        for i in range(k):
            for j in range(k):
                if i == j:
                    continue
                ni = (ws[:, i] * ws[:, i]).sum(axis=1)
                mu = np.rint((ws[:, j] * ws[:, i]).sum(axis=1)
                             / ni).astype(np.int64)
                if mu.any():
                    ws[:, j] -= mu[:, None] * ws[:, i]
                    changed = True
        if not changed:
            break
    return ws


def _babai_shift(x0, ws):
    """Subtract near-closest lattice combinations from x0, per batch row."""
    x0 = x0.copy()
    for _ in range(2):
        for i in range(ws.shape[1]):
            w = ws[:, i]
            nw = (w * w).sum(axis=1)
            mu = np.rint((x0 * w).sum(axis=1) / nw).astype(np.int64)
            x0 -= mu[:, None] * w
    return x0


def _ellipsoid_boxes(ws, x0, c_eff):
    """Widened integer bounding boxes of {y : |x0 + y . ws|^2 <= c}.

    Float arithmetic only ever widens; callers re-check candidates
    exactly."""
    k = ws.shape[1]
    gram_f = np.einsum("nij,nkj->nik", ws, ws).astype(np.float64)
    b_vec = np.einsum("nij,nj->ni", ws, x0).astype(np.float64)
    inv = np.linalg.inv(gram_f)
    center = -np.einsum("nij,nj->ni", inv, b_vec)
    quad = np.einsum("ni,nij,nj->n", center, gram_f, center)
    c_full = c_eff + quad
    c_ok = c_full >= 0
    diag_inv = np.stack([inv[:, i, i] for i in range(k)], axis=1)
    half = np.sqrt(np.maximum(c_full, 0)[:, None]
                   * np.maximum(diag_inv, 0))
    los = np.where(c_ok[:, None], np.floor(center - half) - 1,
                   1).astype(np.int64)
    his = np.where(c_ok[:, None], np.ceil(center + half) + 1,
                   0).astype(np.int64)
    return los, np.maximum(his - los + 1, 0)


def _quadratic_interval_count(qa, qb, qc):
    """Exact #{t in Z : qa t^2 + 2 qb t + qc <= 0} for qa > 0.

    The float square root is corrected to the exact integer isqrt,
    after which each division candidate is off by at most one and a
    single polynomial-sign fix per endpoint is enough."""
    disc = qb * qb - qa * qc
    s = np.sqrt(np.maximum(disc, 0).astype(np.float64)).astype(np.int64)
    s += (s + 1) * (s + 1) <= disc
    s -= s * s > disc
    tlo = np.floor_divide(-qb - s, qa)
    thi = np.floor_divide(-qb + s, qa)
    tlo += tlo * (qa * tlo + 2 * qb) + qc > 0
    t1 = thi + 1
    thi += t1 * (qa * t1 + 2 * qb) + qc <= 0
    return np.where(disc < 0, 0, np.maximum(thi - tlo + 1, 0))


def _count_last_row(prefix, budget, meter):
    """Exact Frobenius completion count, no matrices materialized."""
    m = _cofactor_vector(prefix)
    g = np.gcd.reduce(np.abs(m), axis=1)
    keep = (g == 1) & (budget >= 1)
    prefix, budget, m = prefix[keep], budget[keep], m[keep]
    if len(prefix) == 0:
        return 0
    ws = _size_reduce_basis(prefix)
    x0 = _babai_shift(_particular_solution(m), ws)
    if ws.shape[1] == 1:
        w = ws[:, 0]
        total = int(_quadratic_interval_count(
            (w * w).sum(axis=1), (x0 * w).sum(axis=1),
            (x0 * x0).sum(axis=1) - budget).sum())
        meter.add(total)
        return total
    w1, w2 = ws[:, 0], ws[:, 1]
    aa = (w1 * w1).sum(axis=1)
    bb = (w1 * w2).sum(axis=1)
    cc = (w2 * w2).sum(axis=1)
    b1 = (x0 * w1).sum(axis=1)
    b2 = (x0 * w2).sum(axis=1)
    n0 = (x0 * x0).sum(axis=1) - budget
    det = (aa * cc - bb * bb).astype(np.float64)
    center = (-cc * b1 + bb * b2) / det
    c_full = (cc * b1 * b1 - 2.0 * bb * (b1 * b2) + aa * b2 * b2) / det \
        - n0
    half = np.sqrt(np.maximum(c_full, 0) * cc / det)
    ilo = np.floor(center - half - 1e-6).astype(np.int64)
    lens = np.where(c_full >= 0,
                    np.floor(center + half + 1e-6).astype(np.int64)
                    - ilo + 1, 0)
    lens = np.maximum(lens, 0)
    if int(lens.sum()) > 8 * meter.limit:
        raise CapacityError("search boxes exceed capacity")
    rep, off = _ragged_arange(lens)
    ii = ilo[rep] + off
    counts = _quadratic_interval_count(
        cc[rep], b2[rep] + ii * bb[rep],
        n0[rep] + ii * (2 * b1[rep] + ii * aa[rep]))
    total = int(counts.sum())
    meter.add(total)
    return total


def _complete_last_row(prefix, budget, bound, norm, meter):
    """All integer matrices (prefix rows stacked over x) of det 1.

    ``budget`` is the exact remaining allowance for |x|^2 under the
    Frobenius norm (None for max norm).  Solutions of m.x = 1 form
    x0 + Z-span(prefix rows); the span equals the full kernel lattice
    because the prefix Gram determinant matches |m|^2."""
    nn = prefix.shape[2]
    m = _cofactor_vector(prefix)
    g = np.gcd.reduce(np.abs(m), axis=1)
    keep = g == 1
    if norm == "frobenius":
        keep &= budget >= 1
        budget = budget[keep]
    prefix, m = prefix[keep], m[keep]
    if len(prefix) == 0:
        return None
    ws = _size_reduce_basis(prefix)
    x0 = _babai_shift(_particular_solution(m), ws)
    k = ws.shape[1]
    if norm == "frobenius":
        c_eff = budget.astype(np.float64) - (x0 * x0).sum(axis=1)
    else:
        c_eff = float(nn) * bound * bound - (x0 * x0).sum(axis=1)
    los, lens = _ellipsoid_boxes(ws, x0, c_eff)
    if lens.astype(np.float64).prod(axis=1).sum() > 8 * meter.limit:
        raise CapacityError("search boxes exceed capacity")
    counts = lens.prod(axis=1)
    outs = []
    # sub-batch so one skinny ellipsoid cannot blow up a whole block
    n_splits = max(int(counts.sum()) // (4 * _CHUNK_PAIRS), 0)
    splits = np.searchsorted(np.cumsum(counts),
                             np.arange(1, n_splits + 1)
                             * (4 * _CHUNK_PAIRS)) + 1
    lo_idx = 0
    for hi_idx in list(splits) + [len(ws)]:
        hi_idx = min(max(hi_idx, lo_idx), len(ws))
        if hi_idx == lo_idx:
            continue
        sl = slice(lo_idx, hi_idx)
        lo_idx = hi_idx
        rep, off = _ragged_arange(counts[sl])
        if len(rep) == 0:
            continue
        base = np.zeros((len(rep), ws.shape[2]), dtype=np.int64)
        rem = off
        for axis in range(k - 1, -1, -1):
            ll = lens[sl][rep, axis]
            coord = los[sl][rep, axis] + rem % ll
            rem = rem // ll
            base += coord[:, None] * ws[sl][rep, axis]
        x = x0[sl][rep] + base
        if norm == "frobenius":
            ok = (x * x).sum(axis=1) <= budget[sl][rep]
        else:
            ok = np.abs(x).max(axis=1) <= bound
        x, rep = x[ok], rep[ok]
        if len(x) == 0:
            continue
        sample = slice(0, min(len(x), 512))
        assert np.all((m[sl][rep][sample] * x[sample]).sum(axis=1) == 1)
        meter.add(len(x))
        outs.append(np.concatenate(
            [prefix[sl][rep], x[:, None, :]], axis=1))
    if not outs:
        return None
    return np.concatenate(outs)


class _SlnzPlan:
    """Row tables and prefix block layout shared by the slnz drivers."""

    def __init__(self, spec: BallSpec):
        n, t = spec.n, spec._exact_t_inf()
        self.n, self.spec = n, spec
        self.bound = math.floor(t)
        limits = {2: 2500, 3: 150, 4: 15}
        if self.bound > limits[n]:
            raise CapacityError(
                f"slnz n={n} supports radii up to {limits[n]}")
        self.empty = self.bound < 1
        if self.empty:
            return
        self.sq = _frobenius_floor(t) if spec.norm == "frobenius" else None
        self.rows_lex, self.rows_ns, self.norms_ns = _row_table(
            n, self.bound, self.sq, spec.norm)
        self.empty = len(self.rows_lex) == 0
        if self.empty:
            return
        self.norms1 = (self.rows_lex * self.rows_lex).sum(axis=1)
        if spec.norm == "frobenius":
            self.pref = np.searchsorted(
                self.norms_ns, self.sq - (n - 2) - self.norms1, side="right")
        else:
            self.pref = np.full(len(self.rows_lex), len(self.rows_ns),
                                dtype=np.int64)
        weights = self.pref if n >= 3 else np.ones(len(self.rows_lex),
                                                   dtype=np.int64)
        cum = np.cumsum(weights)
        cuts = np.searchsorted(
            cum, np.arange(1, math.ceil(cum[-1] / _CHUNK_PAIRS))
            * _CHUNK_PAIRS, side="left") + 1
        self.blocks = []
        start = 0
        for cut in list(cuts) + [len(self.rows_lex)]:
            cut = min(max(int(cut), start + 1), len(self.rows_lex))
            if cut > start:
                self.blocks.append((start, cut))
                start = cut
        if start < len(self.rows_lex):
            self.blocks.append((start, len(self.rows_lex)))

    def prefixes(self, span):
        """(prefix rows, exact Frobenius budget or None) for a block."""
        g0, g1 = span
        n, sq = self.n, self.sq
        frob = self.spec.norm == "frobenius"
        if n == 2:
            prefix = self.rows_lex[g0:g1][:, None, :]
            return prefix, (sq - self.norms1[g0:g1]) if frob else None
        rep1, off = _ragged_arange(self.pref[g0:g1])
        r1 = self.rows_lex[g0:g1][rep1]
        r2 = self.rows_ns[off]
        if n == 3:
            prefix = np.stack([r1, r2], axis=1)
            budget = sq - self.norms1[g0:g1][rep1] - self.norms_ns[off] \
                if frob else None
            return prefix, budget
        used = self.norms1[g0:g1][rep1] + self.norms_ns[off]
        if frob:
            p3 = np.searchsorted(self.norms_ns, sq - 1 - used, side="right")
        else:
            p3 = np.full(len(r1), len(self.rows_ns), dtype=np.int64)
        rep2, off3 = _ragged_arange(p3)
        prefix = np.stack([r1[rep2], r2[rep2], self.rows_ns[off3]], axis=1)
        budget = (sq - used[rep2] - self.norms_ns[off3]) if frob else None
        return prefix, budget


def iter_slnz_chunks(spec: BallSpec, workers=None):
    """Yield (levels, mats) chunks of the SL(n,Z) ball, rows lex order."""
    plan = _SlnzPlan(spec)
    if plan.empty:
        return
    meter = _CapacityMeter(spec.capacity)

    def run(span):
        prefix, budget = plan.prefixes(span)
        mats = _complete_last_row(prefix, budget, plan.bound, spec.norm,
                                  meter)
        if mats is None:
            return None
        keys = [_pack_rows(mats[:, i]) for i in range(spec.n)]
        order = np.lexsort(tuple(reversed(keys)))
        return mats[order]

    for block in _pool_map(run, plan.blocks, resolve_workers(workers)):
        if block is not None:
            yield np.zeros(len(block), dtype=np.int64), block


def enum_slnz(spec: BallSpec, workers=None) -> np.ndarray:
    chunks = [m for _, m in iter_slnz_chunks(spec, workers)]
    if not chunks:
        return np.empty((0, spec.n, spec.n), dtype=np.int64)
    return np.concatenate(chunks)


def iter_ball_chunks(spec: BallSpec, workers=None):
    """Uniform chunk stream (levels, mats) for any supported group."""
    if spec.group == "sl2z":
        return iter_sl2z_chunks(spec, workers)
    if spec.group == "sl2zp":
        return iter_sl2_zinvp_chunks(spec, workers)
    return iter_slnz_chunks(spec, workers)


def ball_count(spec: BallSpec, workers=None) -> int:
    """Element count; exact interval sums for Frobenius slnz, n <= 3."""
    if spec.group == "slnz" and spec.norm == "frobenius" and spec.n <= 3:
        plan = _SlnzPlan(spec)
        if plan.empty:
            return 0
        meter = _CapacityMeter(spec.capacity)

        def run(span):
            prefix, budget = plan.prefixes(span)
            return _count_last_row(prefix, budget, meter)

        return sum(_pool_map(run, plan.blocks, resolve_workers(workers)))
    return sum(len(m) for _, m in iter_ball_chunks(spec, workers))


def filter_window(mats, window: CongruenceWindow, levels=None):
    """Mask of elements lying in the window's residue classes.

    Elements with a nonzero level are never p-integral, so they fall
    outside every mod-p^m class and are dropped."""
    if mats.shape[-2:] != (2, 2):
        raise ConfigError("congruence windows apply to 2x2 matrices only")
    mod = window.modulus
    flat = mats.reshape(len(mats), -1) % mod
    key = np.zeros(len(mats), dtype=np.int64)
    for j in range(flat.shape[1]):
        key = key * mod + flat[:, j]
    want = []
    for r in window.reps:
        acc = 0
        for entry in r:
            acc = acc * mod + entry % mod
        want.append(acc)
    mask = np.isin(key, np.array(sorted(set(want)), dtype=np.int64))
    if levels is not None:
        mask &= np.asarray(levels) == 0
    return mask
