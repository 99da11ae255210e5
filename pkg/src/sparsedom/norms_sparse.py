"""Multiplier norm estimates, scale-invariant piece norms and sparse forms."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import j0, roots_legendre

from .dyadic_core import DyadicCube, DyadicLattice, root_cube
from .multiplier_ops import CUTOFFS, PAIR, CalderonPair, MultiplierSymbol, PhysicalGrid, SpatialCutoffs
from .reports import fmt

INF = np.inf


def _norm(x: np.ndarray, p: float, axis=None) -> np.ndarray:
    a = np.abs(x)
    if np.isinf(p):
        return a.max(axis=axis)
    return np.sum(a**p, axis=axis) ** (1.0 / p)


def conjugate(p: float) -> float:
    if p == 1:
        return INF
    if np.isinf(p):
        return 1.0
    return p / (p - 1)


@dataclass(frozen=True)
class NormEstimate:
    lower: float
    upper: float
    method_lower: str
    method_upper: str

    def __post_init__(self):
        if self.lower > self.upper * (1 + 1e-9) + 1e-300:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")

    def scaled(self, c: float) -> "NormEstimate":
        return NormEstimate(self.lower * c, self.upper * c, self.method_lower, self.method_upper)

    @property
    def exact(self) -> bool:
        return self.lower == self.upper


# -- M^{p->q} of a discrete convolution operator --------------------------------------


def young_exponent(p: float, q: float) -> float:
    """r with 1 + 1/q = 1/r + 1/p."""
    inv = 1 + (0 if np.isinf(q) else 1 / q) - (0 if np.isinf(p) else 1 / p)
    return INF if inv <= 0 else 1 / inv


def _duality(g: np.ndarray, s: float, axis) -> np.ndarray:
    """Normalised element of the dual unit sphere paired with g in l^s."""
    if np.isinf(s):
        return _dirac_at_peak(g, axis)
    a = np.abs(g)
    phase = np.where(a > 0, g / np.where(a > 0, a, 1), 0)
    out = a ** (s - 1) * phase
    nrm = np.expand_dims(_norm(out, conjugate(s), axis=axis), axis)
    return out / np.where(nrm > 0, nrm, 1)


def _dirac_at_peak(v: np.ndarray, axes) -> np.ndarray:
    flat = np.abs(v).reshape(v.shape[0], -1)
    out = np.zeros(flat.shape, dtype=complex)
    out[np.arange(flat.shape[0]), flat.argmax(axis=1)] = 1.0
    return out.reshape(v.shape)


def _probes(symbol: np.ndarray, p: float, q: float, budget: int, packets: int, rng: np.random.Generator) -> np.ndarray:
    shape = symbol.shape
    d = symbol.ndim
    n = shape[0]
    out = [rng.normal(size=(budget,) + shape) + 1j * rng.normal(size=(budget,) + shape)]
    # matched filter: conj K(-x) makes (T f)(0) = ||K||_2^2
    K = np.fft.ifftn(symbol)
    out.append(np.conj(np.roll(np.flip(K), 1, axis=tuple(range(d))))[None])
    out.append(np.eye(1, K.size).reshape(shape)[None].astype(complex))
    # wave packets tuned to the largest symbol values
    mag = np.abs(symbol).ravel()
    top = np.argsort(mag)[::-1][: max(1, packets // 2)]
    live = np.flatnonzero(mag > 0.5 * mag.max()) if mag.max() > 0 else np.arange(mag.size)
    freqs = list(top) + list(rng.choice(live, size=packets - len(top), replace=True))
    coords = np.indices(shape)
    widths = [2.0 ** (1 + (i % max(1, int(math.log2(n)) - 1))) for i in range(packets)]
    pk = []
    for f_idx, w in zip(freqs, widths):
        fvec = np.unravel_index(f_idx, shape)
        centre = n // 2
        env = np.exp(-sum((c - centre) ** 2 for c in coords) / (2 * w * w))
        phase = np.exp(2j * np.pi * sum(fi * c for fi, c in zip(fvec, coords)) / n)
        pk.append(env * phase)
    out.append(np.array(pk))
    return np.concatenate(out, axis=0)


def mpq_norm(
    symbol, p: float, q: float, budget: int = 64, packets: int = 16, steps: int = 20, seed: int = 0, shortcuts: bool = True
) -> NormEstimate:
    """Bounds for the l^p -> l^q norm of the periodic multiplier with DFT samples ``symbol``.

    Exact for (2, 2) (sup of the symbol), for p = 1 (a single Dirac is extremal
    by translation invariance) and for q = inf (the kernel's l^p' norm).
    Otherwise the lower bound comes from a seeded probe battery refined by a
    nonlinear power iteration, and the upper bound is Young's inequality.
    """
    symbol = np.asarray(symbol, dtype=complex)
    if p > q:
        raise ValueError("need p <= q")
    if p < 1:
        raise ValueError("need p >= 1")
    if shortcuts and p == 2 and q == 2:
        v = float(np.abs(symbol).max(initial=0.0))
        return NormEstimate(v, v, "exact_l2", "exact_l2")
    K = np.fft.ifftn(symbol)
    r = young_exponent(p, q)
    upper = float(_norm(K, r))
    up_tag = "kernel_sup" if np.isinf(r) else "young"
    if upper == 0:
        return NormEstimate(0.0, 0.0, "probe", up_tag)
    if shortcuts and (p == 1 or np.isinf(q)):
        # r = q when p = 1 and r = p' when q = inf: Young is attained
        return NormEstimate(upper, upper, "probe", up_tag)
    axes = tuple(range(1, symbol.ndim + 1))
    rng = np.random.default_rng(seed)
    f = _probes(symbol, p, q, budget, packets, rng)
    ratios = _norm(np.fft.ifftn(np.fft.fftn(f, axes=axes) * symbol, axes=axes), q, axis=axes) / _norm(f, p, axis=axes)
    lower = float(ratios.max())
    method = "probe"
    starts = f[np.argsort(ratios)[::-1][:4]]
    pd = conjugate(p)
    for _ in range(steps):
        g = np.fft.ifftn(np.fft.fftn(starts, axes=axes) * symbol, axes=axes)
        u = _duality(g, q, axes)
        v = np.fft.ifftn(np.fft.fftn(u, axes=axes) * np.conj(symbol), axes=axes)
        starts = _duality(v, pd, axes) if not np.isinf(pd) else _dirac_at_peak(v, axes)
        tf = np.fft.ifftn(np.fft.fftn(starts, axes=axes) * symbol, axes=axes)
        rat = _norm(tf, q, axis=axes) / _norm(starts, p, axis=axes)
        if rat.max() > lower:
            lower, method = float(rat.max()), "power_iteration"
    return NormEstimate(min(lower, upper), upper, method, up_tag)


# -- unit-scale pieces of a symbol ---------------------------------------------------


def default_piece_grid(d: int, ell: int, extent: float | None = None) -> PhysicalGrid:
    h = 0.25 if d == 1 else 0.5
    span = extent if extent is not None else max(2.0 ** (ell + 2), 32.0)
    n = 1 << math.ceil(math.log2(span / h))
    return PhysicalGrid(n, d, h)


def piece_symbol(
    h_sym: Callable, ell: int, grid: PhysicalGrid, cutoffs: SpatialCutoffs = CUTOFFS
) -> np.ndarray:
    """Samples of h * hat(Phi0) (ell = 0) or h * hat(Psi_ell), built on the space side."""
    kern = grid.kernel(np.asarray(h_sym(grid.omega()), dtype=complex))
    r = grid.radius()
    window = cutoffs.Phi0(r) if ell == 0 else cutoffs.Psi(ell, r)
    return grid.symbol(kern * window)


def continuum_mpq(samples: np.ndarray, grid: PhysicalGrid, r: float, q: float, **kw) -> NormEstimate:
    """M^{r->q} of a continuum multiplier from its samples on ``grid``."""
    est = mpq_norm(samples, r, q, **kw)
    d = grid.d
    expo = (0 if np.isinf(q) else 1 / q) - (0 if np.isinf(r) else 1 / r)
    return est.scaled(grid.h ** (d * expo))


def _dim_of(m: MultiplierSymbol, grid: PhysicalGrid | None, d: int | None) -> int:
    if grid is not None:
        return grid.d
    return 1 if d is None else d


def akl(
    m: MultiplierSymbol,
    k: int,
    ell: int,
    p: float,
    r: float,
    q: float,
    d: int | None = None,
    grid: PhysicalGrid | None = None,
    pair: CalderonPair = PAIR,
    cutoffs: SpatialCutoffs = CUTOFFS,
    **kw,
) -> NormEstimate:
    """A^{k,ell}_{p,r,q}[m]: M^{r->q} norm of (phi m(2^k .)) * hat(Psi_ell), weighted by 2^{ell d (1/p - 1/q)}."""
    if not p <= r <= q:
        raise ValueError("need p <= r <= q")
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    dim = _dim_of(m, grid, d)
    grid = grid or default_piece_grid(dim, ell)
    t = 2.0**k

    def h_sym(xi):
        return pair.phi(np.sqrt(sum(c**2 for c in xi))) * m(tuple(c * t for c in xi))

    est = continuum_mpq(piece_symbol(h_sym, ell, grid, cutoffs), grid, r, q, **kw)
    if ell > 0:
        est = est.scaled(2.0 ** (ell * dim * (1 / p - (0 if np.isinf(q) else 1 / q))))
    return est


@dataclass
class AklTable:
    entries: dict[tuple[int, int], NormEstimate]
    p: float
    r: float
    q: float

    def sums(self) -> dict[int, tuple[float, float]]:
        out: dict[int, list[float]] = {}
        for (k, _), e in self.entries.items():
            acc = out.setdefault(k, [0.0, 0.0])
            acc[0] += e.lower
            acc[1] += e.upper
        return {k: (v[0], v[1]) for k, v in out.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "ell", "lower", "upper", "method_lower", "method_upper"])
        for (k, ell), e in sorted(self.entries.items()):
            w.writerow([k, ell, fmt(e.lower), fmt(e.upper), e.method_lower, e.method_upper])
        return buf.getvalue()


def akl_table(m: MultiplierSymbol, k_range: Iterable[int], ell_max: int, p, r, q, d: int | None = None, **kw) -> AklTable:
    ent = {(k, ell): akl(m, k, ell, p, r, q, d=d, **kw) for k in k_range for ell in range(ell_max + 1)}
    return AklTable(ent, p, r, q)


@dataclass(frozen=True)
class CalA:
    lower: float
    upper: float
    tail: float  # largest ell_max entry over k, a proxy for the truncated remainder
    argmax_k: int


def calA(m: MultiplierSymbol, p, r, q, k_range: Iterable[int], ell_max: int, d: int | None = None, **kw) -> CalA:
    """sup over k of sum over ell <= ell_max of A^{k,ell}; lower and upper aggregated separately."""
    tab = akl_table(m, list(k_range), ell_max, p, r, q, d=d, **kw)
    sums = tab.sums()
    if not sums:
        return CalA(0.0, 0.0, 0.0, 0)
    kbest = max(sums, key=lambda k: (sums[k][0], -k))
    tail = max(tab.entries[(k, ell_max)].upper for k in sums)
    return CalA(sums[kbest][0], max(v[1] for v in sums.values()), tail, kbest)


def besov_mult_norm(
    m: MultiplierSymbol,
    alpha: float,
    r: float,
    q: float,
    t_grid: Sequence[float],
    ell_max: int,
    d: int | None = None,
    grid: PhysicalGrid | None = None,
    pair: CalderonPair = PAIR,
    **kw,
) -> tuple[float, float]:
    """max over t of ||h * hat(Phi0)|| + sum_{0<ell<=ell_max} 2^{ell alpha} ||h * hat(Psi_ell)||, h = phi m(t .)."""
    dim = _dim_of(m, grid, d)
    best = (0.0, 0.0)
    for t in t_grid:

        def h_sym(xi, t=t):
            return pair.phi(np.sqrt(sum(c**2 for c in xi))) * m(tuple(c * t for c in xi))

        lo = hi = 0.0
        for ell in range(ell_max + 1):
            g = grid or default_piece_grid(dim, ell_max)
            e = continuum_mpq(piece_symbol(h_sym, ell, g), g, r, q, **kw)
            w = 2.0 ** (ell * alpha) if ell > 0 else 1.0
            lo += w * e.lower
            hi += w * e.upper
        best = (max(best[0], lo), max(best[1], hi))
    return best


# -- radial pieces in the plane via Hankel transforms --------------------------------


class RadialKernel:
    """Kernel of a radial multiplier h(|xi|) on R^2 supported in lo <= |xi| <= hi.

    K(r) = (2 pi)^-1 int h(rho) J0(r rho) rho d rho, by Gauss-Legendre quadrature.
    """

    def __init__(self, profile: Callable, lo: float, hi: float, r_max: float):
        if not 0 <= lo < hi:
            raise ValueError("bad support")
        nodes = int(2 * r_max * (hi - lo)) + 200
        x, w = roots_legendre(nodes)
        self.rho = lo + (x + 1) * (hi - lo) / 2
        self.weights = w * (hi - lo) / 2 * np.asarray(profile(self.rho), dtype=complex) * self.rho / (2 * np.pi)
        self.hi = hi

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        flat = r.ravel()
        out = np.empty(flat.shape, dtype=complex)
        for s in range(0, flat.size, 4096):
            blk = flat[s : s + 4096]
            out[s : s + 4096] = j0(np.outer(blk, self.rho)) @ self.weights
        return out.reshape(r.shape)


def _window(ell: int, r, cutoffs: SpatialCutoffs) -> np.ndarray:
    return cutoffs.Phi0(r) if ell == 0 else cutoffs.Psi(ell, r)


def _window_range(ell: int) -> tuple[float, float]:
    return (0.0, 0.5) if ell == 0 else (2.0 ** (ell - 3), 2.0 ** (ell - 1))


def radial_piece_sup(kernel: RadialKernel, ell: int, cutoffs: SpatialCutoffs = CUTOFFS) -> float:
    """M^{1->inf} norm of the ell-th spatial piece: sup_r |K(r) Psi_ell(r)|."""
    a, b = _window_range(ell)
    step = min(0.05, 0.25 / kernel.hi)
    r = np.arange(a, b + step, step)
    return float(np.abs(kernel(r) * _window(ell, r, cutoffs)).max(initial=0.0))


def radial_piece_l2(kernel: RadialKernel, ell: int, rho_range: tuple[float, float], cutoffs: SpatialCutoffs = CUTOFFS) -> float:
    """M^{2->2} norm of the ell-th piece: sup over rho of its Hankel transform."""
    a, b = _window_range(ell)
    nodes = int(2 * (b - a) * (rho_range[1] + kernel.hi)) + 200
    x, w = roots_legendre(nodes)
    r = a + (x + 1) * (b - a) / 2
    g = kernel(r) * _window(ell, r, cutoffs) * r * w * (b - a) / 2 * 2 * np.pi
    step = 2.0 ** -(ell + 3) if ell > 0 else 0.05
    rho = np.arange(rho_range[0], rho_range[1] + step, step)
    vals = np.concatenate([j0(np.outer(rho[s : s + 2048], r)) @ g for s in range(0, rho.size, 2048)])
    return float(np.abs(vals).max(initial=0.0))


def radial_besov_1inf(profile: Callable, lo: float, hi: float, ell_max: int, cutoffs: SpatialCutoffs = CUTOFFS) -> float:
    """Besov sum with X = M^{1->inf} and alpha = d = 2 for a planar radial symbol."""
    K = RadialKernel(profile, lo, hi, 2.0 ** (ell_max - 1))
    total = radial_piece_sup(K, 0, cutoffs)
    for ell in range(1, ell_max + 1):
        total += 4.0**ell * radial_piece_sup(K, ell, cutoffs)
    return total


# -- sparse forms -----------------------------------------------------------------------


def _block_average(f: np.ndarray, p: float, level: int, triple: bool) -> np.ndarray:
    """<f>_{Q,p} for every cube Q of side 2^level (over 3Q, wrapped, when triple)."""
    n, d = f.shape[0], f.ndim
    s = 1 << level
    a = np.abs(f) ** p
    blocks = a.reshape(sum(((n // s, s) for _ in range(d)), ())).sum(axis=tuple(range(1, 2 * d, 2)))
    vol = float(s**d)
    if triple:
        acc = np.zeros(blocks.shape)
        for off in np.ndindex(*(3,) * d):
            acc += np.roll(blocks, tuple(o - 1 for o in off), axis=tuple(range(d)))
        blocks, vol = acc, vol * 3**d
    return (blocks / vol) ** (1.0 / p)


@dataclass
class SparseFamily:
    cubes: tuple[DyadicCube, ...]
    gamma: float
    packing_certificate: dict[DyadicCube, int] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        self.cubes = tuple(sorted(set(self.cubes)))
        self.packing_certificate = carleson_sums(self.cubes)

    def is_packed(self) -> bool:
        return all(self.packing_certificate[q] <= q.volume / self.gamma * (1 + 1e-12) for q in self.cubes)

    def to_rows(self) -> list[tuple]:
        return [(q.log_side, *q.corner, self.packing_certificate[q]) for q in self.cubes]


def carleson_sums(cubes: Iterable[DyadicCube]) -> dict[DyadicCube, int]:
    cubes = list(cubes)
    return {q: sum(p.volume for p in cubes if q.contains(p)) for q in cubes}


def sparse_form(S: SparseFamily | Iterable[DyadicCube], f1, f2, p1: float, p2: float, triple: bool = False) -> float:
    """sum over Q of |Q| <f1>_{Q,p1} <f2>_{Q,p2} (f2 averaged over 3Q when triple)."""
    cubes = S.cubes if isinstance(S, SparseFamily) else tuple(S)
    f1, f2 = np.asarray(f1), np.asarray(f2)
    total = 0.0
    for q in cubes:
        a1 = float(np.mean(np.abs(f1[q.slices]) ** p1) ** (1 / p1))
        if triple:
            m = q.dilate_mask(3, f2.shape[0], periodic=True)
            a2 = float(np.mean(np.abs(f2[m]) ** p2) ** (1 / p2))
        else:
            a2 = float(np.mean(np.abs(f2[q.slices]) ** p2) ** (1 / p2))
        total += q.volume * a1 * a2
    return total


def _pareto(v: np.ndarray, s: np.ndarray, cap: int) -> np.ndarray:
    """Indices of the (volume, score) frontier: no kept state has both more volume and less score."""
    order = np.lexsort((-s, v))
    vs, ss = v[order], s[order]
    best = np.maximum.accumulate(ss)
    keep = np.ones(len(order), dtype=bool)
    keep[1:] = ss[1:] > best[:-1]
    idx = order[keep]
    if len(idx) > cap:
        # thin evenly in volume, always keeping the highest score
        pick = np.unique(np.r_[np.linspace(0, len(idx) - 1, cap - 1).round().astype(int), len(idx) - 1])
        idx = idx[pick]
    return idx


def greedy_lambda_star(
    f1,
    f2,
    p1: float,
    p2: float,
    gamma: float,
    s0: DyadicCube | None = None,
    triple: bool = False,
    min_level: int = 0,
    frontier: int = 64,
) -> tuple[float, SparseFamily]:
    """Best Carleson-packed family found by a bottom-up dynamic programme on the cube tree.

    Each cube keeps a frontier of (chosen volume inside it, best value) states;
    a parent merges its children's frontiers and may add itself when the packing
    bound |Q| / gamma still holds.  Frontiers are thinned to ``frontier`` states,
    so on large trees the result is a feasible family and hence a lower bound;
    on small trees nothing is thinned and the maximum is exact.  Deterministic.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    f1, f2 = np.asarray(f1), np.asarray(f2)
    d = f1.ndim
    within = s0 or root_cube(f1.shape[0], d)
    slack = 1 + 1e-12
    # per level and block index: (volumes, values, chosen flags, child state indices)
    tree: dict[int, dict[tuple, tuple]] = {}
    prev: dict[tuple, tuple] = {}
    for lev in range(min_level, within.log_side + 1):
        side = 1 << lev
        a1 = _block_average(f1, p1, lev, False)
        a2 = _block_average(f2, p2, lev, triple)
        lo = tuple(c // side for c in within.corner)
        cnt = within.side // side
        vol = side**d
        cur: dict[tuple, tuple] = {}
        for idx in np.ndindex(*(cnt,) * d):
            b = tuple(l + i for l, i in zip(lo, idx))
            score = float(a1[b] * a2[b]) * vol
            V, S = np.zeros(1, dtype=np.int64), np.zeros(1)
            picks = np.zeros((1, 0), dtype=np.int64)
            if lev > min_level:
                for off in np.ndindex(*(2,) * d):
                    cv, cs, _, _ = prev[tuple(2 * x + o for x, o in zip(b, off))]
                    V2 = (V[:, None] + cv[None, :]).ravel()
                    S2 = (S[:, None] + cs[None, :]).ravel()
                    ia, ib = np.divmod(np.arange(V2.size), cv.size)
                    P2 = np.concatenate([picks[ia], ib[:, None]], axis=1)
                    keep = _pareto(V2, S2, frontier)
                    V, S, picks = V2[keep], S2[keep], P2[keep]
            chosen = np.zeros(V.size, dtype=bool)
            if score > 0:
                ok = (V + vol) <= vol / gamma * slack
                if ok.any():
                    V = np.r_[V, V[ok] + vol]
                    S = np.r_[S, S[ok] + score]
                    picks = np.concatenate([picks, picks[ok]], axis=0)
                    chosen = np.r_[chosen, np.ones(int(ok.sum()), dtype=bool)]
                    keep = _pareto(V, S, frontier)
                    V, S, picks, chosen = V[keep], S[keep], picks[keep], chosen[keep]
            cur[b] = (V, S, chosen, picks)
        tree[lev] = cur
        prev = cur
    root_b = tuple(c // within.side for c in within.corner)
    V, S, chosen, picks = tree[within.log_side][root_b]
    best = int(np.argmax(S))
    cubes: list[DyadicCube] = []
    stack = [(within.log_side, root_b, best)]
    while stack:
        lev, b, i = stack.pop()
        _, _, ch, pk = tree[lev][b]
        side = 1 << lev
        if ch[i]:
            cubes.append(DyadicCube(tuple(x * side for x in b), lev))
        if lev > min_level:
            for off, j in zip(np.ndindex(*(2,) * d), pk[i]):
                stack.append((lev - 1, tuple(2 * x + o for x, o in zip(b, off)), int(j)))
    fam = SparseFamily(tuple(cubes), gamma)
    return sparse_form(fam, f1, f2, p1, p2, triple=triple), fam


def lambda_double_star(f1, f2, s0: DyadicCube, p: float, qd: float, gamma: float = 0.5) -> tuple[float, SparseFamily]:
    """Greedy lower bound for the S0-localised form with f2 averaged over triples."""
    return greedy_lambda_star(f1, f2, p, qd, gamma, s0=s0, triple=True)


def brute_lambda_star(
    f1, f2, p1: float, p2: float, gamma: float, max_cubes: int = 20, min_level: int = 0, disjoint_only: bool = False
) -> float:
    """Exhaustive maximum of the sparse form over Carleson-packed subfamilies of the grid lattice."""
    f1, f2 = np.asarray(f1), np.asarray(f2)
    cubes = DyadicLattice(f1.shape[0], f1.ndim).cubes(min_level)
    if len(cubes) > min(max_cubes, 20):
        raise ValueError(f"{len(cubes)} cubes exceed the exhaustive limit")
    m = len(cubes)
    score = np.array([sparse_form([q], f1, f2, p1, p2) for q in cubes])
    vol = np.array([q.volume for q in cubes], dtype=float)
    contain = np.array([[a.contains(b) for b in cubes] for a in cubes], dtype=float)
    masks = ((np.arange(1 << m)[:, None] >> np.arange(m)[None, :]) & 1).astype(bool)
    sums = masks.astype(float) @ (contain * vol[None, :]).T
    if disjoint_only:
        overlap = contain + contain.T - 2 * np.eye(m)
        ok = ~np.any((masks.astype(float) @ overlap) * masks > 0, axis=1)
    else:
        ok = ~np.any(masks & (sums > vol[None, :] / gamma * (1 + 1e-12)), axis=1)
    vals = masks.astype(float) @ score
    return float(vals[ok].max(initial=0.0))


def holder_lift(pieces: Sequence[tuple[DyadicCube, np.ndarray]], p: float, q: float) -> tuple[float, float]:
    """Both sides of ||sum f_Q||_p <= (sum |Q|)^{1/p-1/q} (sum |Q|^{1-q/p} ||f_Q||_p^q)^{1/q} for disjoint Q."""
    if not 1 <= p <= q < np.inf:
        raise ValueError("need 1 <= p <= q < inf")
    if not pieces:
        return 0.0, 0.0
    total = sum(f for _, f in pieces)
    lhs = float(_norm(total, p))
    vols = np.array([c.volume for c, _ in pieces], dtype=float)
    nr = np.array([float(_norm(f, p)) for _, f in pieces])
    rhs = float(vols.sum() ** (1 / p - 1 / q) * np.sum(vols ** (1 - q / p) * nr**q) ** (1 / q))
    return lhs, rhs


def grid_akl(m: MultiplierSymbol, n: int, d: int, k: int, ell: int, p, r, q, xi0: float | None = None, **kw) -> NormEstimate:
    """A^{k,ell} of the grid operator of m on Z_n^d, with k the grid frequency level.

    Sampling the dilated symbol on a grid of spacing 2^k reproduces the grid
    operator's own band-k piece, so no resampling error enters.
    """
    from .multiplier_ops import XI0

    mt = m.on_angular(n, XI0 if xi0 is None else xi0)
    return akl(mt, k, ell, p, r, q, grid=PhysicalGrid(n, d, 2.0**k), **kw)


def grid_calA(m: MultiplierSymbol, n: int, d: int, p, r, q, k_range: Iterable[int], ell_max: int, xi0=None, **kw) -> CalA:
    sums: dict[int, list[float]] = {}
    tail = 0.0
    for k in k_range:
        acc = sums.setdefault(k, [0.0, 0.0])
        for ell in range(ell_max + 1):
            e = grid_akl(m, n, d, k, ell, p, r, q, xi0=xi0, **kw)
            acc[0] += e.lower
            acc[1] += e.upper
            if ell == ell_max:
                tail = max(tail, e.upper)
    if not sums:
        return CalA(0.0, 0.0, 0.0, 0)
    kbest = max(sums, key=lambda k: (sums[k][0], -k))
    return CalA(sums[kbest][0], max(v[1] for v in sums.values()), tail, kbest)


def grid_calC(m: MultiplierSymbol, n: int, d: int, p, r, q, j0: int, k_range: Iterable[int], xi0=None, **kw) -> NormEstimate:
    """C_{p,r,q}(j0) for the grid operator: sup over k > -j0 of A^{k, j0+k}."""
    lo = hi = 0.0
    ml, mu = "probe", "young"
    for k in k_range:
        if k <= -j0:
            continue
        e = grid_akl(m, n, d, k, j0 + k, p, r, q, xi0=xi0, **kw)
        if e.lower >= lo:
            ml = e.method_lower
        lo, hi = max(lo, e.lower), max(hi, e.upper)
        mu = e.method_upper
    return NormEstimate(lo, hi, ml, mu)
