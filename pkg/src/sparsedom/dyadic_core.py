"""Periodic grids, dyadic cubes, conditional expectations and square functions.

Levels are indexed by side length: level j means cubes of side 2^j in grid
units, so level 0 is single points and level J the whole grid.  Norms use the
counting measure without normalization.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _log2_exact(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise ValueError(f"{n} is not a power of two")
    return n.bit_length() - 1


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex function on the periodic grid Z_N^d, N = 2^J, d in {1, 2}."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim not in (1, 2):
            raise ValueError("only d = 1 or d = 2 grids are supported")
        if len(set(v.shape)) != 1:
            raise ValueError("grid must be square")
        if _log2_exact(v.shape[0]) < 2:
            raise ValueError("grid needs N >= 4")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def grid_log_size(self) -> int:
        return _log2_exact(self.size)

    def norm(self, p: float) -> float:
        return lp_norm(self.values, p)


def lp_norm(f, p: float) -> float:
    a = np.abs(np.asarray(f))
    if np.isinf(p):
        return float(a.max(initial=0.0))
    return float(np.sum(a**p) ** (1.0 / p))


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Half-open dyadic cube corner + [0, 2^log_side)^d in grid units."""

    corner: tuple[int, ...]
    log_side: int

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))
        if self.log_side < 0:
            raise ValueError("negative log side")
        if any(c % self.side for c in self.corner):
            raise ValueError(f"corner {self.corner} not aligned to side {self.side}")

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def side(self) -> int:
        return 1 << self.log_side

    @property
    def volume(self) -> int:
        return self.side**self.dim

    @property
    def diam(self) -> float:
        return float(np.sqrt(self.dim) * self.side)

    @property
    def slices(self) -> tuple[slice, ...]:
        return tuple(slice(c, c + self.side) for c in self.corner)

    def indicator(self, n: int) -> np.ndarray:
        out = np.zeros((n,) * self.dim, dtype=bool)
        out[self.slices] = True
        return out

    def contains(self, other: "DyadicCube") -> bool:
        if other.log_side > self.log_side:
            return False
        return all(c <= o < c + self.side for c, o in zip(self.corner, other.corner))

    def parent(self) -> "DyadicCube":
        s = 2 * self.side
        return DyadicCube(tuple(c - c % s for c in self.corner), self.log_side + 1)

    def children(self) -> list["DyadicCube"]:
        if self.log_side == 0:
            return []
        h = self.side // 2
        offs = np.ndindex(*(2,) * self.dim)
        return [DyadicCube(tuple(c + h * o for c, o in zip(self.corner, off)), self.log_side - 1) for off in offs]

    def subcubes(self, level: int) -> Iterator["DyadicCube"]:
        s = 1 << level
        for idx in np.ndindex(*(self.side // s,) * self.dim):
            yield DyadicCube(tuple(c + s * i for c, i in zip(self.corner, idx)), level)

    def dilate_mask(self, factor: float, n: int, periodic: bool = False) -> np.ndarray:
        """Points of the factor-dilate about the center (clipped or wrapped)."""
        center = np.array(self.corner) + (self.side - 1) / 2.0
        half = factor * self.side / 2.0
        axes = []
        for c in center:
            lo, hi = int(np.ceil(c - half + 0.5 - 1e-9)), int(np.floor(c + half - 0.5 + 1e-9))
            idx = np.arange(lo, hi + 1)
            if periodic:
                idx = np.unique(idx % n)
            else:
                idx = idx[(idx >= 0) & (idx < n)]
            axes.append(idx)
        out = np.zeros((n,) * self.dim, dtype=bool)
        out[np.ix_(*axes)] = True
        return out


def root_cube(n: int, dim: int) -> DyadicCube:
    return DyadicCube((0,) * dim, _log2_exact(n))


@dataclass(frozen=True)
class DyadicLattice:
    """All dyadic subcubes of the ambient cube [0, N)^d."""

    size: int
    dim: int

    @cached_property
    def ambient(self) -> DyadicCube:
        return root_cube(self.size, self.dim)

    def level(self, j: int) -> list[DyadicCube]:
        return list(self.ambient.subcubes(j))

    def cubes(self, min_level: int = 0) -> list[DyadicCube]:
        out = []
        for j in range(self.ambient.log_side, min_level - 1, -1):
            out.extend(self.level(j))
        return out


def _grid_shape(f: np.ndarray) -> tuple[int, int]:
    n = f.shape[0]
    return n, _log2_exact(n)


def block_reduce(f: np.ndarray, level: int, op=np.mean) -> np.ndarray:
    """Reduce f over dyadic blocks of side 2^level; result has shape (N/2^level,)*d."""
    f = np.asarray(f)
    s = 1 << level
    m = f.shape[0] // s
    if f.ndim == 1:
        return op(f.reshape(m, s), axis=1)
    return op(f.reshape(m, s, m, s), axis=(1, 3))


def block_expand(c: np.ndarray, level: int) -> np.ndarray:
    s = 1 << level
    out = c
    for ax in range(c.ndim):
        out = np.repeat(out, s, axis=ax)
    return out


def _check_cube(q: DyadicCube, n: int, dim: int) -> None:
    if q.dim != dim:
        raise ValueError("cube and grid dimensions differ")
    if any(c < 0 or c + q.side > n for c in q.corner):
        raise ValueError(f"cube {q} outside the grid")


def average(f, q: DyadicCube, p: float = 1.0) -> float:
    """L^p average (|Q|^-1 sum_Q |f|^p)^(1/p)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    f = np.asarray(f)
    _check_cube(q, f.shape[0], f.ndim)
    a = np.abs(f[q.slices])
    if np.isinf(p):
        return float(a.max())
    return float(np.mean(a**p) ** (1.0 / p))


def cond_expect(f, j: int) -> np.ndarray:
    f = np.asarray(f)
    _, J = _grid_shape(f)
    if not 0 <= j <= J:
        raise ValueError(f"level {j} outside [0, {J}]")
    if j == 0:
        return f.copy()
    return block_expand(block_reduce(f, j), j)


def mart_diff(f, j: int) -> np.ndarray:
    """Expectation at side 2^(j-1) minus expectation at side 2^j."""
    f = np.asarray(f)
    _, J = _grid_shape(f)
    if not 1 <= j <= J:
        raise ValueError(f"level {j} outside [1, {J}]")
    return cond_expect(f, j - 1) - cond_expect(f, j)


def top_level(s0: DyadicCube) -> int:
    """Level of the top expectation in the S0 reproducing formula (children of S0)."""
    if s0.log_side < 1:
        raise ValueError("S0 must have side >= 2")
    return s0.log_side - 1


def _check_support(f: np.ndarray, s0: DyadicCube) -> np.ndarray:
    _check_cube(s0, f.shape[0], f.ndim)
    mask = s0.indicator(f.shape[0])
    if np.any(f[~mask] != 0):
        raise ValueError("function not supported in S0")
    return mask


def martingale_levels(s0: DyadicCube) -> range:
    """Levels j whose differences live on cubes strictly inside S0."""
    return range(1, s0.log_side)


def local_square_fn(f, s0: DyadicCube) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    mask = _check_support(f, s0)
    top = np.abs(cond_expect(f, top_level(s0)))
    sq = np.zeros(f.shape)
    for j in martingale_levels(s0):
        sq += np.abs(mart_diff(f, j)) ** 2
    return (top + np.sqrt(sq)) * mask


def peetre_terms(f, s0: DyadicCube) -> dict[int, np.ndarray]:
    """Per level, sup of |D_j f| over the side-2^j cube containing each point."""
    f = np.asarray(f, dtype=complex)
    return {j: block_expand(block_reduce(np.abs(mart_diff(f, j)), j, np.max), j) for j in martingale_levels(s0)}


def peetre_square_fn(f, s0: DyadicCube) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    mask = _check_support(f, s0)
    top = np.abs(cond_expect(f, top_level(s0)))
    sq = np.zeros(f.shape)
    for t in peetre_terms(f, s0).values():
        sq += t**2
    return (top + np.sqrt(sq)) * mask


def hl_maximal(f) -> np.ndarray:
    """Uncentered maximal function over integer cubes, zero outside the grid.

    For every side s <= N the cube averages are formed from prefix sums of
    the zero-padded |f|; a sliding maximum of width s then gives the best
    cube of that side containing each point.  Cubes larger than N can never
    beat the cube [0, N)^d, which also contains every point.
    """
    a = np.abs(np.asarray(f, dtype=complex))
    n, d = a.shape[0], a.ndim
    pad = np.pad(a, n)
    c = pad.cumsum(axis=0)
    if d == 2:
        c = c.cumsum(axis=1)
    c = np.pad(c, ((1, 0),) * d)
    out = np.zeros(a.shape)
    for s in range(1, n + 1):
        # corners from n - s + 1 .. 2n - 1 in padded coordinates
        lo = np.arange(n - s + 1, 2 * n)
        hi = lo + s
        if d == 1:
            sums = c[hi] - c[lo]
        else:
            sums = c[np.ix_(hi, hi)] - c[np.ix_(lo, hi)] - c[np.ix_(hi, lo)] + c[np.ix_(lo, lo)]
        avg = sums / s**d
        # point x sees corners x-s+1..x, which sit at avg indices x..x+s-1
        for ax in range(d):
            avg = sliding_window_view(avg, s, axis=ax).max(axis=-1)
        np.maximum(out, avg, out=out)
    return out


def hl_maximal_bruteforce(f) -> np.ndarray:
    """Direct enumeration of cubes containing each point (oracle, small N only)."""
    a = np.abs(np.asarray(f, dtype=complex))
    n, d = a.shape[0], a.ndim
    out = np.zeros(a.shape)
    for s in range(1, n + 1):
        for corner in np.ndindex(*(n + s - 1,) * d):
            lo = [c - s + 1 for c in corner]
            sl = tuple(slice(max(l, 0), min(l + s, n)) for l in lo)
            val = a[sl].sum() / s**d
            tgt = tuple(slice(max(l, 0), min(l + s, n)) for l in lo)
            np.maximum(out[tgt], val, out=out[tgt])
    return out


def weak_type_ratio(f, mf: np.ndarray | None = None) -> float:
    """sup over levels lambda of lambda |{Mf > lambda}| / ||f||_1."""
    a = np.abs(np.asarray(f))
    total = a.sum()
    if total == 0:
        return 0.0
    mf = hl_maximal(a) if mf is None else mf
    vals = np.sort(mf.ravel())[::-1]
    # |{Mf > lambda}| is piecewise constant; sup approached at lambda just below each value
    counts = np.arange(1, vals.size + 1)
    return float(np.max(vals * counts) / total)


def sq_fn_constant(p: float, n: int, dim: int, trials: int = 200, seed: int = 0) -> float:
    """Largest observed ||G f||_p / ||f||_p over random complex f on the root cube."""
    rng = np.random.default_rng(seed)
    s0 = root_cube(n, dim)
    best = 0.0
    for t in range(trials):
        f = random_test_function(rng, n, dim, kind=t % 3)
        best = max(best, lp_norm(peetre_square_fn(f, s0), p) / lp_norm(f, p))
    return best


def random_test_function(rng: np.random.Generator, n: int, dim: int, kind: int = 0) -> np.ndarray:
    """Gaussian, sparse spiky, piecewise-constant or heavy-tailed random complex data."""
    shape = (n,) * dim
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    if kind == 1:
        z = z * (rng.random(shape) < 0.1) * 10 + 0.1 * z
    elif kind == 2:
        lev = int(rng.integers(1, _log2_exact(n)))
        z = block_expand(block_reduce(z, lev), lev) + 0.05 * z
    elif kind == 3:
        z = z * np.exp(3 * rng.standard_normal(shape)) * (rng.random(shape) < 0.2)
        z.flat[int(rng.integers(z.size))] += 1.0
    return z
