"""Symbol bank and FFT operator engine on periodic grids.

Conventions
-----------
* Grid operators act on Z_N^d with unit spacing.  Their frequencies are
  angular, omega = 2 pi n / N in radians per grid point, so a Littlewood-Paley
  piece at level k lives where |omega| ~ 2^k and its kernel lives at |x| ~ 2^-k.
* A ``MultiplierSymbol`` is a function of a continuum frequency xi.  On a grid
  of size N its unit sphere |xi| = 1 is placed at the integer frequency xi0
  (default 4), i.e. the grid samples are m(n / xi0) for integer n.
* ``PhysicalGrid`` samples a continuum problem with spacing h; its kernels
  approximate (2 pi)^-d * int m(xi) e^{i x xi} d xi.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

XI0 = 4.0


# -- one-dimensional profiles ---------------------------------------------------


def bump(t) -> np.ndarray:
    """exp(1 - 1/(1 - t^2)) on (-1, 1), zero elsewhere; peak value 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    inside = np.abs(t) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def smooth_step(t) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = np.zeros(t.shape)
    b = np.zeros(t.shape)
    pos = t > 0
    a[pos] = np.exp(-1.0 / t[pos])
    lt1 = t < 1
    b[lt1] = np.exp(-1.0 / (1.0 - t[lt1]))
    return a / (a + b)


def chi_infinity(r) -> np.ndarray:
    """Vanishes for |xi| <= 1/2, equals 1 for |xi| >= 1."""
    return smooth_step((np.asarray(r, dtype=float) - 0.5) / 0.5)


def chi_bump(t) -> np.ndarray:
    """Smooth bump supported in (-1/2, 1/2) with chi(0) = 1."""
    return bump(2.0 * np.asarray(t, dtype=float))


def phi_circ(r) -> np.ndarray:
    """Supported in (3/4, 5/4), identically 1 on [7/8, 9/8]."""
    r = np.asarray(r, dtype=float)
    return smooth_step((r - 0.75) / 0.125) * smooth_step((1.25 - r) / 0.125)


def necessity_window(r) -> np.ndarray:
    """Spatial window supported in (1/2, 2), identically 1 on [2^-1/2, 2^1/2]."""
    r = np.asarray(r, dtype=float)
    s = math.sqrt(2.0)
    return smooth_step((r - 0.5) / (1 / s - 0.5)) * smooth_step((2.0 - r) / (2.0 - s))


# -- Calderon pair and spatial cutoffs -----------------------------------------------


@dataclass(frozen=True)
class CalderonPair:
    """phi, eta with sum_k eta^2(2^-k r) phi(2^-k r) = 1 for r > 0.

    psi is a bump on (psi_lo, psi_hi); S(r) = sum_k psi(2^-k r) is dilation
    invariant, eta = sqrt(psi / S) and phi = 1 on [psi_lo, psi_hi], so the
    identity holds pointwise.
    """

    psi_lo: float = 0.7
    psi_hi: float = 1.6

    def __post_init__(self):
        if not (0.5 < self.psi_lo <= 0.75 and 1.5 <= self.psi_hi < 2.0 and self.psi_hi > 2 * self.psi_lo):
            raise ValueError("psi support must cover an octave and sit inside (1/2, 2)")

    def psi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        mid, half = (self.psi_lo + self.psi_hi) / 2, (self.psi_hi - self.psi_lo) / 2
        return bump((r - mid) / half)

    def S(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape)
        pos = r > 0
        rp = r[pos]
        base = np.floor(np.log2(rp))
        acc = np.zeros(rp.shape)
        for o in range(-2, 3):
            acc += self.psi(rp * 2.0 ** -(base + o))
        out[pos] = acc
        return out

    def eta(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        ps = self.psi(r)
        out = np.zeros(r.shape)
        nz = ps > 0
        out[nz] = np.sqrt(ps[nz] / self.S(r[nz]))
        return out

    def phi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return smooth_step((r - 0.5) / (self.psi_lo - 0.5)) * smooth_step((2.0 - r) / (2.0 - self.psi_hi))


@dataclass(frozen=True)
class SpatialCutoffs:
    """Phi0 = 1 on |x| <= 1/4, 0 on |x| >= 1/2; Psi_l(x) = Phi0(2^-l x) - Phi0(2^-l+1 x)."""

    def Phi0(self, r) -> np.ndarray:
        return smooth_step((0.5 - np.abs(np.asarray(r, dtype=float))) / 0.25)

    def Psi(self, ell: int, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.Phi0(r * 2.0**-ell) - self.Phi0(r * 2.0 ** (1 - ell))

    def annulus(self, ell: int) -> tuple[float, float]:
        return 2.0 ** (ell - 3), 2.0 ** (ell - 1)


PAIR = CalderonPair()
CUTOFFS = SpatialCutoffs()


# -- grids ---------------------------------------------------------------------------


def _signed(n: int) -> np.ndarray:
    return np.fft.fftfreq(n) * n


@lru_cache(maxsize=6)
def _radius_cached(n: int, d: int, h: float) -> np.ndarray:
    ax = _signed(n) * h
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    r = np.sqrt(sum(g**2 for g in grids))
    r.setflags(write=False)
    return r


@lru_cache(maxsize=6)
def _omega_cached(n: int, d: int, h: float) -> tuple[np.ndarray, ...]:
    ax = 2 * np.pi * np.fft.fftfreq(n, d=h)
    out = tuple(np.meshgrid(*([ax] * d), indexing="ij"))
    for a in out:
        a.setflags(write=False)
    return out


@dataclass(frozen=True)
class PhysicalGrid:
    """n^d samples with spacing h of a continuum problem on R^d (periodised)."""

    n: int
    d: int
    h: float = 1.0

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def extent(self) -> float:
        return self.n * self.h

    @property
    def nyquist(self) -> float:
        return np.pi / self.h

    def radius(self) -> np.ndarray:
        return _radius_cached(self.n, self.d, float(self.h))

    def omega(self) -> tuple[np.ndarray, ...]:
        return _omega_cached(self.n, self.d, float(self.h))

    def omega_abs(self) -> np.ndarray:
        return np.sqrt(sum(w**2 for w in self.omega()))

    def kernel(self, symbol_samples: np.ndarray) -> np.ndarray:
        """Continuum kernel samples of the multiplier with the given frequency samples."""
        return np.fft.ifftn(symbol_samples) / self.h**self.d

    def symbol(self, kernel_samples: np.ndarray) -> np.ndarray:
        return np.fft.fftn(kernel_samples) * self.h**self.d


def unit_grid(n: int, d: int) -> PhysicalGrid:
    return PhysicalGrid(n, d, 1.0)


def grid_radius(n: int, d: int) -> np.ndarray:
    """Periodic distance to the origin on Z_n^d."""
    return _radius_cached(n, d, 1.0)


def angular_abs(n: int, d: int) -> np.ndarray:
    return unit_grid(n, d).omega_abs()


def frequency_levels(n: int, d: int, pair: CalderonPair = PAIR) -> list[int]:
    """Levels k whose band phi(2^-k |omega|) touches a nonzero grid frequency."""
    w = angular_abs(n, d)
    wmin, wmax = 2 * np.pi / n, float(w.max())
    lo = math.floor(math.log2(wmin)) - 2
    hi = math.ceil(math.log2(wmax)) + 2
    return [k for k in range(lo, hi + 1) if np.any(pair.phi(w * 2.0**-k) > 0)]


# -- symbols --------------------------------------------------------------------------


def _abs_xi(xi: tuple[np.ndarray, ...]) -> np.ndarray:
    return np.sqrt(sum(np.asarray(c, dtype=float) ** 2 for c in xi))


@dataclass(frozen=True)
class MultiplierSymbol:
    kind: str
    params: dict = field(compare=False)
    fn: Callable[[tuple], np.ndarray] = field(compare=False, repr=False)
    radial: bool = False

    def __call__(self, xi) -> np.ndarray:
        """Evaluate at a tuple of coordinate arrays (one per dimension)."""
        return np.asarray(self.fn(tuple(xi)), dtype=complex)

    def radial_profile(self, rho) -> np.ndarray:
        if not self.radial:
            raise ValueError(f"{self.kind} symbol is not radial")
        rho = np.asarray(rho, dtype=float)
        return self((rho,))

    def on_grid(self, n: int, d: int, xi0: float = XI0) -> np.ndarray:
        """Samples at integer frequencies n_i in [-n/2, n/2), scaled so |n| = xi0 is the unit sphere."""
        ax = _signed(n) / xi0
        return self(np.meshgrid(*([ax] * d), indexing="ij"))

    def dilate(self, t: float) -> "MultiplierSymbol":
        """xi -> m(t xi)."""
        return MultiplierSymbol(
            f"{self.kind}@{t!r}", {**self.params, "dilation": t}, lambda xi: self.fn(tuple(c * t for c in xi)), self.radial
        )

    def on_angular(self, n: int, xi0: float = XI0) -> "MultiplierSymbol":
        """The same grid operator viewed as a function of angular grid frequency omega."""
        s = n / (2 * np.pi * xi0)
        return MultiplierSymbol(
            f"{self.kind}~grid", {**self.params, "grid_n": n, "xi0": xi0}, lambda w: self.fn(tuple(c * s for c in w)), self.radial
        )


def oscillatory(a: float, b: float) -> MultiplierSymbol:
    if a <= 0 or a == 1 or b < 0:
        raise ValueError("need a > 0, a != 1, b >= 0")

    def fn(xi):
        r = _abs_xi(xi)
        out = np.zeros(r.shape, dtype=complex)
        nz = r > 0.5
        out[nz] = np.exp(1j * r[nz] ** a) * r[nz] ** (-b) * chi_infinity(r[nz])
        return out

    return MultiplierSymbol("oscillatory", {"a": a, "b": b}, fn, radial=True)


def radial_bump(delta: float, profile: Callable = chi_bump) -> MultiplierSymbol:
    """h_delta(xi) = chi((1 - |xi|) / delta)."""
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    return MultiplierSymbol(
        "radial_bump", {"delta": delta}, lambda xi: profile((1.0 - _abs_xi(xi)) / delta).astype(complex), radial=True
    )


def multiscale_bump(delta: float, coeffs: dict[int, complex], profile: Callable = chi_bump) -> MultiplierSymbol:
    """sum_k a_k h_delta(2^k |xi|) over the finitely many given k."""
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    items = sorted(coeffs.items())

    def fn(xi):
        r = _abs_xi(xi)
        out = np.zeros(r.shape, dtype=complex)
        for k, ak in items:
            out += ak * profile((1.0 - r * 2.0**k) / delta)
        return out

    return MultiplierSymbol("multiscale_bump", {"delta": delta, "coeffs": dict(items)}, fn, radial=True)


def _nec_term_first(a: float, b: float, k: int):
    def term(xi):
        r = _abs_xi(xi)
        return 2.0 ** (-k * b) * phi_circ(r * 2.0**-k) * np.exp(-1j * 2.0 ** (-k * (1 - a)) * np.asarray(xi[0], dtype=float))

    return term


def _nec_term_second(a: float, b: float, k: int):
    def term(xi):
        r = _abs_xi(xi)
        return 2.0 ** (-k * b) * phi_circ(r * 2.0**-k) * np.exp(1j * 2.0 ** (-k * (2 - a)) * r**2 / 2)

    return term


def necessity_pair(a: float, b: float, n1: Iterable[int], n2: Iterable[int], min_sep: float | None = None) -> MultiplierSymbol:
    """m1 + m2: translated bumps on the index set n1 and chirped bumps on n2.

    ``min_sep`` defaults to the separation 1 + 10/|1-a|; pass a smaller value to
    fit the construction on a finite grid.
    """
    if a <= 0 or a == 1:
        raise ValueError("need a > 0, a != 1")
    n1, n2 = sorted(set(n1)), sorted(set(n2))
    if set(n1) & set(n2):
        raise ValueError("index sets must be disjoint")
    sep = 1 + 10 / abs(1 - a) if min_sep is None else min_sep
    allk = sorted(n1 + n2)
    if any(k < sep for k in allk) and min_sep is None:
        raise ValueError("indices below the separation threshold")
    if any(y - x <= sep for x, y in zip(allk, allk[1:])):
        raise ValueError(f"indices must be separated by more than {sep}")
    terms = [_nec_term_first(a, b, k) for k in n1] + [_nec_term_second(a, b, k) for k in n2]

    def fn(xi):
        out = np.zeros(np.shape(xi[0]), dtype=complex)
        for t in terms:
            out += t(xi)
        return out

    params = {"a": a, "b": b, "N1": tuple(n1), "N2": tuple(n2), "min_sep": sep}
    return MultiplierSymbol("necessity_pair", params, fn, radial=False)


def miyachi_sample(a: float, b: float, k_max: int = 12) -> MultiplierSymbol:
    """A member of the Miyachi class: translated bumps at every scale 0..k_max."""
    terms = [_nec_term_first(a, b, k) for k in range(k_max + 1)]

    def fn(xi):
        out = np.zeros(np.shape(xi[0]), dtype=complex)
        for t in terms:
            out += t(xi)
        return out

    return MultiplierSymbol("miyachi_sample", {"a": a, "b": b, "k_max": k_max}, fn, radial=False)


def custom(fn: Callable, radial: bool = False, **params) -> MultiplierSymbol:
    return MultiplierSymbol("custom", params, fn, radial)


def constant(c: complex = 1.0) -> MultiplierSymbol:
    return custom(lambda xi: np.full(np.shape(xi[0]), c, dtype=complex), radial=True, value=c)


def _parse_value(v: str):
    if ":" in v:
        out = {}
        for item in v.split(","):
            k, a = item.split(":")
            out[int(k)] = complex(a) if "j" in a else float(a)
        return out
    if "," in v or v == "":
        return [int(x) for x in v.split(",") if x]
    return float(v)


def parse_symbol(text: str) -> MultiplierSymbol:
    """Build a symbol from ``kind key=value ...``.

    Lists are comma separated (``N1=2,4,6``) and coefficient maps use
    ``k:a`` items (``coeffs=0:1,1:0.5``).
    """
    parts = text.split()
    if not parts:
        raise ValueError("empty symbol description")
    kind, kv = parts[0], {}
    for p in parts[1:]:
        k, _, v = p.partition("=")
        kv[k] = _parse_value(v)
    if kind == "oscillatory":
        return oscillatory(kv["a"], kv["b"])
    if kind == "radial_bump":
        return radial_bump(kv["delta"])
    if kind == "multiscale_bump":
        return multiscale_bump(kv["delta"], kv.get("coeffs", {0: 1.0}))
    if kind == "necessity_pair":
        n2 = kv.get("N2", [])
        return necessity_pair(kv["a"], kv["b"], kv.get("N1", []), [n2] if isinstance(n2, float) else n2, kv.get("min_sep"))
    if kind == "miyachi_sample":
        return miyachi_sample(kv["a"], kv["b"], int(kv.get("k_max", 12)))
    if kind == "constant":
        return constant(kv.get("value", 1.0))
    raise ValueError(f"unknown symbol kind {kind!r}")


# -- Littlewood-Paley projections -----------------------------------------------------


def lp_projection(f, k: int, which: str = "L", pair: CalderonPair = PAIR) -> np.ndarray:
    """L_k (which='L', multiplier phi_k) or P_k (which='P', multiplier eta_k)."""
    f = np.asarray(f, dtype=complex)
    n, d = f.shape[0], f.ndim
    w = angular_abs(n, d) * 2.0**-k
    mult = pair.phi(w) if which == "L" else pair.eta(w) if which == "P" else None
    if mult is None:
        raise ValueError("which is 'L' or 'P'")
    if not mult.any():
        warnings.warn(f"level {k} has no grid frequencies; returning zero", stacklevel=2)
        return np.zeros_like(f)
    return np.fft.ifftn(np.fft.fftn(f) * mult)


def reproduce(f, pair: CalderonPair = PAIR) -> np.ndarray:
    """sum_k P_k^2 L_k f over every populated level."""
    f = np.asarray(f, dtype=complex)
    n, d = f.shape[0], f.ndim
    w = angular_abs(n, d)
    total = np.zeros(f.shape)
    for k in frequency_levels(n, d, pair):
        wk = w * 2.0**-k
        total += pair.eta(wk) ** 2 * pair.phi(wk)
    return np.fft.ifftn(np.fft.fftn(f) * total)


# -- kernel pieces and localized operators --------------------------------------------


def _grid_symbol(m: MultiplierSymbol | np.ndarray, n: int, d: int, xi0: float) -> np.ndarray:
    if isinstance(m, MultiplierSymbol):
        return m.on_grid(n, d, xi0)
    m = np.asarray(m, dtype=complex)
    if m.shape != (n,) * d:
        raise ValueError("symbol samples do not match the grid")
    return m


def band_kernel(m, n: int, d: int, k: int, pair: CalderonPair = PAIR, xi0: float = XI0) -> np.ndarray:
    """K_k = inverse DFT of phi_k m on the grid."""
    return np.fft.ifftn(pair.phi(angular_abs(n, d) * 2.0**-k) * _grid_symbol(m, n, d, xi0))


def top_spatial_level(n: int, d: int) -> int:
    """Smallest j with Phi0(2^-j x) = 1 on the whole periodic grid."""
    rmax = float(grid_radius(n, d).max())
    return max(0, math.ceil(math.log2(4 * rmax)))


def kernel_pieces(
    m, n: int, d: int, k: int, j_max: int, pair: CalderonPair = PAIR, cutoffs: SpatialCutoffs = CUTOFFS, xi0: float = XI0
) -> list[np.ndarray]:
    """[K_k^(-k), ..., K_k^(j_max)]; the last piece absorbs everything beyond, so they sum to K_k."""
    K = band_kernel(m, n, d, k, pair, xi0)
    r = grid_radius(n, d)
    j0 = -k
    if j_max <= j0:
        return [K]
    pieces = [K * cutoffs.Phi0(r * 2.0**k)]
    pieces += [K * cutoffs.Psi(j, r) for j in range(j0 + 1, j_max)]
    pieces.append(K * (1.0 - cutoffs.Phi0(r * 2.0 ** -(j_max - 1))))
    return pieces


def piece_kernel(m, n: int, d: int, k: int, j: int, pair=PAIR, cutoffs=CUTOFFS, xi0: float = XI0, K=None) -> np.ndarray:
    """K_k^(j): Phi0(2^k x) window when j = -k, Psi_j window when j > -k."""
    if j < -k:
        raise ValueError("pieces start at j = -k")
    K = band_kernel(m, n, d, k, pair, xi0) if K is None else K
    r = grid_radius(n, d)
    return K * (cutoffs.Phi0(r * 2.0**k) if j == -k else cutoffs.Psi(j, r))


def _conv_fft(f: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(np.fft.fftn(f) * np.fft.fftn(kernel))


def apply_T_j(
    f, m, j: int, F_set: Iterable[int], pair: CalderonPair = PAIR, cutoffs: SpatialCutoffs = CUTOFFS, xi0: float = XI0
) -> np.ndarray:
    """sum over k in F_set with k > -j of T_k^(j) P_k^2 f."""
    f = np.asarray(f, dtype=complex)
    n, d = f.shape[0], f.ndim
    msym = _grid_symbol(m, n, d, xi0)
    fh = np.fft.fftn(f)
    w = angular_abs(n, d)
    r = grid_radius(n, d)
    out_h = np.zeros(f.shape, dtype=complex)
    for k in sorted(set(F_set)):
        if k <= -j:
            continue
        wk = w * 2.0**-k
        phik = pair.phi(wk)
        if not phik.any():
            continue
        kern = np.fft.ifftn(phik * msym) * cutoffs.Psi(j, r)
        out_h += np.fft.fftn(kern) * pair.eta(wk) ** 2 * fh
    return np.fft.ifftn(out_h)


def apply_truncated(
    f,
    m,
    N1: int,
    N2: int,
    F_set: Iterable[int],
    include_diagonal: bool = False,
    pair: CalderonPair = PAIR,
    cutoffs: SpatialCutoffs = CUTOFFS,
    xi0: float = XI0,
) -> np.ndarray:
    """sum_{j=N1}^{N2} T_j f, optionally adding the j = -k pieces that T_j leaves out.

    The spatial windows of all j sharing a band k are summed first, so each k
    costs one transform pair.
    """
    if N1 > N2:
        raise ValueError("need N1 <= N2")
    f = np.asarray(f, dtype=complex)
    n, d = f.shape[0], f.ndim
    msym = _grid_symbol(m, n, d, xi0)
    fh = np.fft.fftn(f)
    w = angular_abs(n, d)
    r = grid_radius(n, d)
    out_h = np.zeros(f.shape, dtype=complex)
    for k in sorted(set(F_set)):
        wk = w * 2.0**-k
        phik = pair.phi(wk)
        if not phik.any():
            continue
        window = np.zeros(r.shape)
        for j in range(max(N1, -k + 1), N2 + 1):
            window += cutoffs.Psi(j, r)
        if include_diagonal and N1 <= -k <= N2:
            window += cutoffs.Phi0(r * 2.0**k)
        if not window.any():
            continue
        kern = np.fft.ifftn(phik * msym) * window
        out_h += np.fft.fftn(kern) * pair.eta(wk) ** 2 * fh
    return np.fft.ifftn(out_h)


# -- direct oracles -------------------------------------------------------------------


def direct_convolution(f, kernel) -> np.ndarray:
    """Periodic sum_y K(x - y) f(y), computed pointwise."""
    f = np.asarray(f, dtype=complex)
    kernel = np.asarray(kernel, dtype=complex)
    n, d = f.shape[0], f.ndim
    if n**d > 4096:
        raise ValueError("direct convolution is an oracle for small grids only")
    out = np.zeros(f.shape, dtype=complex)
    idx = np.indices(f.shape).reshape(d, -1).T
    ff = f.reshape(-1)
    for x in idx:
        shifted = tuple((x[a] - idx[:, a]) % n for a in range(d))
        out[tuple(x)] = np.dot(kernel[shifted], ff)
    return out


def direct_inverse_dft(samples) -> np.ndarray:
    """Inverse DFT by the defining sum (small grids only)."""
    samples = np.asarray(samples, dtype=complex)
    n, d = samples.shape[0], samples.ndim
    mat = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / n
    out = samples
    for ax in range(d):
        out = np.moveaxis(np.tensordot(mat, out, axes=([1], [ax])), 0, ax)
    return out


# -- rescaled kernels -----------------------------------------------------------------


def rescaled_kernel(
    m: MultiplierSymbol, R: float, grid: PhysicalGrid, psi_profile: Callable = necessity_window, tol: float = 1e-8
) -> np.ndarray:
    """kappa(x) = Psi(x) R^d K(R x), with K the kernel of m, sampled on ``grid``.

    R^d K(R x) is the kernel of m(./R), so no interpolation of K is needed.
    Rejects R when m(./R) is not negligible near the grid's Nyquist frequency.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    w = grid.omega()
    samples = m(tuple(c / R for c in w))
    peak = float(np.abs(samples).max(initial=0.0))
    if peak > 0:
        edge = grid.omega_abs() >= 0.9 * grid.nyquist
        if float(np.abs(samples[edge]).max(initial=0.0)) > tol * peak:
            raise ValueError(f"R = {R} too large for the grid resolution")
    return grid.kernel(samples) * psi_profile(grid.radius())
