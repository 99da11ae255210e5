"""Atomic decomposition of a function supported in a dyadic cube S0.

Subatoms e_R are single-level martingale differences restricted to a dyadic
R strictly inside S0.  Each contributing R is assigned the unique generation
mu at which R is half-covered by {G f > 2^mu} but not by {G f > 2^(mu+1)},
and is grouped under the Whitney cube of the enlarged level set that
contains it.  Fixed-scale bookkeeping is indexed by the grid level s = L(R);
the conversion to the frequency index k of the continuous theory is
k = -s (see `frequency_index`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.ndimage import distance_transform_edt

from .dyadic_core import (
    DyadicCube,
    block_expand,
    block_reduce,
    cond_expect,
    hl_maximal,
    lp_norm,
    mart_diff,
    martingale_levels,
    peetre_square_fn,
    root_cube,
    top_level,
)
from .reports import LemmaRecord, check

NO_MU = np.iinfo(np.int64).min


def frequency_index(level: int) -> int:
    """Frequency index k of cubes of side 2^level (side 2^-k in the continuous picture)."""
    return -level


def maximal_threshold(dim: int) -> float:
    return 0.5 * (10 * np.sqrt(dim)) ** (-dim)


def c_dim(dim: int) -> float:
    return 5.0**dim * 2 * (10 * np.sqrt(dim)) ** dim


# -- level sets ---------------------------------------------------------------


@dataclass
class LevelSets:
    mu_lo: int
    mu_hi: int
    omega: dict[int, np.ndarray]
    omega_tilde: dict[int, np.ndarray]

    @property
    def mus(self) -> range:
        return range(self.mu_lo, self.mu_hi + 1)


def level_sets(gf, s0: DyadicCube) -> LevelSets:
    g = np.asarray(gf, dtype=float)
    mask = s0.indicator(g.shape[0])
    g = g * mask
    pos = g[g > 0]
    if pos.size == 0:
        return LevelSets(0, -1, {}, {})
    mu_lo = int(np.floor(np.log2(pos.min()))) - 1
    mu_hi = int(np.ceil(np.log2(pos.max())))
    thr = maximal_threshold(g.ndim)
    omega, tilde = {}, {}
    for mu in range(mu_lo, mu_hi + 1):
        om = g > 2.0**mu
        omega[mu] = om
        tilde[mu] = hl_maximal(om.astype(float)) > thr if om.any() else np.zeros_like(om)
    return LevelSets(mu_lo, mu_hi, omega, tilde)


# -- Whitney selection --------------------------------------------------------


@dataclass
class WhitneyFamily:
    cubes: list[DyadicCube]
    dist: list[float]
    forced: list[bool]  # admitted at unit side despite the lower distance bound
    c_lo: float
    c_hi: float

    @property
    def upper_ratios(self) -> list[float]:
        return [d / q.diam for d, q in zip(self.dist, self.cubes)]

    def upper_violations(self) -> list[tuple[DyadicCube, float]]:
        return [(q, r) for q, r in zip(self.cubes, self.upper_ratios) if np.isfinite(r) and r > self.c_hi]

    def labels(self, n: int) -> np.ndarray:
        lab = -np.ones((n,) * (self.cubes[0].dim if self.cubes else 1), dtype=np.int64)
        for i, q in enumerate(self.cubes):
            lab[q.slices] = i
        return lab


def distance_to_complement(open_set: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the nearest grid point outside the set."""
    if open_set.all():
        return np.full(open_set.shape, np.inf)
    return distance_transform_edt(open_set)


def whitney(open_set, c_lo: float, c_hi: float, ambient: DyadicCube) -> WhitneyFamily:
    """Maximal dyadic cubes W inside the set with dist(W, complement) >= c_lo diam(W).

    Distances are Euclidean and non-periodic; the complement consists of grid
    points outside the set.  Unit cubes that miss the lower bound are still
    admitted (flagged as forced) so that the family always tiles the set.
    """
    if c_lo < 1:
        raise ValueError("c_lo must be >= 1")
    om = np.asarray(open_set, dtype=bool)
    n, d = om.shape[0], om.ndim
    fam = WhitneyFamily([], [], [], c_lo, c_hi)
    if not om.any():
        return fam
    dt = distance_to_complement(om)
    sub = ambient.slices
    om_a, dt_a = om[sub], dt[sub]
    covered = np.zeros(om_a.shape, dtype=bool)
    for j in range(ambient.log_side, -1, -1):
        inside = block_reduce(om_a, j, np.all)
        dist = block_reduce(dt_a, j, np.min)
        diam = np.sqrt(d) * (1 << j)
        free = ~block_reduce(covered, j, np.any)
        ok = inside & free & (dist >= c_lo * diam)
        if j == 0:
            forced = inside & free & ~ok
        for idx in zip(*np.nonzero(ok | (forced if j == 0 else False))):
            corner = tuple(a + (1 << j) * int(i) for a, i in zip(ambient.corner, idx))
            fam.cubes.append(DyadicCube(corner, j))
            fam.dist.append(float(dist[idx]))
            fam.forced.append(bool(j == 0 and not ok[idx]))
        covered |= block_expand(ok, j)
    return fam


# -- decomposition ------------------------------------------------------------


def subatom(f, r: DyadicCube) -> np.ndarray:
    """e_R: the level-L(R) martingale difference of f, restricted to R."""
    f = np.asarray(f, dtype=complex)
    if r.log_side < 1:
        return np.zeros(f.shape, dtype=complex)
    return mart_diff(f, r.log_side) * r.indicator(f.shape[0])


@dataclass
class AtomicDecomposition:
    f: np.ndarray
    s0: DyadicCube
    p: float
    gf: np.ndarray
    levels: LevelSets
    diffs: dict[int, np.ndarray]  # level -> D_level f on the grid
    mu_of: dict[int, np.ndarray]  # level -> generation per block (NO_MU if none)
    w_of: dict[int, np.ndarray]  # level -> index into whitney_cubes[mu] per block (-1 orphan)
    whitney_fams: dict[int, WhitneyFamily]
    families: dict[int, list[DyadicCube]]  # mu -> W_mu
    energy_k: dict[tuple[int, int, int], float]  # (mu, w index, level) -> sum ||e_R||_2^2
    orphans: list[tuple[DyadicCube, int]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.f.shape[0]

    @property
    def dim(self) -> int:
        return self.f.ndim

    @cached_property
    def top(self) -> np.ndarray:
        return cond_expect(self.f, top_level(self.s0))

    @property
    def subatom_levels(self) -> range:
        return martingale_levels(self.s0)

    # classification and families
    @cached_property
    def classification(self) -> dict[DyadicCube, int]:
        out = {}
        for j, mu in self.mu_of.items():
            for idx in zip(*np.nonzero(mu != NO_MU)):
                out[DyadicCube(tuple((1 << j) * int(i) for i in idx), j)] = int(mu[idx])
        return out

    def subatom(self, r: DyadicCube) -> np.ndarray:
        return self.diffs[r.log_side] * r.indicator(self.n)

    @cached_property
    def atom_keys(self) -> list[tuple[int, int]]:
        keys = sorted({(mu, w) for (mu, w, _) in self.energy_k})
        return keys

    def W(self, mu: int, w: int) -> DyadicCube:
        return self.families[mu][w]

    def energy(self, mu: int, w: int, level: int | None = None) -> float:
        if level is not None:
            return self.energy_k.get((mu, w, level), 0.0)
        return sum(v for (m, i, _), v in self.energy_k.items() if m == mu and i == w)

    def gamma(self, mu: int, w: int, level: int | None = None) -> float:
        return float(np.sqrt(self.energy(mu, w, level) / self.W(mu, w).volume))

    def _member_mask(self, level: int, mu: int, w: int) -> np.ndarray:
        return block_expand((self.mu_of[level] == mu) & (self.w_of[level] == w), level)

    def atom(self, mu: int, w: int, level: int | None = None) -> np.ndarray:
        """a_{W,mu}, or its fixed-scale part a^k_{W,mu} when level is given."""
        out = np.zeros(self.f.shape, dtype=complex)
        for j in self.subatom_levels if level is None else [level]:
            if j in self.diffs:
                out += self.diffs[j] * self._member_mask(j, mu, w)
        return out

    def reconstruct(self) -> np.ndarray:
        out = self.top.astype(complex).copy()
        for mu, w in self.atom_keys:
            out += self.atom(mu, w)
        for r, mu in self.orphans:
            out += self.subatom(r)
        return out

    def F(self, p: float | None = None) -> np.ndarray:
        p = self.p if p is None else p
        acc = np.zeros(self.f.shape)
        for mu, w in self.atom_keys:
            acc[self.W(mu, w).slices] += self.gamma(mu, w) ** p
        return acc ** (1.0 / p)

    # localized pieces
    def atoms_in(self, q: DyadicCube, mu_min: float = -np.inf) -> list[tuple[int, int]]:
        return [(mu, w) for mu, w in self.atom_keys if mu > mu_min and q.contains(self.W(mu, w))]

    def bad_pieces(self, q: DyadicCube, mu_min: float = -np.inf, level: int | None = None, n: int | None = None) -> np.ndarray:
        """b_Q, b^k_Q (level given) or b^{k,n}_Q (level and n given; L(W) = level + n)."""
        out = np.zeros(self.f.shape, dtype=complex)
        for mu, w in self.atoms_in(q, mu_min):
            if n is not None and (level is None or self.W(mu, w).log_side != level + n):
                continue
            out += self.atom(mu, w, level)
        return out

    def beta(self, q: DyadicCube, p: float | None = None, level: int | None = None, n: int | None = None) -> float:
        """beta_{Q,p}, beta^k_{Q,p} or beta^{k,n}_{Q,p}; no generation truncation."""
        p = self.p if p is None else p
        tot = 0.0
        for mu, w in self.atoms_in(q):
            wc = self.W(mu, w)
            if n is not None and wc.log_side != level + n:
                continue
            tot += wc.volume * self.gamma(mu, w, level) ** p
        return tot ** (1.0 / p)


def _classify(gf: np.ndarray, s0: DyadicCube, ls: LevelSets, diffs: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    out = {}
    for j, dj in diffs.items():
        energy = block_reduce(np.abs(dj) ** 2, j, np.sum)
        half = (1 << (j * gf.ndim)) / 2
        mu_arr = np.full(energy.shape, NO_MU, dtype=np.int64)
        for mu in ls.mus:
            cnt = block_reduce(ls.omega[mu], j, np.sum)
            mu_arr[cnt > half] = mu  # counts decrease in mu, so the last hit is the largest
        mu_arr[energy == 0] = NO_MU
        out[j] = mu_arr
    return out


def classify_cubes(f, s0: DyadicCube) -> dict[DyadicCube, int]:
    f = np.asarray(f, dtype=complex)
    gf = peetre_square_fn(f, s0)
    ls = level_sets(gf, s0)
    diffs = {j: mart_diff(f, j) for j in martingale_levels(s0)}
    res = {}
    for j, mu in _classify(gf, s0, ls, diffs).items():
        for idx in zip(*np.nonzero(mu != NO_MU)):
            res[DyadicCube(tuple((1 << j) * int(i) for i in idx), j)] = int(mu[idx])
    return res


def whitney_family_for(ls: LevelSets, mu: int, s0: DyadicCube) -> tuple[WhitneyFamily, list[DyadicCube]]:
    """The Whitney family of the enlarged level set and its restriction to S0."""
    n = ls.omega_tilde[mu].shape[0]
    fam = whitney(ls.omega_tilde[mu], 1.0, 4.0, root_cube(n, s0.dim))
    if any(q.contains(s0) for q in fam.cubes):
        return fam, [s0]
    return fam, [q for q in fam.cubes if s0.contains(q)]


def atomic_decomposition(f, s0: DyadicCube, p: float = 1.5) -> AtomicDecomposition:
    if not 1 < p <= 2:
        raise ValueError("p must lie in (1, 2]")
    f = np.asarray(f, dtype=complex)
    gf = peetre_square_fn(f, s0)
    ls = level_sets(gf, s0)
    diffs = {j: mart_diff(f, j) * s0.indicator(f.shape[0]) for j in martingale_levels(s0)}
    mu_of = _classify(gf, s0, ls, diffs)
    used = sorted({int(m) for arr in mu_of.values() for m in np.unique(arr) if m != NO_MU})
    fams, families, labels = {}, {}, {}
    for mu in used:
        fam, wmu = whitney_family_for(ls, mu, s0)
        fams[mu], families[mu] = fam, wmu
        lab = -np.ones(f.shape, dtype=np.int64)
        for i, q in enumerate(wmu):
            lab[q.slices] = i
        labels[mu] = (lab, np.array([q.log_side for q in wmu], dtype=np.int64))
    w_of, energy_k, orphans = {}, {}, []
    for j, mu_arr in mu_of.items():
        s = 1 << j
        energy = block_reduce(np.abs(diffs[j]) ** 2, j, np.sum)
        w_arr = -np.ones(mu_arr.shape, dtype=np.int64)
        for idx in zip(*np.nonzero(mu_arr != NO_MU)):
            mu = int(mu_arr[idx])
            lab, sides = labels[mu]
            corner = tuple(s * int(i) for i in idx)
            w = int(lab[corner])
            if w < 0 or sides[w] < j:
                orphans.append((DyadicCube(corner, j), mu))
                continue
            w_arr[idx] = w
            key = (mu, w, j)
            energy_k[key] = energy_k.get(key, 0.0) + float(energy[idx])
        w_of[j] = w_arr
    return AtomicDecomposition(f, s0, p, gf, ls, diffs, mu_of, w_of, fams, families, energy_k, orphans)


# -- lemma checks -------------------------------------------------------------


def dilate_containment(dec: AtomicDecomposition) -> list[dict]:
    """Cubes R whose clipped 10 sqrt(d) dilate escapes the enlarged level set."""
    bad = []
    fac = 10 * np.sqrt(dec.dim)
    for r, mu in dec.classification.items():
        dil = r.dilate_mask(fac, dec.n)
        miss = dil & ~dec.levels.omega_tilde[mu]
        if miss.any():
            bad.append({"R": r, "mu": mu, "missing": int(miss.sum()), "first": tuple(int(v) for v in np.argwhere(miss)[0])})
    return bad


def verify_atomic(dec: AtomicDecomposition, sq_const: float, seed: int = -1, r_exp: float | None = None) -> list[LemmaRecord]:
    """Exact inequalities of the atomic decomposition for one instance."""
    recs: list[LemmaRecord] = []
    p, d = dec.p, dec.dim
    ls = dec.levels
    fnorm = lp_norm(dec.f, p)
    # |tilde Omega| <= C_d |Omega|
    worst = 0.0
    for mu in ls.mus:
        if ls.omega[mu].any():
            worst = max(worst, ls.omega_tilde[mu].sum() / ls.omega[mu].sum())
    recs.append(check("eq_tilde_omega_size", worst, c_dim(d), seed))
    viol = dilate_containment(dec)
    recs.append(check("dilate_containment", len(viol), 0, seed, violations=viol[:5]))
    recs.append(check("whitney_orphans", len(dec.orphans), 0, seed))
    # energy per generation
    by_mu: dict[int, list[tuple[int, int]]] = {}
    for mu, w in dec.atom_keys:
        by_mu.setdefault(mu, []).append((mu, w))
    m33 = m34 = 0.0
    for mu, keys in by_mu.items():
        tilde = ls.omega_tilde[mu].sum()
        e = sum(dec.energy(*k) for k in keys)
        m33 = max(m33, e / (2.0 ** (2 * mu + 3) * tilde))
        lhs = sum(dec.W(*k).volume * dec.gamma(*k) ** p for k in keys) ** (1 / p)
        m34 = max(m34, lhs / (2.0 ** (mu + 1.5) * tilde ** (1 / p)))
    recs.append(check("energy_per_generation", m33, 1.0, seed))
    recs.append(check("coefficient_lp_per_generation", m34, 1.0, seed))
    cst = max(sq_const, lp_norm(dec.gf, p) / fnorm if fnorm else 0.0)
    recs.append(check("F_p_norm", lp_norm(dec.F(), p), 2**1.5 * (2 * c_dim(d)) ** (1 / p) * cst * fnorm, seed))
    # atoms: L^2 equality and L^p bounds, whole and fixed scale
    worst2, worstp, worstk = 0.0, 0.0, 0.0
    for mu, w in dec.atom_keys:
        wc = dec.W(mu, w)
        a = dec.atom(mu, w)
        g = dec.gamma(mu, w)
        worst2 = max(worst2, abs(lp_norm(a, 2) - wc.volume**0.5 * g) / max(wc.volume**0.5 * g, 1e-300))
        worstp = max(worstp, lp_norm(a, p) / (wc.volume ** (1 / p) * g))
        for j in dec.subatom_levels:
            gk = dec.gamma(mu, w, j)
            if gk > 0:
                worstk = max(worstk, lp_norm(dec.atom(mu, w, j), p) / (wc.volume ** (1 / p) * gk))
    recs.append(check("atom_l2_identity", worst2, 1e-10, seed))
    recs.append(check("atom_lp_bound", worstp, 1.0, seed))
    recs.append(check("fixed_scale_atom_lp_bound", worstk, 1.0, seed))
    # localized pieces for every dyadic Q inside S0 down to a few levels
    r = r_exp if r_exp is not None else (p + 2) / 2
    w36 = w37 = w38 = w39 = 0.0
    for q in _sample_cubes(dec):
        beta = dec.beta(q)
        bks = []
        for j in dec.subatom_levels:
            bk = dec.beta(q, level=j)
            bks.append(bk)
            nb = lp_norm(dec.bad_pieces(q, level=j), p)
            if nb > 0:
                w36 = max(w36, nb / bk)
        if beta > 0:
            w37 = max(w37, float(np.sqrt(np.sum(np.square(bks)))) / beta)
        for nn in range(0, dec.s0.log_side):
            bkn = []
            for j in dec.subatom_levels:
                v = dec.beta(q, level=j, n=nn)
                bkn.append(v)
                piece = dec.bad_pieces(q, level=j, n=nn)
                nr = lp_norm(piece, r)
                if nr > 0:
                    wvol = 2.0 ** ((j + nn) * d)
                    w38 = max(w38, nr / (wvol ** (-(1 / p - 1 / r)) * v))
            if beta > 0:
                w39 = max(w39, float(np.sum(np.power(bkn, p)) ** (1 / p)) / beta)
    recs.append(check("fixed_scale_bad_lp", w36, 1.0, seed))
    recs.append(check("beta_square_sum", w37, 1.0, seed))
    recs.append(check("fixed_scale_pair_lr_gain", w38, 1.0, seed))
    recs.append(check("beta_coupled_lp_sum", w39, 1.0, seed))
    return recs


def _sample_cubes(dec: AtomicDecomposition, depth: int = 2) -> list[DyadicCube]:
    out = [dec.s0]
    for lev in range(dec.s0.log_side - 1, max(dec.s0.log_side - depth, 0) - 1, -1):
        out.extend(dec.s0.subcubes(lev))
    return out
