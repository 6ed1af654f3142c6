"""The anisotropic space: tensor coefficients, products, evaluation, measures.

An :class:`AnisoVector` holds the double-Haar coefficients of a distribution
on the product space: a function-type analysis (exponent ``+s``) in the
expanding coordinate and a distribution-type analysis (exponent ``-t``) in
the contracting one.  The coefficient matrix is dense over the canonical atom
enumerations of the two grids; the norm is the plain l1 sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolationError, InsufficientResolutionError
from .grid_haar import (
    BesovVector,
    ExponentConfig,
    GoodGrid,
    SpaceTag,
    decompose_axis,
    reconstruct_axis,
)
from .shift_core import ProductField, Side, StepField

_PRUNE = 1e-15


class AnisoVector:
    """Coefficient matrix over plus-atom x minus-atom pairs."""

    def __init__(
        self,
        grid_plus: GoodGrid,
        grid_minus: GoodGrid,
        s: float,
        t: float,
        coeffs: np.ndarray,
        depth_plus: int,
        depth_minus: int,
    ):
        if grid_plus.side is not Side.PLUS or grid_minus.side is not Side.MINUS:
            raise ValueError("grids must be a (plus, minus) pair")
        self.grid_plus = grid_plus
        self.grid_minus = grid_minus
        self.s = float(s)
        self.t = float(t)
        c = np.ascontiguousarray(coeffs, dtype=float)
        c = np.where(np.abs(c) < _PRUNE, 0.0, c)
        c.flags.writeable = False
        self.coeffs = c
        self.depth_plus = depth_plus
        self.depth_minus = depth_minus
        n = grid_plus.alphabet.size
        if c.shape != (n**depth_plus, n**depth_minus):
            raise ValueError("coefficient shape does not match the truncation depths")

    def norm(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def items(self):
        rows, cols = np.nonzero(self.coeffs)
        for r, c in zip(rows, cols):
            yield (
                self.grid_plus.key_of_slot(int(r)),
                self.grid_minus.key_of_slot(int(c)),
            ), float(self.coeffs[r, c])

    def lift(self, depth_plus: int, depth_minus: int) -> "AnisoVector":
        if depth_plus < self.depth_plus or depth_minus < self.depth_minus:
            raise ValueError("lift only refines")
        n = self.grid_plus.alphabet.size
        out = np.zeros((n**depth_plus, n**depth_minus))
        out[: self.coeffs.shape[0], : self.coeffs.shape[1]] = self.coeffs
        return AnisoVector(self.grid_plus, self.grid_minus, self.s, self.t, out, depth_plus, depth_minus)

    def _aligned(self, other: "AnisoVector"):
        if (self.grid_plus, self.grid_minus) != (other.grid_plus, other.grid_minus):
            raise ValueError("vectors live over different grids")
        if (self.s, self.t) != (other.s, other.t):
            raise ValueError("vectors carry different exponents")
        dp = max(self.depth_plus, other.depth_plus)
        dm = max(self.depth_minus, other.depth_minus)
        return self.lift(dp, dm), other.lift(dp, dm)

    def __add__(self, other: "AnisoVector") -> "AnisoVector":
        a, b = self._aligned(other)
        return AnisoVector(a.grid_plus, a.grid_minus, a.s, a.t, a.coeffs + b.coeffs, a.depth_plus, a.depth_minus)

    def __sub__(self, other: "AnisoVector") -> "AnisoVector":
        a, b = self._aligned(other)
        return AnisoVector(a.grid_plus, a.grid_minus, a.s, a.t, a.coeffs - b.coeffs, a.depth_plus, a.depth_minus)

    def __mul__(self, scalar: float) -> "AnisoVector":
        return AnisoVector(
            self.grid_plus, self.grid_minus, self.s, self.t,
            self.coeffs * float(scalar), self.depth_plus, self.depth_minus,
        )

    __rmul__ = __mul__

    def to_field(self) -> ProductField:
        vals = reconstruct_axis(self.coeffs, self.grid_plus, self.s, axis=0)
        vals = reconstruct_axis(vals, self.grid_minus, -self.t, axis=1)
        return ProductField(self.depth_plus, self.depth_minus, vals, self.grid_plus.alphabet)


def tensor(a: BesovVector, b: BesovVector) -> AnisoVector:
    """Elementary tensor; the anisotropic norm is exactly multiplicative."""
    if a.tag is not SpaceTag.S_11 or b.tag is not SpaceTag.NEG_T_11:
        raise ValueError("tensor takes a (S_11 plus, NEG_T_11 minus) pair")
    return AnisoVector(
        a.grid, b.grid, a.exponent, b.exponent,
        np.outer(a.coeffs, b.coeffs), a.depth, b.depth,
    )


def aniso_decompose(
    field: ProductField, s: float, t: float, grid_plus: GoodGrid, grid_minus: GoodGrid
) -> AnisoVector:
    """Double Haar analysis: plus axis with exponent +s, minus axis with -t."""
    coeffs = decompose_axis(field.values, grid_plus, s, axis=0)
    coeffs = decompose_axis(coeffs, grid_minus, -t, axis=1)
    return AnisoVector(grid_plus, grid_minus, s, t, coeffs, field.depth_plus, field.depth_minus)


def aniso_reconstruct(v: AnisoVector) -> ProductField:
    return v.to_field()


def unit_mass_vector(grid_plus: GoodGrid, grid_minus: GoodGrid, s: float, t: float) -> AnisoVector:
    """The reference product measure: analysis of the constant 1."""
    field = ProductField.constant(0, 0, 1.0, grid_plus.alphabet)
    return aniso_decompose(field, s, t, grid_plus, grid_minus)


# ---------------------------------------------------------------------------
# Admissible observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    """Step observable together with its computed admissibility constant.

    ``k_const`` dominates both the slice-norm condition (``L^{r*}`` norms of
    the x-sections) and the y-direction Hoelder condition with exponent ``t``
    in the grid metric; for step fields both are finite maxima and are
    computed exactly, never asserted by the caller.
    """

    field: ProductField
    k_const: float
    r_star: float
    t: float


def _pairwise_common_mass(grid: GoodGrid, depth: int) -> np.ndarray:
    """Matrix of grid distances between all depth-``depth`` cylinder pairs."""
    n = grid.alphabet.size
    m = n**depth
    idx = np.arange(m, dtype=np.int64)
    dist = np.ones((m, m))
    common = np.zeros((m, m), dtype=np.int64)
    for j in range(1, depth + 1):
        pj = idx // n ** (depth - j)
        eq = pj[:, None] == pj[None, :]
        common += eq
    for j in range(1, depth + 1):
        mask = common == j
        if not mask.any():
            continue
        pj = idx // n ** (depth - j)
        rows = np.nonzero(mask)
        dist[rows] = grid.level_masses[j][pj[rows[0]]]
    dist[common >= depth] = 0.0  # same deepest cylinder: below resolution
    return dist


def estimate_K(gamma: ProductField, cfg: ExponentConfig, grid_plus: GoodGrid, grid_minus: GoodGrid) -> Observable:
    """Certify a step observable: exact slice norms and Hoelder quotients."""
    r_star = cfg.r_star
    vals = gamma.values
    mp = grid_plus.level_masses[gamma.depth_plus]
    slice_norms = (np.abs(vals.T) ** r_star @ mp) ** (1.0 / r_star)  # one per y-cylinder
    k1 = float(slice_norms.max())
    k2 = 0.0
    if gamma.depth_minus > 0:
        dist = _pairwise_common_mass(grid_minus, gamma.depth_minus)
        m = vals.shape[1]
        for i in range(m):
            diff = np.abs(vals[:, i : i + 1] - vals) ** r_star  # (n^dp, m)
            norms = (mp @ diff) ** (1.0 / r_star)
            with np.errstate(divide="ignore", invalid="ignore"):
                quot = np.where(dist[i] > 0, norms / dist[i] ** cfg.t, 0.0)
            k2 = max(k2, float(quot.max()))
    return Observable(gamma, max(k1, k2), r_star, cfg.t)


def evaluate(v: AnisoVector, gamma: Observable | ProductField) -> float:
    """Exact pairing of an anisotropic vector with a step observable."""
    g = gamma.field if isinstance(gamma, Observable) else gamma
    dp = max(v.depth_plus, g.depth_plus)
    dm = max(v.depth_minus, g.depth_minus)
    if dp > v.grid_plus.depth or dm > v.grid_minus.depth:
        raise InsufficientResolutionError("observable is finer than the grids")
    recon = v.lift(dp, dm).to_field()
    weights = np.outer(v.grid_plus.level_masses[dp], v.grid_minus.level_masses[dm])
    return float((recon.values * g.lift(dp, dm).values * weights).sum())


# ---------------------------------------------------------------------------
# Multipliers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiplierField:
    """Bounded step multiplier with certified two-sided Hoelder constants.

    ``holder_constant`` bounds both displayed conditions with exponent ``2t``
    in the grid metrics, computed as exact maxima over cylinder pairs at the
    field's resolution.
    """

    field: ProductField
    holder_constant: float
    sup_norm: float
    two_t: float


def certify_multiplier(rho: ProductField, cfg: ExponentConfig, grid_plus: GoodGrid, grid_minus: GoodGrid) -> MultiplierField:
    two_t = 2.0 * cfg.t
    vals = rho.values
    c = 0.0
    if rho.depth_plus > 0:
        dist = _pairwise_common_mass(grid_plus, rho.depth_plus)
        for i in range(vals.shape[0]):
            diff = np.abs(vals[i : i + 1, :] - vals).max(axis=1)  # sup over y per x-pair
            with np.errstate(divide="ignore", invalid="ignore"):
                quot = np.where(dist[i] > 0, diff / dist[i] ** two_t, 0.0)
            c = max(c, float(quot.max()))
    if rho.depth_minus > 0:
        dist = _pairwise_common_mass(grid_minus, rho.depth_minus)
        for j in range(vals.shape[1]):
            diff = np.abs(vals[:, j : j + 1] - vals).max(axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                quot = np.where(dist[j] > 0, diff / dist[j] ** two_t, 0.0)
            c = max(c, float(quot.max()))
    return MultiplierField(rho, c, float(np.abs(vals).max()), two_t)


def multiply(rho: MultiplierField, v: AnisoVector) -> AnisoVector:
    """Exact step-level multiplication followed by re-analysis."""
    if not v.s < v.t:
        raise ConstraintViolationError("multiplier action needs s < t")
    g = rho.field
    dp = max(v.depth_plus, g.depth_plus)
    dm = max(v.depth_minus, g.depth_minus)
    if dp > v.grid_plus.depth or dm > v.grid_minus.depth:
        raise InsufficientResolutionError("multiplier is finer than the grids")
    prod = v.lift(dp, dm).to_field() * g.lift(dp, dm)
    return aniso_decompose(prod, v.s, v.t, v.grid_plus, v.grid_minus)


def marginal_plus(v: AnisoVector) -> BesovVector:
    """Push-forward density along the expanding projection.

    Every minus atom except the root integrates to zero, so only the first
    coefficient column survives; the result lives in the plus function space
    and its norm never exceeds the anisotropic norm.
    """
    return BesovVector(v.grid_plus, SpaceTag.S_11, v.s, v.coeffs[:, 0].copy(), v.depth_plus)


# ---------------------------------------------------------------------------
# Measure constructions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddedMeasure:
    """Product-type measure in the anisotropic space, with its norm report."""

    vector: AnisoVector
    integral_of_slice_norms: float
    norm_ratio: float  # aniso norm / integral, the reported constant


def product_measure_embed(
    rho: ProductField,
    mu,
    s: float,
    t: float,
    grid_plus: GoodGrid,
    grid_minus: GoodGrid,
) -> EmbeddedMeasure:
    """Embed ``rho d(m_+ x mu)`` for an arbitrary stable-side mass table.

    ``mu`` is either a single array of depth-``d`` cylinder masses or a full
    level list; level lists are checked for child additivity.  The measure is
    admitted through its cylinder projection, which is exactly what every
    pairing at resolution sees.
    """
    n = grid_minus.alphabet.size
    if isinstance(mu, (list, tuple)):
        levels = [np.asarray(lv, dtype=float) for lv in mu]
        for k in range(len(levels) - 1):
            agg = levels[k + 1].reshape(-1, n).sum(axis=1)
            if not np.allclose(agg, levels[k], atol=1e-12):
                raise ConstraintViolationError("mu table is not additive over children")
        mu_arr = levels[-1]
    else:
        mu_arr = np.asarray(mu, dtype=float)
    if not np.isclose(mu_arr.sum(), 1.0, atol=1e-9):
        raise ConstraintViolationError(f"mu table has total mass {mu_arr.sum()}, expected 1")
    d_minus = 0
    while n**d_minus < len(mu_arr):
        d_minus += 1
    if n**d_minus != len(mu_arr):
        raise ConstraintViolationError("mu table length is not a power of the alphabet size")
    if d_minus > grid_minus.depth:
        raise InsufficientResolutionError("mu table is finer than the minus grid")

    density = mu_arr / grid_minus.level_masses[d_minus]
    g = rho.lift(max(rho.depth_plus, 0), max(rho.depth_minus, d_minus))
    if g.depth_minus > d_minus:
        reps = n ** (g.depth_minus - d_minus)
        dens = np.repeat(density, reps)
    else:
        dens = density
    field = ProductField(g.depth_plus, g.depth_minus, g.values * dens[None, :], g.alphabet)
    vector = aniso_decompose(field, s, t, grid_plus, grid_minus)

    slice_coeffs = decompose_axis(rho.lift(rho.depth_plus, d_minus).values, grid_plus, s, axis=0)
    slice_norms = np.abs(slice_coeffs).sum(axis=0)
    integral = float(slice_norms @ mu_arr)
    ratio = vector.norm() / integral if integral > 0 else 0.0
    return EmbeddedMeasure(vector, integral, ratio)


@dataclass(frozen=True)
class HolderMap:
    """Stable-side address per unstable cylinder, with a certified seminorm.

    ``assignment[i]`` is the canonical index (at the minus grid depth) of the
    image of the depth-``depth_plus`` plus cylinder ``i``; the seminorm
    certificate is the exhaustive maximum of ``d_-(u(x), u(y)) / d_+(x, y)^beta``
    over distinct cylinder pairs at grid resolution.
    """

    assignment: np.ndarray
    beta: float
    seminorm: float
    depth_plus: int
    depth_minus: int


def certify_holder_map(
    assignment: np.ndarray, beta: float, grid_plus: GoodGrid, grid_minus: GoodGrid,
    depth_plus: int | None = None,
) -> HolderMap:
    n = grid_plus.alphabet.size
    assignment = np.asarray(assignment, dtype=np.int64)
    dp = depth_plus
    if dp is None:
        dp = 0
        while n**dp < len(assignment):
            dp += 1
    if n**dp != len(assignment):
        raise ValueError("assignment length is not a power of the alphabet size")
    dm = grid_minus.depth
    dist_plus = _pairwise_common_mass(grid_plus, dp)
    seminorm = 0.0
    mm = grid_minus.level_masses
    idx = assignment
    common = np.zeros((len(idx), len(idx)), dtype=np.int64)
    for j in range(1, dm + 1):
        pj = idx // n ** (dm - j)
        common += pj[:, None] == pj[None, :]
    dist_minus = np.ones_like(dist_plus)
    for j in range(1, dm + 1):
        mask = common == j
        if mask.any():
            pj = idx // n ** (dm - j)
            rows = np.nonzero(mask)
            dist_minus[rows] = mm[j][pj[rows[0]]]
    dist_minus[common >= dm] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(dist_plus > 0, dist_minus / dist_plus**beta, 0.0)
    seminorm = float(quot.max())
    return HolderMap(assignment, beta, seminorm, dp, dm)


@dataclass(frozen=True)
class GraphMeasureResult:
    """Graph measure at full truncation plus the Cauchy-increment report."""

    vector: AnisoVector
    increments: np.ndarray  # ||mu_{k+1} - mu_k|| for k = 0 .. depth_plus-1
    fitted_rate: float | None  # geometric fit of the positive increments
    rho_l1eps_norm: float
    levels: int


def _graph_level_vector(
    u: HolderMap, rho_field: StepField, level: int, s: float, t: float,
    grid_plus: GoodGrid, grid_minus: GoodGrid,
) -> AnisoVector:
    n = grid_plus.alphabet.size
    dp, dm = u.depth_plus, u.depth_minus
    rho_vals = rho_field.lift(dp).values
    mp = grid_plus.level_masses
    block = n ** (dp - level)
    level_means = (rho_vals * mp[dp]).reshape(n**level, block).sum(axis=1) / mp[level]
    row_val = np.repeat(level_means, block)  # m_+(rho, Q) per depth-dp row
    rep_rows = np.arange(n**level) * block  # all-zero extension picks the first row
    cols = u.assignment[np.repeat(rep_rows, block)]
    out = np.zeros((n**dp, n**dm))
    out[np.arange(n**dp), cols] = row_val / grid_minus.level_masses[dm][cols]
    field = ProductField(dp, dm, out, grid_plus.alphabet)
    return aniso_decompose(field, s, t, grid_plus, grid_minus)


def graph_measure(
    u: HolderMap,
    rho: BesovVector,
    cfg: ExponentConfig,
    grid_minus: GoodGrid,
) -> GraphMeasureResult:
    """Push ``rho m_+`` onto the graph of a Hoelder map, level by level.

    Builds the cylinder-average approximations with representative points
    chosen as the all-zero extension, reports the increment norms between
    consecutive levels and a geometric fit certifying the Cauchy property.
    """
    cfg.require_graph()
    grid_plus = rho.grid
    if grid_plus.side is not Side.PLUS:
        raise ValueError("rho must live on the plus grid")
    rho_field = rho.to_field()
    inv_eps = 1.0 / cfg.eps
    l_norm = float((np.abs(rho_field.lift(u.depth_plus).values) ** inv_eps
                    @ grid_plus.level_masses[u.depth_plus]) ** cfg.eps)
    vectors = [
        _graph_level_vector(u, rho_field, k, cfg.s, cfg.t, grid_plus, grid_minus)
        for k in range(u.depth_plus + 1)
    ]
    increments = np.array(
        [(vectors[k + 1] - vectors[k]).norm() for k in range(u.depth_plus)]
    )
    positive = increments > 1e-14
    rate = None
    ks = np.nonzero(positive)[0]
    if len(ks) >= 2:
        slope = np.polyfit(ks.astype(float), np.log(increments[ks]), 1)[0]
        rate = float(np.exp(slope))
    return GraphMeasureResult(vectors[-1], increments, rate, l_norm, u.depth_plus)


def graph_riemann_sum(u: HolderMap, rho: BesovVector, gamma: ProductField) -> float:
    """Independent oracle: the direct cylinder sum of the graph integral.

    Computes ``sum_Q gamma(Q, u(x_Q)) int_Q rho dm_+`` over the deepest
    unstable cylinders, which the graph measure must reproduce exactly at
    step resolution.
    """
    grid_plus = rho.grid
    n = grid_plus.alphabet.size
    dp, dm = u.depth_plus, u.depth_minus
    rho_vals = rho.to_field().lift(dp).values
    masses = grid_plus.level_masses[dp]
    rows = np.arange(n**dp) // n ** (dp - gamma.depth_plus)
    cols = u.assignment // n ** (dm - gamma.depth_minus)
    return float((gamma.values[rows, cols] * rho_vals * masses).sum())
