"""Good grids, unbalanced Haar atoms, Besov vectors and the grid metric.

The grid over a cylinder hierarchy carries the reference-measure masses of
every cylinder up to its depth.  Each parent node gets a deterministic binary
split tree over its children (balanced-mass cut in symbol order, ties to the
smaller left block), and the atoms of Eq. style ``|Q|^e (1_L/|L| - 1_R/|R|)``
over those splits form a basis of step functions.  Analysis and synthesis are
exact on the step substrate; the four norms are the l1 / sup norms of the
coefficients.

Atom enumeration: slot 0 is the root atom ``1_I``; the split nodes of the
parents at depth k occupy slots ``[n^k, n^{k+1})``, parent ``i`` holding the
``n-1`` nodes of its tree in preorder.  A depth-d step field therefore maps
to exactly ``n^d`` coefficients and the map is invertible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolationError, DegenerateMassError, InsufficientResolutionError
from .rpf import RPFData
from .shift_core import Cylinder, Side, StepField, index_word, word_index

_PRUNE = 1e-15


class SpaceTag(enum.Enum):
    """The four coefficient spaces: (exponent sign, summation) pairs."""

    S_11 = "B^s_{1,1}"
    NEG_T_11 = "B^{-t}_{1,1}"
    S_INF = "B^s_{inf,inf}"
    NEG_S_INF = "B^{-s}_{inf,inf}"


def atom_exponent(tag: SpaceTag, value: float) -> float:
    """Mass exponent ``e`` in the atom normalization ``|Q|^e``.

    ``e = s + 1 - 1/p`` with the signed smoothness ``s``: the positive
    ``value`` is ``s`` for function-type tags and ``t``/``s`` for the
    distribution-type ones.
    """
    if not 0 < value < 1:
        raise ConstraintViolationError(f"smoothness exponent must lie in (0,1), got {value}")
    return {
        SpaceTag.S_11: value,
        SpaceTag.NEG_T_11: -value,
        SpaceTag.S_INF: value + 1.0,
        SpaceTag.NEG_S_INF: 1.0 - value,
    }[tag]


def _is_l1(tag: SpaceTag) -> bool:
    return tag in (SpaceTag.S_11, SpaceTag.NEG_T_11)


@dataclass(frozen=True)
class ExponentConfig:
    """Smoothness exponents for the anisotropic experiments.

    ``r`` satisfies ``s - 1 + 1/r = 0`` and ``r_star`` is its conjugate; the
    ceilings ``s_plus`` / ``t_minus`` default to 1 (no binding regularity
    information) and runs crossing them are flagged rather than rejected.
    """

    s: float
    t: float
    beta: float = 1.0
    epsilon: float | None = None
    s_plus: float = 1.0
    t_minus: float = 1.0

    def __post_init__(self):
        for name in ("s", "t"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConstraintViolationError(
                    f"exponent constraint violated: 0 < {name} < 1 required, got {name}={v}"
                )

    @property
    def r(self) -> float:
        return 1.0 / (1.0 - self.s)

    @property
    def r_star(self) -> float:
        return 1.0 / self.s

    @property
    def eps(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return 0.5 * (self.beta * self.t - self.s)

    def require_anisotropic(self) -> list[str]:
        """Enforce s < t and return soft regularity flags."""
        if not self.s < self.t:
            raise ConstraintViolationError(
                "spectral-gap exponent constraint violated: need 0 < s < t < 1 "
                f"(got s={self.s}, t={self.t})"
            )
        flags = []
        if self.s >= self.s_plus:
            flags.append(f"s={self.s} is not below the unstable regularity ceiling {self.s_plus}")
        if self.t >= self.t_minus:
            flags.append(f"t={self.t} is not below the stable regularity ceiling {self.t_minus}")
        return flags

    def require_graph(self) -> None:
        """Constraints of the graph-measure construction."""
        if not self.s < self.beta * self.t:
            raise ConstraintViolationError(
                f"graph-measure constraint violated: need s < beta*t (s={self.s}, "
                f"beta*t={self.beta * self.t})"
            )
        if not 0 < self.eps < self.beta * self.t - self.s:
            raise ConstraintViolationError(
                f"graph-measure constraint violated: need 0 < epsilon < beta*t - s "
                f"(epsilon={self.eps})"
            )


@dataclass(frozen=True)
class SplitNode:
    """One (L, R) pair: children ``lo..cut`` against ``cut+1..hi``."""

    lo: int
    hi: int
    cut: int


@dataclass(frozen=True)
class AtomKey:
    """Identifier of a Haar atom: a split node, or the root constant."""

    parent_depth: int  # -1 marks the root atom 1_I
    parent_index: int = 0
    lo: int = 0
    hi: int = -1
    cut: int = -1

    @staticmethod
    def root() -> "AtomKey":
        return AtomKey(-1)

    @property
    def is_root(self) -> bool:
        return self.parent_depth < 0


@dataclass(frozen=True)
class HaarSplit:
    """Split tree of one parent, materialized as cylinders for inspection."""

    parent: Cylinder
    pairs: tuple[tuple[tuple[Cylinder, ...], tuple[Cylinder, ...]], ...]


def _build_tree(child_masses: np.ndarray) -> tuple[SplitNode, ...]:
    nodes: list[SplitNode] = []

    def rec(lo: int, hi: int):
        if lo == hi:
            return
        best_cut, best_gap = lo, None
        total = child_masses[lo : hi + 1].sum()
        left = 0.0
        for cut in range(lo, hi):
            left += child_masses[cut]
            gap = abs(left - (total - left))
            if best_gap is None or gap < best_gap - 1e-15 * max(1.0, total):
                best_gap, best_cut = gap, cut
        nodes.append(SplitNode(lo, hi, best_cut))
        rec(lo, best_cut)
        rec(best_cut + 1, hi)

    rec(0, len(child_masses) - 1)
    return tuple(nodes)


class GoodGrid:
    """Cylinder hierarchy with reference masses and its Haar split forest."""

    def __init__(self, data: RPFData, depth: int | None = None):
        depth = data.depth if depth is None else depth
        if depth > data.depth:
            raise ValueError("grid depth cannot exceed the solved depth")
        self.side = data.side
        self.alphabet = data.alphabet
        self.depth = depth
        self.data = data
        self.level_masses = tuple(np.asarray(lv) for lv in data.ref_levels[: depth + 1])
        n = self.alphabet.size
        lam1, lam2 = np.inf, -np.inf
        for k in range(depth):
            child = self.level_masses[k + 1]
            if child.min() <= 0.0:
                raise DegenerateMassError(
                    f"zero reference mass at depth {k + 1}; grid axioms fail"
                )
            ratios = child / np.repeat(self.level_masses[k], n)
            lam1 = min(lam1, float(ratios.min()))
            lam2 = max(lam2, float(ratios.max()))
        if depth > 0 and not 0.0 < lam1 <= lam2 < 1.0:
            raise DegenerateMassError(
                f"child/parent mass ratios [{lam1}, {lam2}] leave (0,1); grid axioms fail"
            )
        self.lambda1 = lam1 if depth > 0 else 0.0
        self.lambda2 = lam2 if depth > 0 else 0.0
        # split forest: forest[k][i] = preorder nodes of parent i at depth k
        self._forest: list[list[tuple[SplitNode, ...]]] = []
        for k in range(depth):
            child = self.level_masses[k + 1]
            level = [
                _build_tree(child[i * n : (i + 1) * n]) for i in range(n**k)
            ]
            self._forest.append(level)

    # -- split forest -----------------------------------------------------
    def nodes(self, parent_depth: int, parent_index: int) -> tuple[SplitNode, ...]:
        return self._forest[parent_depth][parent_index]

    def atom_count(self, depth: int | None = None) -> int:
        d = self.depth if depth is None else depth
        return self.alphabet.size**d

    def key_of_slot(self, slot: int, depth: int | None = None) -> AtomKey:
        if slot == 0:
            return AtomKey.root()
        n = self.alphabet.size
        k = 0
        while n ** (k + 1) <= slot:
            k += 1
        j = slot - n**k
        parent, pos = divmod(j, n - 1)
        node = self._forest[k][parent][pos]
        return AtomKey(k, parent, node.lo, node.hi, node.cut)

    def slot_of_key(self, key: AtomKey) -> int:
        if key.is_root:
            return 0
        n = self.alphabet.size
        nodes = self._forest[key.parent_depth][key.parent_index]
        for pos, node in enumerate(nodes):
            if (node.lo, node.hi, node.cut) == (key.lo, key.hi, key.cut):
                return n**key.parent_depth + key.parent_index * (n - 1) + pos
        raise KeyError(f"{key} does not resolve in the split forest")

    def haar_split(self, parent: Cylinder) -> HaarSplit:
        n = self.alphabet.size
        if parent.side is not self.side:
            raise ValueError("cylinder side does not match the grid")
        k = parent.depth
        children = [
            Cylinder(self.side, parent.word + (a,))
            if self.side is Side.PLUS
            else Cylinder(self.side, (a,) + parent.word)
            for a in range(n)
        ]
        pairs = []
        for node in self.nodes(k, parent.index(n)):
            left = tuple(children[a] for a in range(node.lo, node.cut + 1))
            right = tuple(children[a] for a in range(node.cut + 1, node.hi + 1))
            pairs.append((left, right))
        return HaarSplit(parent, tuple(pairs))

    # -- mass lookups ------------------------------------------------------
    def mass(self, cyl: Cylinder) -> float:
        return float(self.level_masses[cyl.depth][cyl.index(self.alphabet.size)])

    def node_masses(self, key: AtomKey) -> tuple[float, float, float]:
        """(|Q|, |L|, |R|) of a split node."""
        n = self.alphabet.size
        child = self.level_masses[key.parent_depth + 1]
        base = key.parent_index * n
        seg = child[base + key.lo : base + key.hi + 1]
        left = child[base + key.lo : base + key.cut + 1]
        return float(seg.sum()), float(left.sum()), float(seg.sum() - left.sum())


def build_grid(data: RPFData, depth: int | None = None) -> GoodGrid:
    """Good grid over the cylinder hierarchy of a solved reference measure."""
    return GoodGrid(data, depth)


def haar_splits(grid: GoodGrid) -> dict[Cylinder, HaarSplit]:
    """The full split forest, keyed by parent cylinder (all depths < grid depth)."""
    n = grid.alphabet.size
    out = {}
    for k in range(grid.depth):
        for i in range(n**k):
            word = index_word(i, k, n)
            cyl = (
                Cylinder(Side.PLUS, word)
                if grid.side is Side.PLUS
                else Cylinder(Side.MINUS, tuple(reversed(word)))
            )
            out[cyl] = grid.haar_split(cyl)
    return out


# ---------------------------------------------------------------------------
# Analysis / synthesis along one axis
# ---------------------------------------------------------------------------


def _depth_from(size: int, n: int) -> int:
    d = 0
    while n**d < size:
        d += 1
    if n**d != size:
        raise ValueError(f"array length {size} is not a power of {n}")
    return d


def _level_means(values: np.ndarray, grid: GoodGrid, d: int) -> list[np.ndarray]:
    """Mass-weighted conditional means of a step array at every depth <= d."""
    n = grid.alphabet.size
    means: list[np.ndarray] = [None] * (d + 1)  # type: ignore[list-item]
    means[d] = values
    for k in range(d - 1, -1, -1):
        w = means[k + 1] * grid.level_masses[k + 1]
        means[k] = w.reshape(w.shape[:-1] + (n**k, n)).sum(axis=-1) / grid.level_masses[k]
    return means


def decompose_axis(
    values: np.ndarray, grid: GoodGrid, e: float, axis: int = -1, prune: float = _PRUNE
) -> np.ndarray:
    """Haar coefficients of step values along ``axis``; exact synthesis inverse.

    ``e`` is the atom mass-exponent from :func:`atom_exponent`.  The
    extraction rule per split node is
    ``c_Q = |Q|^{-e} |L| (m(f, L) - m(f, Q))``.
    """
    vals = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
    n = grid.alphabet.size
    d = _depth_from(vals.shape[-1], n)
    if d > grid.depth:
        raise InsufficientResolutionError(f"field depth {d} exceeds grid depth {grid.depth}")
    means = _level_means(vals, grid, d)
    out = np.empty_like(vals)
    out[..., 0] = means[0][..., 0]
    for k in range(d):
        if n == 2:
            w_parent = grid.level_masses[k]
            m_left = grid.level_masses[k + 1][0::2]
            out[..., 2**k : 2 ** (k + 1)] = (
                w_parent ** (-e) * m_left * (means[k + 1][..., 0::2] - means[k])
            )
        else:
            child_m = grid.level_masses[k + 1]
            for i in range(n**k):
                seg_m = child_m[i * n : (i + 1) * n]
                seg_v = means[k + 1][..., i * n : (i + 1) * n]
                for pos, node in enumerate(grid.nodes(k, i)):
                    q_m = seg_m[node.lo : node.hi + 1]
                    w_q = q_m.sum()
                    m_q = (seg_v[..., node.lo : node.hi + 1] * q_m).sum(axis=-1) / w_q
                    l_m = seg_m[node.lo : node.cut + 1]
                    w_l = l_m.sum()
                    m_l = (seg_v[..., node.lo : node.cut + 1] * l_m).sum(axis=-1) / w_l
                    slot = n**k + i * (n - 1) + pos
                    out[..., slot] = w_q ** (-e) * w_l * (m_l - m_q)
    if prune:
        out[np.abs(out) < prune] = 0.0
    return np.moveaxis(out, -1, axis)


def reconstruct_axis(coeffs: np.ndarray, grid: GoodGrid, e: float, axis: int = -1) -> np.ndarray:
    """Synthesize step values from Haar coefficients along ``axis``."""
    c = np.moveaxis(np.asarray(coeffs, dtype=float), axis, -1)
    n = grid.alphabet.size
    d = _depth_from(c.shape[-1], n)
    if d > grid.depth:
        raise InsufficientResolutionError(f"coefficient depth {d} exceeds grid depth {grid.depth}")
    vals = c[..., 0:1].copy()
    for k in range(d):
        nxt = np.repeat(vals, n, axis=-1)
        if n == 2:
            pref = grid.level_masses[k] ** e
            ck = c[..., 2**k : 2 ** (k + 1)]
            nxt[..., 0::2] += ck * (pref / grid.level_masses[k + 1][0::2])
            nxt[..., 1::2] -= ck * (pref / grid.level_masses[k + 1][1::2])
        else:
            child_m = grid.level_masses[k + 1]
            for i in range(n**k):
                seg_m = child_m[i * n : (i + 1) * n]
                for pos, node in enumerate(grid.nodes(k, i)):
                    slot = n**k + i * (n - 1) + pos
                    q_m = seg_m[node.lo : node.hi + 1]
                    w_q = q_m.sum()
                    w_l = seg_m[node.lo : node.cut + 1].sum()
                    w_r = w_q - w_l
                    ck = c[..., slot]
                    for a in range(node.lo, node.cut + 1):
                        nxt[..., i * n + a] += ck * (w_q**e / w_l)
                    for a in range(node.cut + 1, node.hi + 1):
                        nxt[..., i * n + a] -= ck * (w_q**e / w_r)
        vals = nxt
    return np.moveaxis(vals, -1, axis)


# ---------------------------------------------------------------------------
# Besov vectors
# ---------------------------------------------------------------------------


class BesovVector:
    """Sparse-in-spirit coefficient vector of one Haar analysis.

    Stored densely over the canonical slot enumeration (coefficients below
    1e-15 are snapped to zero, emulating pruned sparse storage); ``items``
    iterates the nonzero (AtomKey, coefficient) pairs.
    """

    def __init__(self, grid: GoodGrid, tag: SpaceTag, exponent: float, coeffs: np.ndarray, depth: int):
        self.grid = grid
        self.tag = tag
        self.exponent = float(exponent)
        c = np.ascontiguousarray(coeffs, dtype=float)
        c = np.where(np.abs(c) < _PRUNE, 0.0, c)
        c.flags.writeable = False
        self.coeffs = c
        self.depth = depth
        if len(c) != grid.alphabet.size**depth:
            raise ValueError("coefficient count does not match the depth")

    @property
    def e(self) -> float:
        return atom_exponent(self.tag, self.exponent)

    def norm(self) -> float:
        if _is_l1(self.tag):
            return float(np.abs(self.coeffs).sum())
        return float(np.abs(self.coeffs).max()) if len(self.coeffs) else 0.0

    def items(self):
        for slot in np.nonzero(self.coeffs)[0]:
            yield self.grid.key_of_slot(int(slot)), float(self.coeffs[slot])

    def coefficient(self, key: AtomKey) -> float:
        return float(self.coeffs[self.grid.slot_of_key(key)])

    def lift(self, depth: int) -> "BesovVector":
        """Zero-pad to a deeper truncation; exact (deep coefficients vanish)."""
        if depth < self.depth:
            raise ValueError("lift only refines")
        n = self.grid.alphabet.size
        out = np.zeros(n**depth)
        out[: len(self.coeffs)] = self.coeffs
        return BesovVector(self.grid, self.tag, self.exponent, out, depth)

    def _aligned(self, other: "BesovVector"):
        if self.grid is not other.grid or self.tag is not other.tag or self.exponent != other.exponent:
            raise ValueError("vectors live in different spaces")
        d = max(self.depth, other.depth)
        return self.lift(d), other.lift(d)

    def __add__(self, other: "BesovVector") -> "BesovVector":
        a, b = self._aligned(other)
        return BesovVector(a.grid, a.tag, a.exponent, a.coeffs + b.coeffs, a.depth)

    def __sub__(self, other: "BesovVector") -> "BesovVector":
        a, b = self._aligned(other)
        return BesovVector(a.grid, a.tag, a.exponent, a.coeffs - b.coeffs, a.depth)

    def __mul__(self, scalar: float) -> "BesovVector":
        return BesovVector(self.grid, self.tag, self.exponent, self.coeffs * float(scalar), self.depth)

    __rmul__ = __mul__

    def to_field(self) -> StepField:
        vals = reconstruct_axis(self.coeffs, self.grid, self.e)
        return StepField(self.grid.side, self.depth, vals, self.grid.alphabet)


def decompose(field: StepField, tag: SpaceTag, exponent: float, grid: GoodGrid) -> BesovVector:
    """Exact Haar analysis of a step field; ``reconstruct`` inverts it."""
    if field.side is not grid.side:
        raise ValueError("field side does not match the grid")
    coeffs = decompose_axis(field.values, grid, atom_exponent(tag, exponent))
    return BesovVector(grid, tag, exponent, coeffs, field.depth)


def reconstruct(v: BesovVector) -> StepField:
    return v.to_field()


def besov_norm(v: BesovVector) -> float:
    return v.norm()


def atom_field(key: AtomKey, grid: GoodGrid, tag: SpaceTag, exponent: float) -> StepField:
    """The atom as an exact step field at its natural depth."""
    if key.is_root:
        return StepField.constant(grid.side, 0, 1.0, grid.alphabet)
    n = grid.alphabet.size
    e = atom_exponent(tag, exponent)
    w_q, w_l, w_r = grid.node_masses(key)
    vals = np.zeros(n ** (key.parent_depth + 1))
    base = key.parent_index * n
    vals[base + key.lo : base + key.cut + 1] = w_q**e / w_l
    vals[base + key.cut + 1 : base + key.hi + 1] = -(w_q**e) / w_r
    return StepField(grid.side, key.parent_depth + 1, vals, grid.alphabet)


def integrate(field: StepField, grid: GoodGrid) -> float:
    """Reference integral of a step field."""
    if field.depth > grid.depth:
        raise InsufficientResolutionError("field is finer than the grid")
    return float(field.values @ grid.level_masses[field.depth])


def grid_metric(x, y, grid: GoodGrid) -> float:
    """Mass of the smallest grid cylinder containing both canonical streams.

    Returns 0.0 when the streams agree through the grid depth (below
    resolution); raises if a stream runs out before either event.
    """
    limit = min(len(x), len(y))
    for j in range(min(limit, grid.depth)):
        if x[j] != y[j]:
            if j == 0:
                return 1.0
            return float(grid.level_masses[j][word_index(tuple(x[:j]), grid.alphabet.size)])
    if limit >= grid.depth:
        return 0.0
    raise InsufficientResolutionError(
        "streams agree on their whole overlap but are shorter than the grid depth"
    )


def dirac_vector(y, grid: GoodGrid, t: float) -> BesovVector:
    """Truncated point mass: analysis of ``1_P / |P|`` at the grid depth."""
    if len(y) < grid.depth:
        raise InsufficientResolutionError(
            f"need {grid.depth} canonical digits to place the point, got {len(y)}"
        )
    n = grid.alphabet.size
    idx = word_index(tuple(y[: grid.depth]), n)
    vals = np.zeros(n**grid.depth)
    vals[idx] = 1.0 / grid.level_masses[grid.depth][idx]
    field = StepField(grid.side, grid.depth, vals, grid.alphabet)
    return decompose(field, SpaceTag.NEG_T_11, t, grid)


def duality_pair(v: BesovVector, g: StepField) -> float:
    """Exact pairing ``sum_Q c_Q int a_Q g dm`` at step resolution."""
    if g.depth > v.grid.depth:
        raise InsufficientResolutionError("test function is finer than the grid")
    d = max(v.depth, g.depth)
    recon = v.lift(d).to_field()
    return float((recon.values * g.lift(d).values) @ v.grid.level_masses[d])


def holder_seminorm(values: StepField, grid: GoodGrid, beta: float, depth: int | None = None) -> float:
    """Empirical Hoelder constant of a step field in the grid metric.

    Exhaustive maximum of ``|f(x) - f(y)| / d(x, y)^beta`` over distinct
    cylinder pairs at the given depth.  For a range-r table this is exact once
    ``depth >= r`` (deeper refinements never separate equal values further).
    """
    d = depth if depth is not None else values.depth
    f = values.lift(d)
    n = grid.alphabet.size
    idx = np.arange(n**d, dtype=np.int64)
    worst = 0.0
    for j in range(d):
        # pairs whose first disagreement sits at digit j share a depth-j prefix
        block = n ** (d - j)
        per_prefix = f.values.reshape(n**j, block)
        dist = grid.level_masses[j] if j > 0 else np.ones(1)
        for p in range(n**j):
            seg = per_prefix[p].reshape(n, -1)
            for a in range(n):
                for b in range(a + 1, n):
                    gap = float(np.abs(seg[a][:, None] - seg[b][None, :]).max())
                    worst = max(worst, gap / float(dist[p]) ** beta)
    return worst


def certify_potential_holder(psi, grid: GoodGrid, beta: float, depth: int | None = None):
    """Return the potential with its metric-Hoelder metadata filled in."""
    from dataclasses import replace

    d = depth if depth is not None else min(psi.range_ + 2, grid.depth)
    field = StepField(grid.side, psi.range_, psi.canon.copy(), grid.alphabet)
    semi = holder_seminorm(field, grid, beta, d)
    return replace(psi, beta=beta, seminorm=semi)
