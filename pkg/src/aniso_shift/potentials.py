"""Locally constant potentials: evaluation, Birkhoff sums, pressure, cohomology.

A range-``r`` potential is constant on depth-``r`` cylinders and is stored as
one table value per display-order word of length ``r``.  All operator actions
on such potentials are exact; this is the only first-class potential type.
A general Hoelder potential enters the package only as a sequence of range-``r``
conditional-expectation tables with a caller-supplied error bound.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InsufficientResolutionError
from .shift_core import Side, canonical_digits, index_word, word_index


def _reversed_digit_table(table: np.ndarray, r: int, n: int) -> np.ndarray:
    """Reindex a word table so it is addressed by canonical digits."""
    idx = np.arange(n**r)
    rev = np.zeros_like(idx)
    rest = idx.copy()
    for _ in range(r):
        rev = rev * n + rest % n
        rest //= n
    out = np.empty_like(table)
    out[rev] = table  # canon address of word w is the digit-reversal of its display address
    return out


@dataclass(frozen=True)
class Potential:
    """One-sided potential of finite range with optional Hoelder metadata."""

    side: Side
    range_: int
    table: np.ndarray  # value per display-order word of length range_
    beta: float | None = None
    seminorm: float | None = None

    def __post_init__(self):
        if self.side is Side.PRODUCT:
            raise ValueError("potentials are one-sided")
        if self.range_ < 1:
            raise ValueError("range must be >= 1")
        tab = np.ascontiguousarray(self.table, dtype=float)
        tab.flags.writeable = False
        object.__setattr__(self, "table", tab)

    @property
    def alphabet_size(self) -> int:
        n = round(len(self.table) ** (1.0 / self.range_))
        while n**self.range_ < len(self.table):
            n += 1
        if n**self.range_ != len(self.table):
            raise ValueError("table length is not a power matching the range")
        return n

    @property
    def canon(self) -> np.ndarray:
        """Table addressed by canonical digits (reversed for the minus side)."""
        n = self.alphabet_size
        if self.side is Side.PLUS or self.range_ == 1:
            return self.table
        return _reversed_digit_table(self.table, self.range_, n)

    def value(self, canon_prefix: Sequence[int]) -> float:
        if len(canon_prefix) < self.range_:
            raise InsufficientResolutionError(
                f"range-{self.range_} potential needs {self.range_} canonical digits"
            )
        n = self.alphabet_size
        return float(self.canon[word_index(tuple(canon_prefix[: self.range_]), n)])

    def shifted(self, c: float) -> "Potential":
        return replace(self, table=self.table + float(c))

    @staticmethod
    def constant(side: Side, value: float, n: int) -> "Potential":
        return Potential(side, 1, np.full(n, float(value)))

    @staticmethod
    def uniform(side: Side, n: int) -> "Potential":
        """log of the flat branch weight; the normalized Bernoulli(1/n) case."""
        return Potential(side, 1, np.full(n, -np.log(n)))

    @staticmethod
    def markov(side: Side, rows: np.ndarray) -> "Potential":
        """Range-2 potential log p for a row-stochastic matrix p."""
        p = np.asarray(rows, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("markov potential needs a square matrix")
        if np.any(p <= 0):
            raise ValueError("markov weights must be positive")
        return Potential(side, 2, np.log(p).reshape(-1))


def birkhoff_window_sums(psi: Potential, length: int, n_terms: int) -> np.ndarray:
    """Vectorized Birkhoff sums ``sum_{i<n_terms} psi(sigma^i y)`` per cylinder.

    ``y`` runs over all depth-``length`` cylinders (canonical addresses),
    extended by the all-zero tail where windows overrun; exact whenever
    ``length >= n_terms + range - 1`` and otherwise using the zero extension.
    """
    n = psi.alphabet_size
    r = psi.range_
    pad = max(0, n_terms + r - 1 - length)
    idx = np.arange(n**length, dtype=np.int64) * n**pad  # append zero digits
    total_len = length + pad
    canon = psi.canon
    out = np.zeros(len(idx))
    for i in range(n_terms):
        window = (idx // n ** (total_len - i - r)) % n**r
        out += canon[window]
    return out


def birkhoff_branch_sum(psi: Potential, word: Sequence[int], x_canon: Sequence[int]) -> float:
    """Birkhoff sum of ``psi`` along the inverse branch labelled by ``word``.

    Evaluates ``sum_{j<|w|} psi(sigma^j (w . x))`` where ``w . x`` is the
    branch image of ``x``; ``word`` is in display order for ``psi.side`` and
    ``x_canon`` is a canonical digit prefix with at least ``range - 1`` digits.
    Exact for locally constant potentials.
    """
    w = canonical_digits(tuple(word), psi.side)
    ell = len(w)
    if ell == 0:
        return 0.0
    r = psi.range_
    if len(x_canon) < r - 1:
        raise InsufficientResolutionError(
            f"need at least {r - 1} canonical digits of the base point"
        )
    digits = tuple(w) + tuple(x_canon[: r - 1])
    total = 0.0
    for j in range(ell):
        total += psi.value(digits[j : j + r])
    return total


def normalize_pressure(psi: Potential, depth: int) -> Potential:
    """Subtract the topological pressure so the leading eigenvalue becomes 1."""
    from . import rpf  # local import; rpf builds on this module

    data = rpf.solve(psi, depth)
    return psi.shifted(-data.pressure)


# ---------------------------------------------------------------------------
# Cohomological reduction of bilateral potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BilateralPotential:
    """Potential depending on coordinates ``-neg_range .. pos_range-1``."""

    neg_range: int
    pos_range: int
    table: np.ndarray  # value per display-order word of length neg_range+pos_range

    def __post_init__(self):
        tab = np.ascontiguousarray(self.table, dtype=float)
        tab.flags.writeable = False
        object.__setattr__(self, "table", tab)
        if self.neg_range < 0 or self.pos_range < 0 or self.width == 0:
            raise ValueError("bilateral potential needs a nonempty coordinate window")

    @property
    def width(self) -> int:
        return self.neg_range + self.pos_range

    @property
    def alphabet_size(self) -> int:
        n = 2
        while n**self.width < len(self.table):
            n += 1
        if n**self.width != len(self.table):
            raise ValueError("table length is not a power matching the window")
        return n

    def value(self, window: Sequence[int], origin: int) -> float:
        """Evaluate on a symbol window where ``window[i]`` sits at index ``origin+i``."""
        lo, hi = -self.neg_range, self.pos_range
        if origin > lo or origin + len(window) < hi:
            raise InsufficientResolutionError("window does not cover the dependence range")
        sub = tuple(window[lo - origin : hi - origin])
        return float(self.table[word_index(sub, self.alphabet_size)])


@dataclass(frozen=True)
class CoboundaryData:
    """Transfer function u and the reduced one-sided potential.

    ``u_plus`` genuinely depends on negative coordinates whenever the input
    does (its window is ``-m .. m+k-2``); only ``phi_plus`` is one-sided.
    """

    u_plus: BilateralPotential
    phi_plus: Potential


def reduce_to_one_sided(phi: BilateralPotential) -> CoboundaryData:
    """Replace a bilateral potential by a cohomologous one-sided one.

    Uses the splice construction ``u(x) = sum_{j>=0} phi(sigma^j x) - phi(sigma^j x*)``
    where ``x*`` replaces every negative coordinate of ``x`` with the symbol 0;
    the sum has at most ``neg_range`` nonzero terms.  The identity
    ``phi_plus = phi + u o sigma - u`` then holds pointwise and exactly on the
    step substrate, and ``phi_plus`` depends only on coordinates
    ``0 .. neg_range + pos_range - 1``.
    """
    m, k, n = phi.neg_range, phi.pos_range, phi.alphabet_size

    def phi_at(symbol_at, shift: int) -> float:
        # phi(sigma^shift z) where symbol_at(p) yields the symbol of z at index p
        word = tuple(symbol_at(p + shift) for p in range(-m, k))
        return float(phi.table[word_index(word, n)])

    if m == 0:
        u = BilateralPotential(0, 1, np.zeros(n))
        return CoboundaryData(u, Potential(Side.PLUS, max(k, 1), phi.table))

    # u table over the window -m .. m+k-2  (length 2m+k-1)
    u_width = 2 * m + k - 1
    u_table = np.empty(n**u_width)
    for idx in range(n**u_width):
        w = index_word(idx, u_width, n)

        def sym(p, w=w):
            j = p + m  # window starts at index -m
            return w[j] if 0 <= j < len(w) else 0

        def sym_star(p, w=w):
            return 0 if p < 0 else sym(p)

        u_table[idx] = sum(
            phi_at(sym, j) - phi_at(sym_star, j) for j in range(m)
        )
    u_plus = BilateralPotential(m, m + k - 1, u_table)

    # phi_plus(x) = phi(sigma^m x) + sum_{j<m} [phi(sigma^j x*) - phi(sigma^j (sigma x)*)]
    p_width = m + k
    p_table = np.empty(n**p_width)
    for idx in range(n**p_width):
        w = index_word(idx, p_width, n)

        def sym(p, w=w):
            return w[p] if 0 <= p < len(w) else 0

        def sym_star(p, w=w):
            return 0 if p < 0 else sym(p)

        def sym_shift_star(p, w=w):
            return 0 if p < 0 else sym(p + 1)

        val = phi_at(sym, m)
        val += sum(phi_at(sym_star, j) - phi_at(sym_shift_star, j) for j in range(m))
        p_table[idx] = val
    return CoboundaryData(u_plus, Potential(Side.PLUS, p_width, p_table))


def coboundary_residual(data: CoboundaryData, phi: BilateralPotential) -> float:
    """Largest pointwise defect of the cohomology identity over all windows.

    Scans every window wide enough to evaluate all four terms, i.e. symbols on
    ``-m .. m+k-1``.
    """
    m, k, n = phi.neg_range, phi.pos_range, phi.alphabet_size
    width = 2 * m + k
    worst = 0.0
    for idx in range(n**width):
        w = index_word(idx, width, n)  # symbols at -m .. m+k-1
        u_now = data.u_plus.value(w, -m)
        u_next = data.u_plus.value(w[1:], -m)  # same window seen from sigma x
        phi_val = phi.value(w, -m)
        plus_word = w[m:]
        plus_val = float(data.phi_plus.table[word_index(plus_word, n)])
        worst = max(worst, abs(plus_val - phi_val - u_next + u_now))
    return worst


# ---------------------------------------------------------------------------
# Maximal ergodic averages via an exact minimum-mean-cycle DP
# ---------------------------------------------------------------------------


def max_ergodic_average(psi: Potential) -> float:
    """Supremum of the integral of ``psi`` over shift-invariant probabilities.

    For a locally constant potential this equals the maximum mean cycle weight
    of the word-overlap (de Bruijn) graph whose edges are the length-``r``
    words weighted by the table.  Computed as a Karp-style dynamic program on
    the negated weights in exact rational arithmetic, so the returned value is
    the correctly rounded true optimum.
    """
    n = psi.alphabet_size
    r = psi.range_
    weights = [Fraction(-float(v)) for v in psi.canon]
    n_nodes = n ** (r - 1)
    n_edges = n**r
    # edge e: u = e // n  ->  v = e % n_nodes, weight weights[e]
    INF = None
    dp = [Fraction(0)] * n_nodes
    table: list[list[Fraction | None]] = [list(dp)]
    for _ in range(n_nodes):
        nxt: list[Fraction | None] = [INF] * n_nodes
        for e in range(n_edges):
            u, v = e // n, e % n_nodes
            du = dp[u]
            if du is None:
                continue
            cand = du + weights[e]
            if nxt[v] is None or cand < nxt[v]:
                nxt[v] = cand
        dp = nxt
        table.append(list(dp))
    best: Fraction | None = None
    last = table[n_nodes]
    for v in range(n_nodes):
        if last[v] is None:
            continue
        worst: Fraction | None = None
        for k in range(n_nodes):
            dk = table[k][v]
            if dk is None:
                continue
            ratio = (last[v] - dk) / (n_nodes - k)
            if worst is None or ratio > worst:
                worst = ratio
        if worst is not None and (best is None or worst < best):
            best = worst
    assert best is not None  # full shift: every node has incoming edges
    return float(-best)


def max_periodic_average(psi: Potential, max_period: int) -> float:
    """Brute-force oracle: best mean Birkhoff sum over periodic orbits.

    Enumerates every periodic word of period ``L <= max_period`` in exact
    rational arithmetic; independent of :func:`max_ergodic_average`.
    """
    n = psi.alphabet_size
    r = psi.range_
    canon = [Fraction(float(v)) for v in psi.canon]
    best: Fraction | None = None
    for period in range(1, max_period + 1):
        for idx in range(n**period):
            w = index_word(idx, period, n)
            total = Fraction(0)
            for j in range(period):
                window = tuple(w[(j + i) % period] for i in range(r))
                total += canon[word_index(window, n)]
            mean = total / period
            if best is None or mean > best:
                best = mean
    assert best is not None
    return float(best)
