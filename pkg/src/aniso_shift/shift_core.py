"""Symbolic substrate: alphabets, words, cylinders, step fields and the skew product.

Conventions used throughout the package:

* Symbols are the integers ``0 .. n-1``.
* A *word* is a plain tuple of symbols in display order.  On the plus side
  display order is ``(x_0, x_1, ...)``; on the minus side it is
  ``(x_{-m}, ..., x_{-1})``, i.e. the symbol at index -1 comes last.
* Internally every one-sided object is indexed *canonically*: digit ``j`` of a
  canonical index is the symbol at distance ``j`` from the boundary
  (``x_j`` on the plus side, ``x_{-(j+1)}`` on the minus side).  With this
  convention both unilateral shifts drop the leading
  canonical digit, children of a cylinder are the ``n`` canonical-digit
  extensions, and a depth-``d`` cylinder has the radix-``n`` integer address
  formed by its canonical digits (most significant first).  Sequences passed
  to numeric APIs (grid metric, Dirac vectors, samplers) are always canonical
  streams.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DepthExhaustedError, WindowUnderflowError

Word = tuple[int, ...]


class Side(enum.Enum):
    PLUS = "plus"
    MINUS = "minus"
    PRODUCT = "product"


@dataclass(frozen=True)
class Alphabet:
    """Finite symbol set ``{0, ..., size-1}``."""

    size: int

    def __post_init__(self):
        if self.size < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.size}")

    @property
    def symbols(self) -> range:
        return range(self.size)


def word_index(word: Sequence[int], n: int) -> int:
    """Radix-``n`` integer address of a digit tuple, most significant first."""
    idx = 0
    for s in word:
        if not 0 <= s < n:
            raise ValueError(f"symbol {s} outside alphabet of size {n}")
        idx = idx * n + s
    return idx


def index_word(idx: int, depth: int, n: int) -> Word:
    """Inverse of :func:`word_index` for a fixed depth."""
    out = []
    for _ in range(depth):
        out.append(idx % n)
        idx //= n
    return tuple(reversed(out))


def canonical_digits(word: Sequence[int], side: Side) -> Word:
    """Map a display-order word to its canonical digit tuple."""
    if side is Side.MINUS:
        return tuple(reversed(tuple(word)))
    return tuple(word)


def canonical_index(word: Sequence[int], side: Side, n: int) -> int:
    return word_index(canonical_digits(word, side), n)


def display_word(canon: Sequence[int], side: Side) -> Word:
    """Inverse of :func:`canonical_digits`."""
    if side is Side.MINUS:
        return tuple(reversed(tuple(canon)))
    return tuple(canon)


@dataclass(frozen=True)
class Cylinder:
    """One-sided or product cylinder, addressed by display-order words."""

    side: Side
    word: Word = ()
    word_minus: Word = ()  # only used when side is PRODUCT (word = plus factor)

    def __post_init__(self):
        if self.side is not Side.PRODUCT and self.word_minus:
            raise ValueError("word_minus only applies to product cylinders")

    @property
    def depth(self) -> int:
        if self.side is Side.PRODUCT:
            raise ValueError("product cylinders have one depth per factor")
        return len(self.word)

    def index(self, n: int) -> int:
        return canonical_index(self.word, self.side, n)

    @staticmethod
    def plus(word: Iterable[int]) -> "Cylinder":
        return Cylinder(Side.PLUS, tuple(word))

    @staticmethod
    def minus(word: Iterable[int]) -> "Cylinder":
        return Cylinder(Side.MINUS, tuple(word))

    @staticmethod
    def product(word_plus: Iterable[int], word_minus: Iterable[int]) -> "Cylinder":
        return Cylinder(Side.PRODUCT, tuple(word_plus), tuple(word_minus))


def cylinder_children(c: Cylinder, alphabet: Alphabet) -> list[Cylinder]:
    """The ``n`` one-step refinements of a one-sided cylinder.

    Plus cylinders gain a symbol at the far (large index) end, minus cylinders
    at the more-negative end; in canonical digits both append, so children of
    address ``i`` are the addresses ``i*n + a``.
    """
    if c.side is Side.PRODUCT:
        raise ValueError("cylinder_children applies to one-sided cylinders")
    out = []
    for a in alphabet.symbols:
        if c.side is Side.PLUS:
            out.append(Cylinder(Side.PLUS, c.word + (a,)))
        else:
            out.append(Cylinder(Side.MINUS, (a,) + c.word))
    return out


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class StepField:
    """Function constant on depth-``depth`` cylinders of one side.

    ``values[i]`` is the value on the cylinder with canonical address ``i``.
    This is the exact computational substrate: every operator in the package
    acts on step fields without approximation, and atomic coefficients are
    derived views of them.
    """

    side: Side
    depth: int
    values: np.ndarray
    alphabet: Alphabet

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        expected = self.alphabet.size ** self.depth
        if self.values.shape != (expected,):
            raise ValueError(
                f"depth {self.depth} needs {expected} values, got {self.values.shape}"
            )

    @staticmethod
    def constant(side: Side, depth: int, value: float, alphabet: Alphabet) -> "StepField":
        n = alphabet.size
        return StepField(side, depth, np.full(n**depth, float(value)), alphabet)

    @staticmethod
    def indicator(cyl: Cylinder, alphabet: Alphabet) -> "StepField":
        n = alphabet.size
        vals = np.zeros(n ** cyl.depth)
        vals[cyl.index(n)] = 1.0
        return StepField(cyl.side, cyl.depth, vals, alphabet)

    def _check_mate(self, other: "StepField"):
        if self.side is not other.side or self.alphabet != other.alphabet:
            raise ValueError("step fields live on different spaces")

    def lift(self, depth: int) -> "StepField":
        """Re-express at a finer depth; exact, values repeat per child block."""
        if depth < self.depth:
            raise ValueError("lift only refines")
        reps = self.alphabet.size ** (depth - self.depth)
        return StepField(self.side, depth, np.repeat(self.values, reps), self.alphabet)

    def _aligned(self, other: "StepField"):
        self._check_mate(other)
        d = max(self.depth, other.depth)
        return self.lift(d), other.lift(d)

    def __add__(self, other):
        if isinstance(other, StepField):
            a, b = self._aligned(other)
            return StepField(a.side, a.depth, a.values + b.values, a.alphabet)
        return StepField(self.side, self.depth, self.values + other, self.alphabet)

    def __sub__(self, other):
        if isinstance(other, StepField):
            a, b = self._aligned(other)
            return StepField(a.side, a.depth, a.values - b.values, a.alphabet)
        return StepField(self.side, self.depth, self.values - other, self.alphabet)

    def __mul__(self, other):
        if isinstance(other, StepField):
            a, b = self._aligned(other)
            return StepField(a.side, a.depth, a.values * b.values, a.alphabet)
        return StepField(self.side, self.depth, self.values * float(other), self.alphabet)

    __rmul__ = __mul__

    def __neg__(self):
        return StepField(self.side, self.depth, -self.values, self.alphabet)

    def value_at(self, canon_prefix: Sequence[int]) -> float:
        """Evaluate at any point given >= depth canonical digits."""
        if len(canon_prefix) < self.depth:
            raise DepthExhaustedError(
                f"need {self.depth} canonical digits, got {len(canon_prefix)}"
            )
        return float(self.values[word_index(canon_prefix[: self.depth], self.alphabet.size)])


@dataclass(frozen=True)
class ProductField:
    """Step function on the product space, one value per pair of cylinders."""

    depth_plus: int
    depth_minus: int
    values: np.ndarray  # shape (n**depth_plus, n**depth_minus)
    alphabet: Alphabet

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        n = self.alphabet.size
        if self.values.shape != (n**self.depth_plus, n**self.depth_minus):
            raise ValueError("product field shape does not match its depths")

    @staticmethod
    def constant(dp: int, dm: int, value: float, alphabet: Alphabet) -> "ProductField":
        n = alphabet.size
        return ProductField(dp, dm, np.full((n**dp, n**dm), float(value)), alphabet)

    @staticmethod
    def separable(f_plus: StepField, f_minus: StepField) -> "ProductField":
        if f_plus.side is not Side.PLUS or f_minus.side is not Side.MINUS:
            raise ValueError("separable takes a plus and a minus field")
        return ProductField(
            f_plus.depth,
            f_minus.depth,
            np.outer(f_plus.values, f_minus.values),
            f_plus.alphabet,
        )

    @staticmethod
    def rectangle(cyl: Cylinder, alphabet: Alphabet) -> "ProductField":
        """Indicator of a product cylinder."""
        if cyl.side is not Side.PRODUCT:
            raise ValueError("rectangle takes a product cylinder")
        fp = StepField.indicator(Cylinder.plus(cyl.word), alphabet) if cyl.word else \
            StepField.constant(Side.PLUS, 0, 1.0, alphabet)
        fm = StepField.indicator(Cylinder.minus(cyl.word_minus), alphabet) if cyl.word_minus \
            else StepField.constant(Side.MINUS, 0, 1.0, alphabet)
        return ProductField.separable(fp, fm)

    def lift(self, dp: int, dm: int) -> "ProductField":
        if dp < self.depth_plus or dm < self.depth_minus:
            raise ValueError("lift only refines")
        n = self.alphabet.size
        vals = np.repeat(self.values, n ** (dp - self.depth_plus), axis=0)
        vals = np.repeat(vals, n ** (dm - self.depth_minus), axis=1)
        return ProductField(dp, dm, vals, self.alphabet)

    def _aligned(self, other: "ProductField"):
        dp = max(self.depth_plus, other.depth_plus)
        dm = max(self.depth_minus, other.depth_minus)
        return self.lift(dp, dm), other.lift(dp, dm)

    def __add__(self, other):
        if isinstance(other, ProductField):
            a, b = self._aligned(other)
            return ProductField(a.depth_plus, a.depth_minus, a.values + b.values, a.alphabet)
        return ProductField(self.depth_plus, self.depth_minus, self.values + other, self.alphabet)

    def __sub__(self, other):
        if isinstance(other, ProductField):
            a, b = self._aligned(other)
            return ProductField(a.depth_plus, a.depth_minus, a.values - b.values, a.alphabet)
        return ProductField(self.depth_plus, self.depth_minus, self.values - other, self.alphabet)

    def __mul__(self, other):
        if isinstance(other, ProductField):
            a, b = self._aligned(other)
            return ProductField(a.depth_plus, a.depth_minus, a.values * b.values, a.alphabet)
        return ProductField(self.depth_plus, self.depth_minus, self.values * float(other), self.alphabet)

    __rmul__ = __mul__


class CompositionForm(enum.Enum):
    """The two exact composition primitives on step fields."""

    PRECOMPOSE_INVERSE = "precompose_inverse"  # x -> f(sigma_w^{-1} x), depth shrinks
    RESTRICT_FORWARD = "restrict_forward"      # x -> f(sigma^{|w|} x) 1_{C(w)}(x), depth grows


def step_compose_branch(f: StepField, word: Sequence[int], form: CompositionForm) -> StepField:
    """Compose a step field with an inverse branch or a restricted forward iterate.

    ``word`` is in display order for ``f.side`` (so a minus-side word is the
    block of symbols appended next to index -1, exactly as written in a
    cylinder address).
    """
    n = f.alphabet.size
    w = canonical_digits(tuple(word), Side.MINUS if f.side is Side.MINUS else Side.PLUS)
    # Canonical form: branches prepend canonical digits on either side.
    ell = len(w)
    if form is CompositionForm.PRECOMPOSE_INVERSE:
        if ell > f.depth:
            raise DepthExhaustedError(
                f"precomposition by a length-{ell} branch would take depth {f.depth} below zero"
            )
        d_out = f.depth - ell
        base = word_index(w, n) * n**d_out
        vals = f.values[base : base + n**d_out]
        return StepField(f.side, d_out, vals.copy(), f.alphabet)
    # restricted forward: g = f(sigma^ell x) on the cylinder with canonical prefix w
    d_out = f.depth + ell
    vals = np.zeros(n**d_out)
    base = word_index(w, n) * n**f.depth
    vals[base : base + n**f.depth] = f.values
    return StepField(f.side, d_out, vals, f.alphabet)


# ---------------------------------------------------------------------------
# Bilateral points and the skew product
# ---------------------------------------------------------------------------


class Direction(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class TailPolicy:
    """Supplies a canonical symbol stream beyond a finite window."""

    def symbol(self, position: int) -> int:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class PeriodicTail(TailPolicy):
    """Extend with a fixed repeating word (canonical digit order)."""

    word: Word

    def symbol(self, position: int) -> int:
        return self.word[position % len(self.word)]


@dataclass(frozen=True)
class SampledTail(TailPolicy):
    """Extend by a deterministic position-addressed sampler.

    ``law(position, prefix)`` must return the symbol for canonical position
    ``position`` given the already-known prefix; it must be a pure function so
    that re-evaluation is reproducible.  :func:`aniso_shift.rpf.conditional_tail`
    builds one from solved reference/Gibbs masses and a seed.
    """

    law: Callable[[int, Word], int]
    label: str = "sampled"

    def symbol(self, position: int) -> int:  # pragma: no cover - via BiPoint only
        raise NotImplementedError("SampledTail is consumed through BiPoint extension")


class NoTail(TailPolicy):
    def symbol(self, position: int) -> int:
        raise WindowUnderflowError("window exhausted and no extension policy set")


@dataclass(frozen=True)
class BiPoint:
    """Finite-precision point of the bilateral space.

    ``plus`` and ``minus`` are canonical digit tuples (``x_0, x_1, ...`` and
    ``x_{-1}, x_{-2}, ...``).  ``offset`` records how many times the point was
    shifted, so the represented window covers indices
    ``[-len(minus)+offset, len(plus)+offset)`` of the original sequence.
    """

    plus: Word
    minus: Word
    plus_policy: TailPolicy = field(default_factory=NoTail)
    minus_policy: TailPolicy = field(default_factory=NoTail)
    offset: int = 0

    def _extended_plus(self) -> int:
        consumed = max(self.offset, 0)  # plus digits that migrated to the minus side
        pos = len(self.plus) + consumed
        if isinstance(self.plus_policy, SampledTail):
            prefix = tuple(reversed(self.minus[:consumed])) + self.plus
            return self.plus_policy.law(pos, prefix)
        return self.plus_policy.symbol(pos)

    def _extended_minus(self) -> int:
        consumed = max(-self.offset, 0)  # minus digits that migrated to the plus side
        pos = len(self.minus) + consumed
        if isinstance(self.minus_policy, SampledTail):
            prefix = tuple(reversed(self.plus[:consumed])) + self.minus
            return self.minus_policy.law(pos, prefix)
        return self.minus_policy.symbol(pos)


def skew_apply(p: BiPoint, direction: Direction) -> BiPoint:
    """One step of the bilateral shift viewed as a skew product.

    Forward moves ``x_0`` onto the stable side; backward moves ``x_{-1}`` back.
    The window is extended lazily through the point's tail policies when a
    side runs dry.
    """
    if direction is Direction.FORWARD:
        plus = p.plus if p.plus else (p._extended_plus(),)
        if not plus:
            raise WindowUnderflowError("empty plus window")
        head, rest = plus[0], plus[1:]
        return BiPoint(rest, (head,) + p.minus, p.plus_policy, p.minus_policy, p.offset + 1)
    minus = p.minus if p.minus else (p._extended_minus(),)
    head, rest = minus[0], minus[1:]
    return BiPoint((head,) + p.plus, rest, p.plus_policy, p.minus_policy, p.offset - 1)
