"""Unilateral Ruelle-Perron-Frobenius engine.

Builds the sparse transfer matrix of a locally constant potential on depth-N
step functions, extracts the leading eigendata by power iteration, fills in
cylinder masses of the reference and Gibbs measures at every depth <= N, and
provides measure-exact samplers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NonConvergenceError
from .potentials import Potential, birkhoff_window_sums
from .shift_core import Alphabet, Cylinder, SampledTail, Side, StepField

_MAX_CELLS = 2**24


@dataclass(frozen=True)
class RPFData:
    """Leading eigendata of a unilateral transfer operator at depth N.

    ``ref_levels[k]`` / ``gibbs_levels[k]`` hold one mass per depth-k cylinder
    (canonical addressing); both are additive over children by construction
    and total 1.  ``rho`` is the eigenfunction normalized so its reference
    integral is 1.
    """

    side: Side
    depth: int
    pressure: float
    rho: StepField
    ref_levels: tuple[np.ndarray, ...]
    gibbs_levels: tuple[np.ndarray, ...]
    alphabet: Alphabet
    potential: Potential

    def ref_mass(self, cyl: Cylinder) -> float:
        return float(self.ref_levels[cyl.depth][cyl.index(self.alphabet.size)])

    def gibbs_mass(self, cyl: Cylinder) -> float:
        return float(self.gibbs_levels[cyl.depth][cyl.index(self.alphabet.size)])


@dataclass(frozen=True)
class GibbsCertificate:
    """Observed extreme ratios of the Gibbs inequality up to a depth."""

    c_low: float
    c_high: float
    depth: int


def transfer_matrix(psi: Potential, depth: int) -> sp.csr_matrix:
    """Sparse matrix of the transfer operator on depth-``depth`` step functions.

    Row x has |A| entries: ``(L h)[x] = sum_a exp(psi(a.x)) h[(a.x) prefix]``
    where ``a.x`` prepends the canonical digit ``a``.
    """
    n = psi.alphabet_size
    r = psi.range_
    if depth < r:
        raise ValueError(f"depth {depth} is below the potential range {r}")
    size = n**depth
    if size > _MAX_CELLS:
        raise ValueError(f"depth {depth} needs {size} cells; raise _MAX_CELLS deliberately")
    canon = psi.canon
    x = np.arange(size, dtype=np.int64)
    rows = np.repeat(x, n)
    a = np.tile(np.arange(n, dtype=np.int64), size)
    cols = a * n ** (depth - 1) + rows // n
    windows = a * n ** (r - 1) + (rows // n ** (depth - r + 1))
    data = np.exp(canon[windows])
    return sp.csr_matrix((data, (rows, cols)), shape=(size, size))


def _power_iterate(mat: sp.csr_matrix, tol: float, max_iter: int) -> tuple[float, np.ndarray]:
    v = np.full(mat.shape[0], 1.0 / mat.shape[0])
    lam = 1.0
    for _ in range(max_iter):
        w = mat @ v
        lam_new = float(w.sum())  # v sums to one, all entries positive
        w /= lam_new
        delta = float(np.max(np.abs(w - v)))
        v_scale = float(np.max(np.abs(w)))
        converged = abs(lam_new - lam) <= tol * abs(lam_new) and delta <= tol * v_scale
        v, lam = w, lam_new
        if converged:
            return lam, v
    raise NonConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        "(degenerate or complex-weight input?)"
    )


def solve(psi: Potential, depth: int, *, tol: float = 1e-13, max_iter: int = 10**5) -> RPFData:
    """Pressure, eigenfunction and measure masses at cylinder depth ``depth``.

    Power iteration on the sparse matrix and its adjoint; the leading RPF
    eigenvalue is simple and positive, so no complex solver is needed.  The
    left eigenvector is normalized to a probability, the right one so that
    its reference integral equals one; masses for all depths <= N follow by
    child aggregation.
    """
    n = psi.alphabet_size
    mat = transfer_matrix(psi, depth)
    lam, rho = _power_iterate(mat, tol, max_iter)
    lam_left, m_vec = _power_iterate(sp.csr_matrix(mat.T), tol, max_iter)
    pressure = float(np.log(0.5 * (lam + lam_left)))
    m_vec = m_vec / m_vec.sum()
    rho = rho / float(rho @ m_vec)
    gibbs = rho * m_vec

    def levels(deepest: np.ndarray) -> tuple[np.ndarray, ...]:
        out = [deepest]
        for _ in range(depth):
            out.append(out[-1].reshape(-1, n).sum(axis=1))
        return tuple(reversed(out))

    alphabet = Alphabet(n)
    return RPFData(
        side=psi.side,
        depth=depth,
        pressure=pressure,
        rho=StepField(psi.side, depth, rho, alphabet),
        ref_levels=levels(m_vec),
        gibbs_levels=levels(gibbs),
        alphabet=alphabet,
        potential=psi,
    )


def verify_gibbs(data: RPFData, psi: Potential | None = None) -> GibbsCertificate:
    """Scan every cylinder up to depth N and bracket the Gibbs ratios.

    The comparison point inside each cylinder is its all-zero extension, which
    makes the Birkhoff sums exact for locally constant potentials.
    """
    psi = psi if psi is not None else data.potential
    lo, hi = np.inf, -np.inf
    for k in range(1, data.depth + 1):
        birkhoff = birkhoff_window_sums(psi, k, k)
        denom = np.exp(-k * data.pressure + birkhoff)
        ratios = data.gibbs_levels[k] / denom
        lo = min(lo, float(ratios.min()))
        hi = max(hi, float(ratios.max()))
    return GibbsCertificate(c_low=lo, c_high=hi, depth=data.depth)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _levels(data: RPFData, measure: str) -> tuple[np.ndarray, ...]:
    if measure == "ref":
        return data.ref_levels
    if measure == "gibbs":
        return data.gibbs_levels
    raise ValueError("measure must be 'ref' or 'gibbs'")


def _conditional_rows(levels, n: int, prefix_depth: int) -> np.ndarray:
    """Transition rows P(a | prefix) for prefixes at the given depth."""
    child = levels[prefix_depth + 1].reshape(-1, n)
    parent = levels[prefix_depth]
    return child / parent[:, None]


def sample_paths(
    data: RPFData, seed: int, length: int, n_paths: int, *, measure: str = "ref"
) -> np.ndarray:
    """Draw canonical symbol streams whose cylinder frequencies match the measure.

    Conditionals beyond depth N fall back to the depth-N Markov approximation,
    which is exact whenever the potential range is at most N.  Deterministic
    for a fixed seed.
    """
    levels = _levels(data, measure)
    n = data.alphabet.size
    N = data.depth
    rng = np.random.default_rng(seed)
    out = np.empty((n_paths, length), dtype=np.int64)
    state = np.zeros(n_paths, dtype=np.int64)
    state_mod = n ** max(N - 1, 0)
    markov_rows = _conditional_rows(levels, n, N - 1) if N >= 1 else None
    for pos in range(length):
        if pos < N:
            rows = _conditional_rows(levels, n, pos)[state]
        else:
            rows = markov_rows[state]
        cdf = np.cumsum(rows, axis=1)
        u = rng.random(n_paths)
        sym = np.minimum((cdf <= u[:, None]).sum(axis=1), n - 1)
        out[:, pos] = sym
        state = (state * n + sym) % state_mod if state_mod > 0 else state
    return out


def sample_point(data: RPFData, seed: int, length: int, *, measure: str = "ref") -> np.ndarray:
    """Single canonical symbol stream; see :func:`sample_paths`."""
    return sample_paths(data, seed, length, 1, measure=measure)[0]


def conditional_tail(data: RPFData, seed: int, *, measure: str = "ref") -> SampledTail:
    """Extension policy drawing each new symbol from the measure conditionals.

    Position-addressed: the uniform draw for position ``p`` comes from the
    stream seeded by ``(seed, p)``, so extensions are pure functions of the
    prefix and reproducible regardless of evaluation order.
    """
    levels = _levels(data, measure)
    n = data.alphabet.size
    N = data.depth

    def law(position: int, prefix) -> int:
        if position != len(prefix):
            raise ValueError("tail extension must be contiguous")
        d = min(position, N - 1)
        state = 0
        for s in prefix[position - d : position]:
            state = state * n + s
        rows = _conditional_rows(levels, n, d)
        cdf = np.cumsum(rows[state])
        u = float(np.random.default_rng([seed, position]).random())
        return int(min((cdf <= u).sum(), n - 1))

    return SampledTail(law, label=f"{measure}-conditional")


def dense_spectrum(psi: Potential, depth: int) -> np.ndarray:
    """All eigenvalues of the depth-``depth`` matrix, by decreasing modulus.

    Test oracle only; the solver itself never needs subleading eigendata.
    """
    mat = transfer_matrix(psi, depth).toarray()
    vals = np.linalg.eigvals(mat)
    return vals[np.argsort(-np.abs(vals))]
