"""Dense linear-algebra primitives underlying the masking scheme.

Every function is pure and takes an explicit ``numpy.random.Generator`` where
randomness is involved, so callers control determinism end to end.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimMismatch, NotPD, ResampleExhausted

#: Attempts before a rejection sampler gives up.
MAX_RESAMPLE = 100


def random_orthogonal(dim, rng):
    """Draw a random orthogonal matrix from the Haar distribution.

    Parameters
    ----------
    dim : int
        Size of the matrix.
    rng : numpy.random.Generator
        Source of randomness.

    Returns
    -------
    (dim, dim) ndarray
        Orthogonal matrix ``Q`` with ``Q.T @ Q == I`` to machine precision.

    Notes
    -----
    QR of a square Gaussian matrix alone does not give the Haar measure:
    the factorization is only unique up to the signs of the diagonal of
    ``R``. Multiplying each column of ``Q`` by the sign of the matching
    diagonal entry of ``R`` removes the bias.
    """
    if dim < 1:
        raise DimMismatch(f"orthogonal dimension must be >= 1, got {dim}")
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    d = np.diagonal(r)
    return q * np.where(d >= 0.0, 1.0, -1.0)


def random_gaussian_basis(dim, sigma, rng, cond_max=1e8):
    """Sample a dense Gaussian matrix suitable as a commuting-mask base.

    Entries are i.i.d. ``N(0, sigma**2)``. Draws whose condition number
    exceeds ``cond_max`` are rejected and resampled (at most
    ``MAX_RESAMPLE`` times, then :class:`ResampleExhausted` is raised).
    The accepted draw is rescaled to unit spectral norm so that matrix
    powers of the result neither explode nor vanish.
    """
    if dim < 1:
        raise DimMismatch(f"basis dimension must be >= 1, got {dim}")
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    for _ in range(MAX_RESAMPLE):
        m = rng.normal(0.0, sigma, size=(dim, dim))
        if np.linalg.cond(m) <= cond_max:
            return m / np.linalg.norm(m, 2)
    raise ResampleExhausted(
        f"no {dim}x{dim} Gaussian draw with condition <= {cond_max:g} "
        f"in {MAX_RESAMPLE} attempts"
    )


def commute_materialize(basis, coeffs):
    """Evaluate ``sum_j coeffs[j-1] * basis**j`` (powers start at 1).

    Any two matrices of this form built from the same ``basis`` commute,
    which is what makes the multi-party masking order-independent. The
    polynomial deliberately has no constant term. Evaluation uses Horner's
    scheme: d matrix products for a degree-d key.
    """
    basis = np.asarray(basis, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
        raise DimMismatch(f"basis must be square, got {basis.shape}")
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise DimMismatch("coeffs must be a non-empty vector")
    eye = np.eye(basis.shape[0])
    acc = coeffs[-1] * eye
    for c in coeffs[-2::-1]:
        acc = c * eye + basis @ acc
    return basis @ acc


def block_diag(blocks):
    """Assemble a dense block-diagonal matrix from square blocks."""
    return scipy.linalg.block_diag(*blocks)


def solve_spd(gram, rhs):
    """Solve ``gram @ x = rhs`` for symmetric positive definite ``gram``.

    Uses a Cholesky factorization; raises :class:`NotPD` when the
    factorization fails.
    """
    gram = np.asarray(gram, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise DimMismatch(f"gram must be square, got {gram.shape}")
    if rhs.shape[0] != gram.shape[0]:
        raise DimMismatch(
            f"rhs has {rhs.shape[0]} rows, expected {gram.shape[0]}"
        )
    try:
        factor = scipy.linalg.cho_factor(gram, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NotPD(f"gram matrix is not positive definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


@dataclass(frozen=True)
class OrthoBlocks:
    """A block-diagonal orthogonal matrix stored as its diagonal blocks.

    The blocks partition the row range in order; the trailing block is
    allowed to be smaller when the row count is not a multiple of the
    block size.
    """

    blocks: tuple

    @property
    def n_rows(self):
        return sum(b.shape[0] for b in self.blocks)

    def ranges(self):
        """Row range ``(start, stop)`` covered by each block."""
        out = []
        start = 0
        for b in self.blocks:
            out.append((start, start + b.shape[0]))
            start += b.shape[0]
        return tuple(out)

    def apply(self, m):
        """Left-multiply ``m`` by the block-diagonal matrix."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape[0] != self.n_rows:
            raise DimMismatch(
                f"matrix has {m.shape[0]} rows, blocks cover {self.n_rows}"
            )
        out = np.empty_like(m)
        start = 0
        for b in self.blocks:
            stop = start + b.shape[0]
            out[start:stop] = b @ m[start:stop]
            start = stop
        return out

    def materialize(self):
        """Dense ``(n_rows, n_rows)`` form; intended for tests and demos."""
        return block_diag(list(self.blocks))


def split_block_sizes(n_rows, block_size):
    """Block sizes used to cover ``n_rows`` rows: full blocks, then remainder."""
    if n_rows < 1:
        raise DimMismatch(f"need at least one row, got {n_rows}")
    if block_size < 1:
        raise DimMismatch(f"block size must be >= 1, got {block_size}")
    sizes = [block_size] * (n_rows // block_size)
    if n_rows % block_size:
        sizes.append(n_rows % block_size)
    return sizes


def random_ortho_blocks(n_rows, block_size, rng):
    """Draw a block-diagonal orthogonal mask covering ``n_rows`` rows."""
    blocks = tuple(
        random_orthogonal(s, rng) for s in split_block_sizes(n_rows, block_size)
    )
    return OrthoBlocks(blocks=blocks)
