"""Key material: shared commuting bases and per-agency mask keys.

Every agency derives the same pair of base matrices from a shared seed and
then draws private polynomial coefficients over those bases. Because all
feature-side keys are polynomials in the same base matrix (and likewise for
the response side), any two agencies' keys commute, which is what lets the
ring protocol apply them in arbitrary order.

The base sampler is deliberately picky. The final decrypted estimate has to
match a plaintext solve to ~1e-8 relative even though every intermediate
matrix crosses the wire in float64, so the conditioning of the *product* of
all agencies' keys must stay small. Three screens on the base and one on
each key keep that product tame; see ``derive_bases`` and
``gen_agency_keys``.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, ResampleExhausted
from .matrix_core import OrthoBlocks, commute_materialize, random_ortho_blocks

#: Hard cap on polynomial degree for feature-side keys.
MAX_KEY_DEGREE = 16

#: Degree of response-side keys (the response bundle always has 3 columns).
RESPONSE_KEY_DEGREE = 3

#: Attempts when screening a base matrix.
BASE_ATTEMPTS = 500

#: Attempts when drawing one key's coefficient vector.
KEY_ATTEMPTS = 100

#: Eigenvalue moduli of an accepted base stay within this ratio of the
#: largest, so no key polynomial (they all vanish at zero) is forced tiny.
EV_RATIO_MIN = 0.2

#: Cap on the condition number of the base's normalized eigenvector matrix.
EIGVEC_COND_MAX = 40.0

#: Probe screen: an accepted base must give at least PROBE_MIN_HITS out of
#: PROBE_COUNT random coefficient draws a spectral spread <= PROBE_SPREAD,
#: so the per-key rejection sampling below cannot stall.
PROBE_COUNT = 40
PROBE_SPREAD = 4.0
PROBE_MIN_HITS = 6

#: Budget for max|poly|/min|poly| over the base spectrum of the *product*
#: of all agencies' keys; each agency targets the K-th root of this.
PRODUCT_SPREAD_BUDGET = 1000.0

#: Condition-number cap on a single materialized key.
KEY_COND_MAX = 1e4

# Stream tags keep the seed-derived generators disjoint.
_TAG_BASES = 0xB5
_TAG_AGENCY = 0xA6


def default_degree(p):
    """Feature-side key degree used when none is requested."""
    return min(p, MAX_KEY_DEGREE)


@dataclass(frozen=True)
class MaskBases:
    """Shared base matrices all agencies build their keys from.

    Attributes:
        b_basis: (p, p) unit-spectral-norm base for feature-side keys.
        c_basis: (3, 3) unit-spectral-norm base for response-side keys.
        degree: polynomial degree for feature-side keys.
    """

    b_basis: np.ndarray
    c_basis: np.ndarray
    degree: int

    def __post_init__(self):
        if self.b_basis.shape[0] != self.b_basis.shape[1]:
            raise DimMismatch("b_basis must be square")
        if self.c_basis.shape != (3, 3):
            raise DimMismatch("c_basis must be 3x3")
        if not 1 <= self.degree <= MAX_KEY_DEGREE:
            raise DimMismatch(
                f"degree must be in [1, {MAX_KEY_DEGREE}], got {self.degree}"
            )


@dataclass
class AgencyKeys:
    """One agency's private mask material.

    Attributes:
        agency_id: 1-based agency identifier.
        b_coeffs: coefficients of the feature-side key polynomial.
        c_coeffs: coefficients of the response-side key polynomial.
        b_key: materialized feature-side key (p, p).
        c_key: materialized response-side key (3, 3).
        a_blocks_for: origin id -> block-diagonal orthogonal mask this
            agency applies to that origin's rows.
        block_size: row-block size the orthogonal masks were drawn with.
    """

    agency_id: int
    b_coeffs: np.ndarray
    c_coeffs: np.ndarray
    b_key: np.ndarray
    c_key: np.ndarray
    a_blocks_for: dict
    block_size: int
    decrypt_b_key: np.ndarray = field(default=None, repr=False)
    decrypt_c_key: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.decrypt_b_key is None:
            self.decrypt_b_key = self.b_key
        if self.decrypt_c_key is None:
            self.decrypt_c_key = self.c_key


def _screened_base(dim, degree, rng):
    """Draw one unit-spectral-norm Gaussian base passing all quality screens.

    Screens, in order of cost:
      1. condition number of the raw draw <= max(100, 4*dim);
      2. eigenvalue moduli within EV_RATIO_MIN of the largest;
      3. normalized eigenvector matrix condition <= EIGVEC_COND_MAX;
      4. enough random key polynomials achieve a small spectral spread.

    For dimensions beyond ~40 the fixed thresholds become too strict for
    Gaussian draws, so screens 2 and 3 relax with the dimension.
    """
    cond_cap = max(100.0, 4.0 * dim)
    ev_ratio = min(EV_RATIO_MIN, 6.0 / dim)
    eigvec_cap = max(EIGVEC_COND_MAX, 1.5 * dim)
    for _ in range(BASE_ATTEMPTS):
        m = rng.standard_normal((dim, dim))
        if np.linalg.cond(m) > cond_cap:
            continue
        eigvals, eigvecs = np.linalg.eig(m)
        moduli = np.abs(eigvals)
        if moduli.min() < ev_ratio * moduli.max():
            continue
        eigvecs = eigvecs / np.linalg.norm(eigvecs, axis=0)
        if np.linalg.cond(eigvecs) > eigvec_cap:
            continue
        spectral = np.linalg.norm(m, 2)
        lam = eigvals / spectral
        hits = 0
        for _ in range(PROBE_COUNT):
            spread = _poly_spread(rng.standard_normal(degree), lam)
            if spread <= PROBE_SPREAD:
                hits += 1
        if hits < PROBE_MIN_HITS:
            continue
        return m / spectral
    raise ResampleExhausted(
        f"no acceptable {dim}x{dim} base in {BASE_ATTEMPTS} attempts"
    )


def _poly_spread(coeffs, eigvals):
    """max/min of |sum_j coeffs[j-1] z**j| over the base eigenvalues."""
    vals = np.abs(np.polyval(np.append(coeffs[::-1], 0.0), eigvals))
    lo = vals.min()
    if lo == 0.0:
        return np.inf
    return vals.max() / lo


def derive_bases(shared_seed, p, degree=None):
    """Derive the shared mask bases from the agencies' common seed.

    Deterministic: every agency calling with the same seed and shape gets
    bit-identical bases, without exchanging any key material.

    Args:
        shared_seed: non-negative integer seed agreed by all agencies.
        p: number of features (feature-side base is p x p).
        degree: feature-side key degree; defaults to ``min(p, 16)``.

    Returns:
        MaskBases with unit-spectral-norm bases.
    """
    if p < 1:
        raise DimMismatch(f"need at least one feature, got p={p}")
    degree = default_degree(p) if degree is None else int(degree)
    if not 1 <= degree <= MAX_KEY_DEGREE:
        raise DimMismatch(
            f"degree must be in [1, {MAX_KEY_DEGREE}], got {degree}"
        )
    rng = np.random.default_rng([int(shared_seed) % 2**64, _TAG_BASES])
    b_basis = _screened_base(p, degree, rng)
    c_basis = _screened_base(3, RESPONSE_KEY_DEGREE, rng)
    return MaskBases(b_basis=b_basis, c_basis=c_basis, degree=degree)


def draw_commuting_key(basis, degree, rng, num_agencies, sigma_coeff=1.0,
                       cond_max=KEY_COND_MAX):
    """Draw one key: coefficients plus the materialized matrix.

    Coefficients are i.i.d. ``N(0, sigma_coeff**2)``. A draw is preferred
    when its polynomial's spectral spread is below the per-agency share of
    ``PRODUCT_SPREAD_BUDGET``; after ``KEY_ATTEMPTS`` draws the smallest
    spread seen is used instead. The materialized key must satisfy the
    condition-number cap or :class:`ResampleExhausted` is raised.
    """
    spread_cap = PRODUCT_SPREAD_BUDGET ** (1.0 / max(1, num_agencies))
    eigvals = np.linalg.eigvals(basis)
    best = None
    for _ in range(KEY_ATTEMPTS):
        coeffs = rng.normal(0.0, sigma_coeff, size=degree)
        spread = _poly_spread(coeffs, eigvals)
        if best is None or spread < best[0]:
            best = (spread, coeffs)
        if spread <= spread_cap:
            key = commute_materialize(basis, coeffs)
            if np.linalg.cond(key) <= cond_max:
                return coeffs, key
    coeffs = best[1]
    key = commute_materialize(basis, coeffs)
    if np.linalg.cond(key) <= cond_max:
        return coeffs, key
    raise ResampleExhausted(
        f"no key with condition <= {cond_max:g} in {KEY_ATTEMPTS} attempts"
    )


def gen_agency_keys(bases, agency_id, row_counts, block_size, rng,
                    sigma_coeff=1.0):
    """Generate one agency's full key material.

    Args:
        bases: shared MaskBases.
        agency_id: 1-based id of this agency.
        row_counts: rows held by every agency, in agency order; the agency
            draws an orthogonal mask for each origin it will handle.
        block_size: row-block size for the orthogonal masks.
        rng: this agency's private generator.
        sigma_coeff: std-dev of the key polynomial coefficients.
    """
    num_agencies = len(row_counts)
    if not 1 <= agency_id <= num_agencies:
        raise DimMismatch(
            f"agency_id {agency_id} outside 1..{num_agencies}"
        )
    b_coeffs, b_key = draw_commuting_key(
        bases.b_basis, bases.degree, rng, num_agencies, sigma_coeff
    )
    c_coeffs, c_key = draw_commuting_key(
        bases.c_basis, RESPONSE_KEY_DEGREE, rng, num_agencies, sigma_coeff
    )
    a_blocks_for = {
        origin + 1: random_ortho_blocks(n_rows, block_size, rng)
        for origin, n_rows in enumerate(row_counts)
    }
    return AgencyKeys(
        agency_id=agency_id,
        b_coeffs=b_coeffs,
        c_coeffs=c_coeffs,
        b_key=b_key,
        c_key=c_key,
        a_blocks_for=a_blocks_for,
        block_size=block_size,
    )


def make_responses(x, y, mode, rng, delta=None):
    """Build the three-column response bundle sent through the protocol.

    Column 0 is the real response. Column 1 is the verification response:
    row sums of the (offset) features for a linear fit, so its decrypted
    coefficients must all equal one, and the zero vector for a ridge fit,
    so they must all equal zero. Column 2 is a standard-normal decoy.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2:
        raise DimMismatch(f"x must be 2-d, got shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise DimMismatch(
            f"y has shape {y.shape}, expected ({x.shape[0]},)"
        )
    if mode == "linear":
        shifted = x if delta is None else x + delta
        verify = shifted.sum(axis=1)
    elif mode == "ridge":
        verify = np.zeros(x.shape[0])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    decoy = rng.standard_normal(x.shape[0])
    return np.column_stack([y, verify, decoy])


def key_fingerprint(keys):
    """Hex digest of a key's public structure (never its secret values).

    Covers the agency id, key dimensions, degrees, block size and the block
    layout per origin — enough for an audit log to confirm two runs used
    the same shapes, while revealing nothing about coefficients.
    """
    h = hashlib.sha256()
    h.update(b"maskreg-key-v1")
    h.update(int(keys.agency_id).to_bytes(2, "little"))
    h.update(int(keys.block_size).to_bytes(4, "little"))
    h.update(keys.b_key.shape[0].to_bytes(4, "little"))
    h.update(len(keys.b_coeffs).to_bytes(2, "little"))
    h.update(len(keys.c_coeffs).to_bytes(2, "little"))
    for origin in sorted(keys.a_blocks_for):
        blocks = keys.a_blocks_for[origin]
        h.update(int(origin).to_bytes(2, "little"))
        for start, stop in blocks.ranges():
            h.update(int(start).to_bytes(4, "little"))
            h.update(int(stop).to_bytes(4, "little"))
    return h.hexdigest()


def agency_rng(master_seed, agency_id):
    """Private generator for one agency, disjoint from all other streams."""
    return np.random.default_rng(
        [int(master_seed) % 2**64, _TAG_AGENCY, int(agency_id)]
    )
