"""Protocol state and the single-step operations agencies perform.

The data flow for K agencies, a coordinating cloud and feature matrices
X_1..X_K (row-partitioned across agencies):

1. every agency encrypts its own shard: rows are mixed by a private
   block-diagonal orthogonal mask, columns by its commuting feature key;
   the three-column response bundle is masked the same way with the
   response key;
2. shards travel around a ring so every *other* agency stacks its own
   masks on top; the completed shards go to the cloud;
3. the cloud solves the normal equations on the masked aggregate and gets
   a masked estimate;
4. the masked estimate travels one decryption round per agency; what
   comes out is the plaintext estimate for all three response columns;
5. anyone can then check the verification column: all ones for a linear
   fit, all zeros for a ridge fit. Any deviation beyond tolerance means
   some step was corrupted.

Orchestration across a transport lives in :mod:`maskreg.runner`; functions
here are pure single steps so they can be tested (and attacked) directly.
"""

from dataclasses import dataclass

import numpy as np

from . import keygen
from .errors import (
    DimMismatch,
    DoubleDecrypt,
    DuplicatePass,
    ProtocolOrderViolation,
    SingularResult,
)
from .matrix_core import solve_spd, split_block_sizes

MODES = ("linear", "ridge")

#: Recognized tamper actions; "honest" is the no-op baseline.
TAMPER_ACTIONS = (
    "honest",
    "skip_pseudo_response",
    "non_commutative_key",
    "perturb_result",
    "wrong_decrypt",
)

#: Default max-norm tolerance when checking the verification column.
VERIFY_TOL = 1e-6


@dataclass(frozen=True)
class TamperPlan:
    """One deliberate protocol violation to inject into a run.

    action: which contract to break (see TAMPER_ACTIONS);
    agency: 1-based id of the misbehaving agency (ignored for
        ``perturb_result``, which is a cloud-side deviation);
    magnitude: size of the additive corruption for ``perturb_result``.
    """

    action: str = "honest"
    agency: int = 1
    magnitude: float = 0.01

    def __post_init__(self):
        if self.action not in TAMPER_ACTIONS:
            raise ValueError(f"unknown tamper action {self.action!r}")


@dataclass
class EncryptedShard:
    """One origin's masked rows while they travel the ring."""

    origin: int
    x_star: np.ndarray
    y_star: np.ndarray
    applied: tuple
    round: int = 0


@dataclass
class EncryptedAggregate:
    """Everything the cloud sees: stacked masked shards plus row layout."""

    x_star: np.ndarray
    y_star: np.ndarray
    origin_rows: tuple
    block_ranges: tuple
    btb: np.ndarray = None


@dataclass
class EstimateMatrix:
    """(p, 3) estimate for [response, verification, decoy] columns."""

    values: np.ndarray
    stage: str
    applied: tuple = ()

    def beta(self):
        """The real-response coefficient column."""
        return self.values[:, 0]


@dataclass(frozen=True)
class VerifyReport:
    verdict: str
    max_deviation: float
    tolerance: float

    @property
    def accepted(self):
        return self.verdict == "accepted"


class AgencyContext:
    """One agency's private state for a protocol run."""

    def __init__(self, agency_id, x, y, keys, bases, mode, rng, delta=None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.agency_id = agency_id
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        if self.x.ndim != 2 or self.y.shape != (self.x.shape[0],):
            raise DimMismatch(
                f"agency {agency_id}: x {self.x.shape} / y {self.y.shape}"
            )
        self.keys = keys
        self.bases = bases
        self.mode = mode
        self.rng = rng
        self.delta = delta
        self.responses = keygen.make_responses(self.x, self.y, mode, rng,
                                               delta=delta)

    @property
    def n_rows(self):
        return self.x.shape[0]

    @property
    def num_agencies(self):
        return len(self.keys.a_blocks_for)


def local_encrypt(ctx):
    """First masking step an origin applies to its own shard."""
    shifted = ctx.x if ctx.delta is None else ctx.x + ctx.delta
    blocks = ctx.keys.a_blocks_for[ctx.agency_id]
    x_star = blocks.apply(shifted) @ ctx.keys.b_key
    y_star = blocks.apply(ctx.responses) @ ctx.keys.c_key
    return EncryptedShard(
        origin=ctx.agency_id,
        x_star=x_star,
        y_star=y_star,
        applied=(ctx.agency_id,),
        round=0,
    )


def pass_encrypt(ctx, shard):
    """Stack this agency's masks onto a shard passing through the ring."""
    if ctx.agency_id in shard.applied:
        raise DuplicatePass(
            f"agency {ctx.agency_id} already masked shard {shard.origin}"
        )
    blocks = ctx.keys.a_blocks_for[shard.origin]
    if blocks.n_rows != shard.x_star.shape[0]:
        raise DimMismatch(
            f"agency {ctx.agency_id} mask covers {blocks.n_rows} rows, "
            f"shard {shard.origin} has {shard.x_star.shape[0]}"
        )
    return EncryptedShard(
        origin=shard.origin,
        x_star=blocks.apply(shard.x_star) @ ctx.keys.b_key,
        y_star=blocks.apply(shard.y_star) @ ctx.keys.c_key,
        applied=shard.applied + (ctx.agency_id,),
        round=shard.round + 1,
    )


def assemble_aggregate(shards, num_agencies, block_size):
    """Stack completed shards (in origin order) into the cloud's view."""
    by_origin = {s.origin: s for s in shards}
    if sorted(by_origin) != list(range(1, num_agencies + 1)):
        raise ProtocolOrderViolation(
            f"expected one shard per agency 1..{num_agencies}, "
            f"got origins {sorted(by_origin)}"
        )
    for s in shards:
        if len(s.applied) != num_agencies:
            raise ProtocolOrderViolation(
                f"shard {s.origin} was masked by {len(s.applied)} of "
                f"{num_agencies} agencies"
            )
    xs, ys, origin_rows, block_ranges = [], [], [], []
    offset = 0
    for origin in range(1, num_agencies + 1):
        s = by_origin[origin]
        n = s.x_star.shape[0]
        xs.append(s.x_star)
        ys.append(s.y_star)
        origin_rows.append((offset, offset + n))
        for size in split_block_sizes(n, block_size):
            block_ranges.append((offset, offset + size))
            offset += size
    return EncryptedAggregate(
        x_star=np.vstack(xs),
        y_star=np.vstack(ys),
        origin_rows=tuple(origin_rows),
        block_ranges=tuple(block_ranges),
    )


def cloud_fit(agg, mode, lam=0.0, rows=None):
    """Solve the masked normal equations; the result is still masked.

    For ridge, the released Gram of the stacked feature keys is the exact
    regularizer that makes the masked solve agree with a plaintext ridge
    solve after decryption, so ``agg.btb`` must be present.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    x = agg.x_star if rows is None else agg.x_star[rows]
    y = agg.y_star if rows is None else agg.y_star[rows]
    gram = x.T @ x
    if mode == "ridge":
        if lam < 0.0:
            raise ValueError(f"lambda must be >= 0, got {lam}")
        if agg.btb is None:
            raise ProtocolOrderViolation(
                "ridge fit requested before the key Gram was released"
            )
        gram = gram + lam * agg.btb
    values = solve_spd(gram, x.T @ y)
    return EstimateMatrix(values=values, stage="encrypted", applied=())


def decrypt_round(ctx, est):
    """Apply one agency's decryption: values <- B_i @ values @ C_i^{-1}."""
    if ctx.agency_id in est.applied:
        raise DoubleDecrypt(
            f"agency {ctx.agency_id} already ran its decryption round"
        )
    try:
        right = np.linalg.solve(ctx.keys.decrypt_c_key.T, est.values.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularResult(f"response key is singular: {exc}") from exc
    values = ctx.keys.decrypt_b_key @ right
    applied = est.applied + (ctx.agency_id,)
    stage = "plain" if len(applied) == ctx.num_agencies else "partially_decrypted"
    return EstimateMatrix(values=values, stage=stage, applied=applied)


def gram_release_step(ctx, m):
    """One round-robin step of releasing the stacked-key Gram: B_i' m B_i."""
    return ctx.keys.b_key.T @ m @ ctx.keys.b_key


def residual_gram_decrypt_step(ctx, s):
    """One conjugation step that strips this agency's response key from a
    masked residual Gram: C_i^{-T} s C_i^{-1}."""
    c = ctx.keys.decrypt_c_key
    try:
        half = np.linalg.solve(c.T, s)
        return np.linalg.solve(c.T, half.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularResult(f"response key is singular: {exc}") from exc


def verify_estimate(est, mode, tol=VERIFY_TOL):
    """Check the verification column of a fully decrypted estimate.

    Linear fits regress the row sums of the (offset) features, so the
    verification coefficients must all be 1; ridge fits regress the zero
    vector, so they must all be 0. A deviation beyond ``tol`` in max-norm
    is ruled tampered.
    """
    if est.stage != "plain":
        raise ProtocolOrderViolation(
            f"cannot verify an estimate in stage {est.stage!r}"
        )
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    target = 1.0 if mode == "linear" else 0.0
    max_dev = float(np.max(np.abs(est.values[:, 1] - target)))
    verdict = "accepted" if max_dev <= tol else "tampered"
    return VerifyReport(verdict=verdict, max_deviation=max_dev, tolerance=tol)


def inject_tamper(contexts, plan):
    """Mutate agency state according to a tamper plan.

    ``perturb_result`` is cloud-side and handled by the runner; the other
    actions corrupt the named agency in place:

    - ``skip_pseudo_response``: replaces the verification response with
      noise, i.e. the agency never computes the pseudo-response it owes;
    - ``non_commutative_key``: swaps the feature key for a random invertible
      matrix that is *not* a polynomial in the shared base;
    - ``wrong_decrypt``: the agency decrypts with a fresh key instead of
      the one it encrypted with.
    """
    if plan.action in ("honest", "perturb_result"):
        return
    ctx = _find_agency(contexts, plan.agency)
    if plan.action == "skip_pseudo_response":
        ctx.responses[:, 1] = ctx.rng.standard_normal(ctx.n_rows)
    elif plan.action == "non_commutative_key":
        rogue = _rogue_invertible(ctx.keys.b_key.shape[0], ctx.rng)
        ctx.keys.b_key = rogue
        ctx.keys.decrypt_b_key = rogue
    elif plan.action == "wrong_decrypt":
        _, wrong_b = _fresh_key(ctx)
        ctx.keys.decrypt_b_key = wrong_b
    else:  # pragma: no cover - guarded by TamperPlan.__post_init__
        raise ValueError(f"unknown tamper action {plan.action!r}")


def _find_agency(contexts, agency_id):
    for ctx in contexts:
        if ctx.agency_id == agency_id:
            return ctx
    raise ValueError(f"no agency with id {agency_id}")


def _rogue_invertible(dim, rng):
    """Random well-conditioned matrix; a fresh Gaussian draw is not a
    polynomial in the shared base with probability one."""
    for _ in range(100):
        m = rng.standard_normal((dim, dim))
        if np.linalg.cond(m) <= 1e3:
            return m / np.linalg.norm(m, 2)
    raise SingularResult("could not draw an invertible rogue key")


def _fresh_key(ctx):
    # A fresh polynomial over the shared base still commutes with every
    # honest key, which is the subtle case: decryption "works"
    # algebraically but with the wrong coefficients.
    return keygen.draw_commuting_key(
        ctx.bases.b_basis, ctx.bases.degree, ctx.rng, ctx.num_agencies
    )
