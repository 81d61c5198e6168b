"""Drives complete protocol runs over a transport.

The shard phase (the only one moving large frames) runs one thread per
agency; the release, decryption and cross-validation chains are strictly
sequential rings, so they run single-threaded in deterministic order. All
messages cross the configured transport as encoded frames even when
everything lives in one process — the bus and the TCP mesh carry identical
bytes.
"""

import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import keygen, protocol
from .errors import (
    DimMismatch,
    FoldBlockMisaligned,
    ProtocolOrderViolation,
    TooManyAgencies,
)
from .model import auc, mse
from .transport import (
    MSG_ESTIMATE,
    MSG_GRAM_RELEASE,
    MSG_RESIDUAL_GRAM,
    MSG_SHARD,
    MAX_PARTICIPANTS,
    Frame,
    make_transport,
)

logger = logging.getLogger(__name__)

CLOUD = 0


@dataclass(frozen=True)
class RunConfig:
    """Knobs for a protocol run; defaults give a two-agency linear fit."""

    k: int = 2
    mode: str = "linear"
    lam: float = 1.0
    lambda_grid: tuple = (0.01, 0.1, 1.0, 10.0)
    folds: int = 5
    block_size: int = 16
    degree: int = None
    sigma_coeff: float = 1.0
    delta: float = None
    seed: int = 0
    transport: str = "bus"
    verify_tol: float = protocol.VERIFY_TOL
    tamper: protocol.TamperPlan = field(default_factory=protocol.TamperPlan)
    rings: tuple = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"need at least one agency, got k={self.k}")
        if self.k >= MAX_PARTICIPANTS:
            raise TooManyAgencies(
                f"wire format addresses at most {MAX_PARTICIPANTS - 1} "
                f"agencies, got k={self.k}"
            )
        if self.mode not in protocol.MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.folds < 2:
            raise ValueError(f"need at least two folds, got {self.folds}")


def ring_orders(k, rings=None):
    """Per-origin holder orders; default is rotation starting at the origin.

    Each order must be a permutation of 1..k that starts with the origin
    itself, so the origin always performs the first masking step.
    """
    if rings is None:
        return tuple(
            tuple((i + j - 1) % k + 1 for j in range(k))
            for i in range(1, k + 1)
        )
    rings = tuple(tuple(r) for r in rings)
    if len(rings) != k:
        raise ProtocolOrderViolation(f"expected {k} ring orders, got {len(rings)}")
    for i, order in enumerate(rings, start=1):
        if sorted(order) != list(range(1, k + 1)):
            raise ProtocolOrderViolation(
                f"ring for origin {i} is not a permutation of 1..{k}: {order}"
            )
        if order[0] != i:
            raise ProtocolOrderViolation(
                f"ring for origin {i} must start with {i}, got {order[0]}"
            )
    return rings


def build_contexts(datasets, config):
    """Derive bases, generate every agency's keys and build their contexts."""
    if len(datasets) != config.k:
        raise DimMismatch(
            f"config says k={config.k} but {len(datasets)} datasets given"
        )
    p = datasets[0][0].shape[1]
    for x, _ in datasets:
        if x.shape[1] != p:
            raise DimMismatch("all agencies must hold the same features")
    bases = keygen.derive_bases(config.seed, p, degree=config.degree)
    row_counts = [x.shape[0] for x, _ in datasets]
    contexts = []
    for i, (x, y) in enumerate(datasets, start=1):
        rng = keygen.agency_rng(config.seed, i)
        keys = keygen.gen_agency_keys(
            bases, i, row_counts, config.block_size, rng,
            sigma_coeff=config.sigma_coeff,
        )
        delta = None
        if config.delta is not None and config.delta > 0.0:
            delta = rng.normal(0.0, config.delta, size=x.shape)
        contexts.append(
            protocol.AgencyContext(
                i, x, y, keys, bases, config.mode, rng, delta=delta
            )
        )
    protocol.inject_tamper(contexts, config.tamper)
    return contexts, bases


def _shard_frame(shard, round_):
    return Frame(
        msg_type=MSG_SHARD,
        origin=shard.origin,
        round=round_,
        applied=tuple(shard.applied),
        matrices=(shard.x_star, shard.y_star),
    )


def _shard_from_frame(frame):
    return protocol.EncryptedShard(
        origin=frame.origin,
        x_star=frame.matrices[0],
        y_star=frame.matrices[1],
        applied=tuple(frame.applied),
        round=frame.round,
    )


def _agency_shard_work(ctx, transport, rings, k):
    """One agency's shard phase: encrypt its own, pass every visitor on."""
    me = ctx.agency_id
    own_ring = rings[me - 1]
    shard = protocol.local_encrypt(ctx)
    dest = own_ring[1] if k > 1 else CLOUD
    transport.send(me, dest, _shard_frame(shard, 1 if k > 1 else k))
    # Visiting shards, in deterministic (round, origin) order.
    visits = sorted(
        (r, origin)
        for origin in range(1, k + 1)
        for r in range(1, k)
        if rings[origin - 1][r] == me
    )
    for r, origin in visits:
        frame = transport.recv(rings[origin - 1][r - 1], me)
        if frame.msg_type != MSG_SHARD or frame.origin != origin:
            raise ProtocolOrderViolation(
                f"agency {me} expected shard {origin}, got type "
                f"{frame.msg_type} origin {frame.origin}"
            )
        shard = protocol.pass_encrypt(ctx, _shard_from_frame(frame))
        if r + 1 < k:
            transport.send(me, rings[origin - 1][r + 1], _shard_frame(shard, r + 1))
        else:
            transport.send(me, CLOUD, _shard_frame(shard, k))


def run_pre_modeling(contexts, transport, rings=None):
    """Execute the masking ring and return the cloud's assembled view."""
    k = len(contexts)
    rings = ring_orders(k, rings)
    errors = []

    def work(ctx):
        try:
            _agency_shard_work(ctx, transport, rings, k)
        except Exception as exc:  # propagated after join
            errors.append((ctx.agency_id, exc))

    threads = [
        threading.Thread(target=work, args=(ctx,), daemon=True)
        for ctx in contexts
    ]
    for t in threads:
        t.start()
    shards = []
    for origin in range(1, k + 1):
        last_holder = rings[origin - 1][-1]
        frame = transport.recv(last_holder, CLOUD)
        if frame.msg_type != MSG_SHARD or frame.origin != origin:
            raise ProtocolOrderViolation(
                f"cloud expected completed shard {origin}, got type "
                f"{frame.msg_type} origin {frame.origin}"
            )
        shards.append(_shard_from_frame(frame))
    for t in threads:
        t.join(timeout=60.0)
    if errors:
        errors.sort(key=lambda e: e[0])
        raise errors[0][1]
    block_size = contexts[0].keys.block_size
    return protocol.assemble_aggregate(shards, k, block_size)


def release_btb(contexts, transport):
    """Round-robin release of the stacked feature-key Gram, B^T B."""
    k = len(contexts)
    p = contexts[0].keys.b_key.shape[0]
    transport.send(
        CLOUD, 1,
        Frame(MSG_GRAM_RELEASE, CLOUD, 0, (), (np.eye(p),)),
    )
    for a in range(1, k + 1):
        prev = a - 1 if a > 1 else CLOUD
        frame = transport.recv(prev, a)
        if frame.msg_type != MSG_GRAM_RELEASE:
            raise ProtocolOrderViolation(
                f"agency {a} expected a Gram release frame, got {frame.msg_type}"
            )
        released = protocol.gram_release_step(contexts[a - 1], frame.matrices[0])
        nxt = a + 1 if a < k else CLOUD
        transport.send(
            a, nxt,
            Frame(MSG_GRAM_RELEASE, a, frame.round + 1, (), (released,)),
        )
    out = transport.recv(k, CLOUD)
    return out.matrices[0]


def run_decrypt(contexts, transport, est):
    """Send the masked estimate around the decryption ring; returns plain."""
    k = len(contexts)
    transport.send(
        CLOUD, 1,
        Frame(MSG_ESTIMATE, CLOUD, 0, tuple(est.applied), (est.values,)),
    )
    for a in range(1, k + 1):
        prev = a - 1 if a > 1 else CLOUD
        frame = transport.recv(prev, a)
        if frame.msg_type != MSG_ESTIMATE:
            raise ProtocolOrderViolation(
                f"agency {a} expected an estimate frame, got {frame.msg_type}"
            )
        current = protocol.EstimateMatrix(
            values=frame.matrices[0],
            stage="encrypted" if not frame.applied else "partially_decrypted",
            applied=tuple(frame.applied),
        )
        done = protocol.decrypt_round(contexts[a - 1], current)
        nxt = a + 1 if a < k else CLOUD
        transport.send(
            a, nxt,
            Frame(MSG_ESTIMATE, a, frame.round + 1, tuple(done.applied),
                  (done.values,)),
        )
    final = transport.recv(k, CLOUD)
    stage = "plain" if len(final.applied) == k else "partially_decrypted"
    return protocol.EstimateMatrix(
        values=final.matrices[0], stage=stage, applied=tuple(final.applied)
    )


def fold_rows(agg, folds):
    """Assign whole mask blocks to folds, round-robin within each agency.

    Every fold therefore contains complete blocks only (so row masks never
    straddle a fold boundary) and every agency contributes blocks to every
    fold. Raises :class:`FoldBlockMisaligned` when an agency has fewer
    blocks than folds.
    """
    assignments = [[] for _ in range(folds)]
    for origin, (lo, hi) in enumerate(agg.origin_rows, start=1):
        agency_blocks = [
            (a, b) for a, b in agg.block_ranges if a >= lo and b <= hi
        ]
        if len(agency_blocks) < folds:
            raise FoldBlockMisaligned(
                f"agency {origin} has {len(agency_blocks)} mask blocks, "
                f"fewer than {folds} folds; lower the block size or folds"
            )
        for j, (a, b) in enumerate(agency_blocks):
            assignments[j % folds].extend(range(a, b))
    return [np.asarray(rows, dtype=np.intp) for rows in assignments]


def _residual_gram_ring(contexts, transport, s_masked, tag):
    """Conjugation-decrypt a masked 3x3 residual Gram around the ring."""
    k = len(contexts)
    transport.send(
        CLOUD, 1, Frame(MSG_RESIDUAL_GRAM, CLOUD, tag, (), (s_masked,))
    )
    for a in range(1, k + 1):
        prev = a - 1 if a > 1 else CLOUD
        frame = transport.recv(prev, a)
        if frame.msg_type != MSG_RESIDUAL_GRAM or frame.round != tag:
            raise ProtocolOrderViolation(
                f"agency {a} expected residual Gram {tag}, got type "
                f"{frame.msg_type} round {frame.round}"
            )
        stripped = protocol.residual_gram_decrypt_step(
            contexts[a - 1], frame.matrices[0]
        )
        nxt = a + 1 if a < k else CLOUD
        transport.send(a, nxt, Frame(MSG_RESIDUAL_GRAM, a, tag, (), (stripped,)))
    return transport.recv(k, CLOUD).matrices[0]


@dataclass
class RunReport:
    """Everything a run produces, ready to serialize."""

    config: dict
    protocol_info: dict
    estimate: np.ndarray
    verify: protocol.VerifyReport
    metrics: dict
    timings_ms: dict
    cv: dict = None

    def beta(self):
        return self.estimate[:, 0]

    def to_dict(self):
        out = {
            "config": self.config,
            "protocol": self.protocol_info,
            "estimate": [[float(v) for v in row] for row in self.estimate],
            "beta": [float(v) for v in self.estimate[:, 0]],
            "verify": {
                "verdict": self.verify.verdict,
                "max_deviation": float(self.verify.max_deviation),
                "tolerance": float(self.verify.tolerance),
            },
            "metrics": self.metrics,
            "timings_ms": self.timings_ms,
        }
        if self.cv is not None:
            out["cv"] = self.cv
        return out


def _config_echo(config, p, n_total):
    return {
        "k": config.k,
        "mode": config.mode,
        "lambda": float(config.lam),
        "lambda_grid": [float(v) for v in config.lambda_grid],
        "folds": config.folds,
        "block_size": config.block_size,
        "degree": config.degree if config.degree is not None
        else keygen.default_degree(p),
        "sigma_coeff": float(config.sigma_coeff),
        "delta": None if config.delta is None else float(config.delta),
        "seed": int(config.seed),
        "transport": config.transport,
        "verify_tol": float(config.verify_tol),
        "tamper": {
            "action": config.tamper.action,
            "agency": config.tamper.agency,
            "magnitude": float(config.tamper.magnitude),
        },
        "n": int(n_total),
        "p": int(p),
    }


def _metrics(datasets, beta):
    x = np.vstack([x for x, _ in datasets])
    y = np.concatenate([y for _, y in datasets])
    scores = x @ beta
    out = {"mse": float(mse(y, scores))}
    if np.unique(y).size == 2:
        out["auc"] = float(auc(y, scores))
    return out


def run_protocol(datasets, config):
    """Full run: keygen, masking ring, cloud fit, decryption, verification."""
    t0 = time.perf_counter()
    timings = {}
    datasets = [(np.asarray(x, float), np.asarray(y, float)) for x, y in datasets]

    t = time.perf_counter()
    contexts, bases = build_contexts(datasets, config)
    timings["keygen"] = (time.perf_counter() - t) * 1e3

    participants = [CLOUD] + [c.agency_id for c in contexts]
    transport = make_transport(config.transport, participants)
    try:
        t = time.perf_counter()
        agg = run_pre_modeling(contexts, transport, config.rings)
        timings["masking"] = (time.perf_counter() - t) * 1e3

        t = time.perf_counter()
        if config.mode == "ridge":
            agg.btb = release_btb(contexts, transport)
        est = protocol.cloud_fit(agg, config.mode, lam=config.lam)
        if config.tamper.action == "perturb_result":
            est.values[0, 0] += config.tamper.magnitude
        timings["fit"] = (time.perf_counter() - t) * 1e3

        t = time.perf_counter()
        plain = run_decrypt(contexts, transport, est)
        timings["decrypt"] = (time.perf_counter() - t) * 1e3
    finally:
        transport.close()

    t = time.perf_counter()
    verify = protocol.verify_estimate(plain, config.mode, tol=config.verify_tol)
    timings["verify"] = (time.perf_counter() - t) * 1e3
    timings["total"] = (time.perf_counter() - t0) * 1e3

    p = datasets[0][0].shape[1]
    n_total = sum(x.shape[0] for x, _ in datasets)
    logger.info(
        "run complete: k=%d mode=%s n=%d p=%d verdict=%s",
        config.k, config.mode, n_total, p, verify.verdict,
    )
    return RunReport(
        config=_config_echo(config, p, n_total),
        protocol_info={
            "rounds": config.k,
            "transport": config.transport,
            "verification": "row-sum response" if config.mode == "linear"
            else "zero response",
        },
        estimate=plain.values,
        verify=verify,
        metrics=_metrics(datasets, plain.values[:, 0]),
        timings_ms=timings,
    )


def cross_validate_encrypted(datasets, config):
    """K-fold ridge cross-validation entirely on masked data.

    Fits every (lambda, fold) pair on the masked aggregate, decrypts only
    3x3 residual Grams (never per-fold estimates), picks the lambda with
    the smallest mean fold MSE (ties favor the smallest lambda), refits on
    all rows and decrypts that single final estimate.
    """
    if config.mode != "ridge":
        raise ValueError("cross-validation tunes lambda; use mode='ridge'")
    t0 = time.perf_counter()
    timings = {}
    datasets = [(np.asarray(x, float), np.asarray(y, float)) for x, y in datasets]

    t = time.perf_counter()
    contexts, bases = build_contexts(datasets, config)
    timings["keygen"] = (time.perf_counter() - t) * 1e3

    participants = [CLOUD] + [c.agency_id for c in contexts]
    transport = make_transport(config.transport, participants)
    try:
        t = time.perf_counter()
        agg = run_pre_modeling(contexts, transport, config.rings)
        agg.btb = release_btb(contexts, transport)
        timings["masking"] = (time.perf_counter() - t) * 1e3

        t = time.perf_counter()
        folds = fold_rows(agg, config.folds)
        n = agg.x_star.shape[0]
        grid = [float(v) for v in config.lambda_grid]
        fold_mse = np.zeros((len(grid), config.folds))
        for li, lam in enumerate(grid):
            for f, test_rows in enumerate(folds):
                mask = np.ones(n, dtype=bool)
                mask[test_rows] = False
                train_rows = np.flatnonzero(mask)
                fit = protocol.cloud_fit(agg, "ridge", lam=lam, rows=train_rows)
                resid = (agg.y_star[test_rows]
                         - agg.x_star[test_rows] @ fit.values)
                s_plain = _residual_gram_ring(
                    contexts, transport, resid.T @ resid,
                    tag=li * config.folds + f,
                )
                fold_mse[li, f] = s_plain[0, 0] / test_rows.size
        mean_mse = fold_mse.mean(axis=1)
        chosen_idx = int(np.argmin(mean_mse))  # argmin takes the first of ties
        chosen_lambda = grid[chosen_idx]
        timings["cv"] = (time.perf_counter() - t) * 1e3

        t = time.perf_counter()
        final = protocol.cloud_fit(agg, "ridge", lam=chosen_lambda)
        plain = run_decrypt(contexts, transport, final)
        timings["decrypt"] = (time.perf_counter() - t) * 1e3
    finally:
        transport.close()

    verify = protocol.verify_estimate(plain, "ridge", tol=config.verify_tol)
    timings["total"] = (time.perf_counter() - t0) * 1e3

    p = datasets[0][0].shape[1]
    n_total = sum(x.shape[0] for x, _ in datasets)
    cv_info = {
        "lambda_grid": grid,
        "fold_mse": [[float(v) for v in row] for row in fold_mse],
        "mean_mse": [float(v) for v in mean_mse],
        "chosen_lambda": float(chosen_lambda),
        "chosen_index": chosen_idx,
        "folds": config.folds,
    }
    logger.info(
        "cv complete: chose lambda=%g verdict=%s", chosen_lambda, verify.verdict
    )
    return RunReport(
        config=_config_echo(config, p, n_total),
        protocol_info={
            "rounds": config.k,
            "transport": config.transport,
            "verification": "zero response",
        },
        estimate=plain.values,
        verify=verify,
        metrics=_metrics(datasets, plain.values[:, 0]),
        timings_ms=timings,
        cv=cv_info,
    )
