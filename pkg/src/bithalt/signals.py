"""Online per-step signals: token entropy and the two stability proxies.

All functions here are pure; the engine feeds them the accumulated chunk and
hidden-state histories after every decoding step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidDistributionError, InvalidInputError

# Tolerance on |sum(p) - 1| for probability vectors.
DIST_SUM_TOL = 1e-6

# Added to the 2-norm before normalizing hidden vectors; small enough to be
# invisible at unit scale, large enough that a zero vector maps to zero
# (cosine contribution 0) instead of dividing by zero.
HIDDEN_NORM_EPS = 1e-8

# Both chunks of a consecutive pair must be at least this long (in Unicode
# code points, after stripping leading/trailing whitespace) to count toward
# trace stability.
MIN_CHUNK_CHARS = 8


@dataclass(frozen=True)
class StepSignals:
    """Raw observables for one decoding step.

    Exactly one of ``entropy`` (precomputed, nats) and ``distribution``
    (a probability vector over the vocabulary) must be provided.
    """

    chunk_text: str
    tokens_in_chunk: int
    entropy: Optional[float] = None
    distribution: Optional[Sequence[float]] = None
    hidden: Optional[Sequence[float]] = None
    eos: bool = False

    def __post_init__(self):
        if (self.entropy is None) == (self.distribution is None):
            raise InvalidInputError(
                "exactly one of entropy and distribution must be set"
            )
        if self.entropy is not None and not math.isfinite(self.entropy):
            raise InvalidInputError("entropy must be finite")

    def step_entropy(self) -> float:
        """Entropy in nats, computing it from the distribution if needed."""
        if self.entropy is not None:
            return self.entropy
        return entropy(self.distribution)


@dataclass(frozen=True)
class SignalReadout:
    """One step's signal triple as consumed by the calibrator.

    ``hidden_stability`` is clipped to [0, 1]; the unclipped consecutive-cosine
    mean is kept in ``hidden_stability_raw`` for diagnostics.
    """

    entropy: float
    trace_stability: float
    hidden_stability: float
    hidden_stability_raw: float

    @classmethod
    def from_histories(cls, step_entropy, chunks, hiddens) -> "SignalReadout":
        raw = hidden_stability(hiddens)
        return cls(
            entropy=step_entropy,
            trace_stability=trace_stability(chunks),
            hidden_stability=min(max(raw, 0.0), 1.0),
            hidden_stability_raw=raw,
        )


def entropy(distribution: Sequence[float]) -> float:
    """Shannon entropy in nats of a probability vector.

    Zero-probability entries contribute zero. Raises
    InvalidDistributionError on negative entries or a sum off from 1 by
    more than DIST_SUM_TOL.
    """
    p = np.asarray(distribution, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDistributionError("distribution must be a non-empty 1-d vector")
    if not np.all(np.isfinite(p)):
        raise InvalidDistributionError("distribution contains non-finite entries")
    if np.any(p < 0):
        raise InvalidDistributionError("distribution contains negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > DIST_SUM_TOL:
        raise InvalidDistributionError(f"distribution sums to {total}, not 1")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def trace_stability(chunks: Sequence[str]) -> float:
    """Fraction of consecutive long-enough chunk pairs that are identical.

    Chunks are compared after stripping leading/trailing whitespace; a pair is
    eligible only if both stripped chunks have at least MIN_CHUNK_CHARS
    characters. With fewer than two eligible pairs the score falls back to 1.0
    (this includes the empty history and, deliberately, a history with exactly
    one eligible pair).
    """
    stripped = [c.strip() for c in chunks]
    eligible = 0
    equal = 0
    for prev, cur in zip(stripped, stripped[1:]):
        if len(prev) >= MIN_CHUNK_CHARS and len(cur) >= MIN_CHUNK_CHARS:
            eligible += 1
            if prev == cur:
                equal += 1
    if eligible < 2:
        return 1.0
    return equal / eligible


def hidden_stability(hiddens: Sequence[Sequence[float]]) -> float:
    """Mean consecutive cosine similarity of normalized hidden vectors.

    Vectors are normalized by (2-norm + HIDDEN_NORM_EPS); a zero vector
    therefore contributes cosine 0 rather than erroring. Returns 1.0 when
    fewer than two vectors are available. The result may be negative; the
    caller clips before weighting.
    """
    if len(hiddens) < 2:
        return 1.0
    vecs = [np.asarray(h, dtype=float) for h in hiddens]
    dim = vecs[0].shape
    for v in vecs:
        if v.ndim != 1 or v.shape != dim:
            raise InvalidInputError("hidden vectors must share one dimension")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("hidden vector contains non-finite entries")
    normed = [v / (np.linalg.norm(v) + HIDDEN_NORM_EPS) for v in vecs]
    cosines = [float(a @ b) for a, b in zip(normed, normed[1:])]
    return sum(cosines) / len(cosines)
