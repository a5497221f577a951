"""Attention-map aggregation and per-token response scoring.

Maps arrive as dense arrays with a declared axis schema; scoring reduces the
head axis, then a block list, then takes the spatial max at each text-token
sequence position. The start-of-sequence position never saturates and is
excluded by the caller via token_positions / excluded_indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AxisMissing,
    DimMismatch,
    EmptyList,
    FormatError,
    IndexOutOfRange,
    KOutOfRange,
    RangeViolation,
)

HEAD_AXIS = "head"
SEQ_AXIS = "seq"
SPATIAL_AXES = ("h", "w")


@dataclass(frozen=True)
class AttentionTensor:
    """Dense non-negative array with named axes, e.g. (head, h, w, seq)."""

    data: np.ndarray
    axes: tuple

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        object.__setattr__(self, "data", data)
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        if data.ndim != len(axes):
            raise FormatError(
                f"{data.ndim}-D data with {len(axes)} declared axes {axes}"
            )
        if len(set(axes)) != len(axes):
            raise FormatError(f"duplicate axis names: {axes}")
        if any(d <= 0 for d in data.shape):
            raise FormatError(f"axis sizes must be positive: {data.shape}")
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise RangeViolation("attention values must be finite and >= 0")

    def axis(self, name: str) -> int:
        try:
            return self.axes.index(name)
        except ValueError:
            raise AxisMissing(f"axis {name!r} not in {self.axes}") from None


@dataclass(frozen=True)
class TokenScores:
    """Per-token attention response values, SOS already excluded."""

    values: tuple
    token_labels: tuple
    excluded_indices: tuple = ()
    slot_indices: tuple = None  # optional per-token owning slot (or None)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "token_labels", tuple(self.token_labels))
        object.__setattr__(self, "excluded_indices", tuple(self.excluded_indices))
        if self.slot_indices is not None:
            object.__setattr__(self, "slot_indices", tuple(self.slot_indices))
            if len(self.slot_indices) != len(self.values):
                raise DimMismatch("slot_indices length differs from values")
        if len(self.values) != len(self.token_labels):
            raise DimMismatch(
                f"{len(self.values)} values vs {len(self.token_labels)} labels"
            )
        for v in self.values:
            if not 0.0 <= v <= 1.0:
                raise RangeViolation(f"token score outside [0,1]: {v}")

    @property
    def n(self) -> int:
        return len(self.values)


def aggregate_heads(tensor: AttentionTensor) -> AttentionTensor:
    """Arithmetic mean over the head axis; remaining axes unchanged."""
    idx = tensor.axis(HEAD_AXIS)
    reduced = tensor.data.mean(axis=idx, dtype=np.float64).astype(np.float32)
    axes = tensor.axes[:idx] + tensor.axes[idx + 1 :]
    return AttentionTensor(data=reduced, axes=axes)


def aggregate_blocks(blocks) -> AttentionTensor:
    """Elementwise mean over a list of same-shaped block tensors."""
    blocks = list(blocks)
    if not blocks:
        raise EmptyList("no blocks to aggregate")
    first = blocks[0]
    for b in blocks[1:]:
        if b.axes != first.axes or b.data.shape != first.data.shape:
            raise DimMismatch(
                f"block shape {b.data.shape}/{b.axes} differs from "
                f"{first.data.shape}/{first.axes}"
            )
    stacked = np.stack([b.data for b in blocks])
    mean = stacked.mean(axis=0, dtype=np.float64).astype(np.float32)
    return AttentionTensor(data=mean, axes=first.axes)


def token_scores(
    aggregated: AttentionTensor,
    token_positions,
    labels,
    excluded_indices=(),
    slot_indices=None,
) -> TokenScores:
    """Spatial max at each token's sequence position of an (h, w, seq) map."""
    seq_axis = aggregated.axis(SEQ_AXIS)
    for name in SPATIAL_AXES:
        aggregated.axis(name)  # raises AxisMissing if absent
    seq_len = aggregated.data.shape[seq_axis]
    positions = list(token_positions)
    labels = list(labels)
    if len(positions) != len(labels):
        raise DimMismatch(f"{len(positions)} positions vs {len(labels)} labels")
    values = []
    moved = np.moveaxis(aggregated.data, seq_axis, -1)
    for pos in positions:
        if not 0 <= pos < seq_len:
            raise IndexOutOfRange(f"sequence position {pos} outside 0..{seq_len - 1}")
        values.append(float(moved[..., pos].max()))
    return TokenScores(
        values=tuple(values),
        token_labels=tuple(labels),
        excluded_indices=tuple(excluded_indices),
        slot_indices=slot_indices,
    )


def kth_largest(scores: TokenScores, k: int) -> float:
    """k-th largest score, duplicates counted with multiplicity."""
    return kth_largest_of(scores.values, k)


def kth_largest_of(values, k: int) -> float:
    values = list(values)
    if not 1 <= k <= len(values):
        raise KOutOfRange(f"k={k} outside 1..{len(values)}")
    return sorted(values, reverse=True)[k - 1]


def should_transition(scores: TokenScores, k: int, tau_s: float) -> bool:
    """True iff the k-th largest score is strictly below the threshold."""
    return kth_largest(scores, k) < tau_s


def mean_score(scores: TokenScores) -> float:
    """Table-style ablation: average of all token scores."""
    if scores.n == 0:
        raise EmptyList("no token scores")
    return float(sum(scores.values) / scores.n)


def cumulative_score(scores: TokenScores) -> float:
    """Table-style ablation: sum of all token scores."""
    if scores.n == 0:
        raise EmptyList("no token scores")
    return float(sum(scores.values))


def transition_statistic(scores: TokenScores, k: int, mode: str = "individual") -> float:
    """Statistic compared against the threshold for the chosen scoring mode."""
    if mode == "individual":
        return kth_largest(scores, k)
    if mode == "mean":
        return mean_score(scores)
    if mode == "cumulative":
        return cumulative_score(scores)
    raise RangeViolation(f"unknown score mode: {mode!r}")
