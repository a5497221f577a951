"""Prompt schedulers: the adaptive attention-driven state machine and the
fixed-stop-point baseline.

Both walk timesteps from T down to 1 and alternate between the target prompt
(all slots rare, even offsets) and a progressive prompt (odd offsets). The
adaptive scheduler watches token scores on even offsets and flips one more
slot to rare whenever the k-th largest score drops below the threshold, with
k = remaining-slot count, so each successive transition demands broader
convergence. The baseline flips slot i permanently once the elapsed offset
reaches a precomputed stop point.
"""

from __future__ import annotations

from dataclasses import dataclass

from .attention import TokenScores, kth_largest_of, transition_statistic
from .concepts import PromptPlan, reconstruct
from .errors import (
    KOutOfRange,
    LevelOutOfRange,
    ParityViolation,
    RangeViolation,
    ScoreLengthMismatch,
    StepOutOfRange,
)

# visual-detail level (1..5) -> fraction of T spent before the switch
R2F_ALPHA = (0.9, 0.8, 0.6, 0.4, 0.2)

KIND_TARGET = "target"
KIND_PROGRESSIVE = "progressive"


@dataclass(frozen=True)
class PromptChoice:
    """Prompt selected for one denoising step."""

    text: str
    kind: str
    p_trans_at_choice: int


@dataclass(frozen=True)
class TransitionEvent:
    """One slot flipped from frequent to rare."""

    step: int
    slot: int
    p_trans: int
    locked: bool
    statistic: float


@dataclass
class SessionConfig:
    """Scheduler session settings; mirrors the session-config JSON document."""

    total_steps: int = 50
    tau_s: float = 0.025
    scheduler: str = "aps"
    transition_order: str = "index"
    r2f_levels: tuple = ()
    score_mode: str = "individual"
    k_scope: str = "all"

    def __post_init__(self):
        if self.total_steps < 1:
            raise RangeViolation(f"T must be >= 1: {self.total_steps}")
        if not 0.0 <= self.tau_s:
            raise RangeViolation(f"tau_s must be >= 0: {self.tau_s}")
        if self.scheduler not in ("aps", "r2f", "none"):
            raise RangeViolation(f"unknown scheduler: {self.scheduler!r}")
        if self.transition_order not in ("index", "saturation"):
            raise RangeViolation(
                f"unknown transition order: {self.transition_order!r}"
            )
        if self.score_mode not in ("individual", "mean", "cumulative"):
            raise RangeViolation(f"unknown score mode: {self.score_mode!r}")
        if self.k_scope not in ("all", "untransitioned"):
            raise RangeViolation(f"unknown k scope: {self.k_scope!r}")
        self.r2f_levels = tuple(int(v) for v in self.r2f_levels)

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionConfig":
        return cls(
            total_steps=int(doc.get("T", 50)),
            tau_s=float(doc.get("tau_s", 0.025)),
            scheduler=doc.get("scheduler", "aps"),
            transition_order=doc.get("transition_order", "index"),
            r2f_levels=tuple(doc.get("r2f_levels", ())),
            score_mode=doc.get("score_mode", "individual"),
            k_scope=doc.get("k_scope", "all"),
        )

    def to_dict(self) -> dict:
        doc = {
            "T": self.total_steps,
            "tau_s": self.tau_s,
            "scheduler": self.scheduler,
            "transition_order": self.transition_order,
        }
        if self.scheduler == "r2f":
            doc["r2f_levels"] = list(self.r2f_levels)
        if self.score_mode != "individual":
            doc["score_mode"] = self.score_mode
        if self.k_scope != "all":
            doc["k_scope"] = self.k_scope
        return doc


def offset_of(t: int, total_steps: int) -> int:
    """Elapsed denoising steps; the parity signal of the alternation rule."""
    return total_steps - t


def _check_step(t: int, total_steps: int):
    if not 1 <= t <= total_steps:
        raise StepOutOfRange(f"t={t} outside 1..{total_steps}")


class ApsSession:
    """Adaptive scheduler state for one generation.

    Not shareable across concurrent generations; transferable between steps.
    """

    def __init__(self, plan: PromptPlan, config: SessionConfig):
        self.plan = plan
        self.config = config
        self.total_steps = config.total_steps
        self.tau_s = config.tau_s
        self.transitioned: set = set()
        self.transition_log: list = []
        self._expected_n = None
        self._target_text = plan.target_text

    @property
    def m(self) -> int:
        return self.plan.m

    @property
    def p_trans(self) -> int:
        return len(self.transitioned)

    @property
    def locked(self) -> bool:
        return self.p_trans == self.m

    @property
    def progressive_text(self) -> str:
        if self.locked:
            return self._target_text
        return reconstruct(self.plan, self.transitioned)

    def choose_prompt(self, t: int) -> PromptChoice:
        """Alternation rule: even offsets target, odd offsets progressive."""
        _check_step(t, self.total_steps)
        if offset_of(t, self.total_steps) % 2 == 0:
            return PromptChoice(self._target_text, KIND_TARGET, self.p_trans)
        return PromptChoice(self.progressive_text, KIND_PROGRESSIVE, self.p_trans)

    def observe_scores(self, t: int, scores: TokenScores):
        """Consume target-pass token scores; maybe flip the next slot.

        Returns a TransitionEvent or None. At most one transition fires per
        observation even if several scores sit below the threshold.
        """
        _check_step(t, self.total_steps)
        if offset_of(t, self.total_steps) % 2 != 0:
            raise ParityViolation(
                f"scores observed at odd offset {offset_of(t, self.total_steps)}"
            )
        if self._expected_n is None:
            self._expected_n = scores.n
        elif scores.n != self._expected_n:
            raise ScoreLengthMismatch(
                f"observation has {scores.n} tokens, session started with "
                f"{self._expected_n}"
            )
        if self.locked:
            return None
        k = self.m - self.p_trans
        statistic = self._statistic(scores, k)
        if not statistic < self.tau_s:
            return None
        slot = self._next_slot(scores)
        self.transitioned.add(slot)
        event = TransitionEvent(
            step=t,
            slot=slot,
            p_trans=self.p_trans,
            locked=self.locked,
            statistic=statistic,
        )
        self.transition_log.append((t, slot))
        return event

    def pending_statistic(self, scores: TokenScores):
        """(k, statistic) the next observation would test, or None if locked."""
        if self.locked:
            return None
        k = self.m - self.p_trans
        return k, self._statistic(scores, k)

    def _statistic(self, scores: TokenScores, k: int) -> float:
        if self.config.k_scope == "untransitioned":
            values = self._untransitioned_values(scores)
            if self.config.score_mode == "individual":
                return kth_largest_of(values, k)
            pruned = TokenScores(values=values, token_labels=("x",) * len(values))
            return transition_statistic(pruned, k, self.config.score_mode)
        return transition_statistic(scores, k, self.config.score_mode)

    def _untransitioned_values(self, scores: TokenScores):
        if scores.slot_indices is None:
            raise RangeViolation(
                "k_scope='untransitioned' needs per-token slot ownership"
            )
        values = [
            v
            for v, slot in zip(scores.values, scores.slot_indices)
            if slot is not None and slot not in self.transitioned
        ]
        if not values:
            raise KOutOfRange("no untransitioned slot tokens in observation")
        return values

    def _next_slot(self, scores: TokenScores) -> int:
        remaining = [i for i in range(1, self.m + 1) if i not in self.transitioned]
        if self.config.transition_order == "index":
            return remaining[0]
        # saturation order: flip the most-converged remaining slot (lowest
        # worst-token score)
        if scores.slot_indices is None:
            raise RangeViolation(
                "transition_order='saturation' needs per-token slot ownership"
            )
        worst = {}
        for value, slot in zip(scores.values, scores.slot_indices):
            if slot in remaining:
                worst[slot] = max(worst.get(slot, 0.0), value)
        if not worst:
            return remaining[0]
        return min(remaining, key=lambda i: (worst.get(i, float("inf")), i))


class R2fSession:
    """Fixed-stop-point baseline: slot i is permanently rare once the elapsed
    offset reaches its stop point; before that, odd offsets render frequent."""

    def __init__(self, plan: PromptPlan, config: SessionConfig, stop_points=None):
        self.plan = plan
        self.config = config
        self.total_steps = config.total_steps
        if stop_points is None:
            stop_points = r2f_stop_points(config.r2f_levels, config.total_steps)
        if len(stop_points) != plan.m:
            raise RangeViolation(f"{len(stop_points)} stop points for {plan.m} slots")
        self.stop_points = tuple(int(s) for s in stop_points)
        self._target_text = plan.target_text

    @property
    def m(self) -> int:
        return self.plan.m

    def rare_selection_at(self, t: int) -> set:
        offset = offset_of(t, self.total_steps)
        return {
            i for i, stop in enumerate(self.stop_points, start=1) if offset >= stop
        }

    def p_trans_at(self, t: int) -> int:
        return len(self.rare_selection_at(t))

    def choose_prompt(self, t: int) -> PromptChoice:
        _check_step(t, self.total_steps)
        p = self.p_trans_at(t)
        if offset_of(t, self.total_steps) % 2 == 0:
            return PromptChoice(self._target_text, KIND_TARGET, p)
        text = reconstruct(self.plan, self.rare_selection_at(t))
        return PromptChoice(text, KIND_PROGRESSIVE, p)

    def observe_scores(self, t: int, scores: TokenScores):
        """Scores do not influence the fixed schedule."""
        _check_step(t, self.total_steps)
        return None

    @property
    def transition_log(self) -> list:
        """Realized (t, slot) switch steps implied by the stop points."""
        log = []
        for i, stop in enumerate(self.stop_points, start=1):
            t = self.total_steps - stop
            if 1 <= t <= self.total_steps:
                log.append((t, i))
        return sorted(log, key=lambda e: (-e[0], e[1]))


class NullSession:
    """Scheduling disabled: the target prompt every step."""

    def __init__(self, plan: PromptPlan, config: SessionConfig):
        self.plan = plan
        self.config = config
        self.total_steps = config.total_steps
        self._target_text = plan.target_text

    @property
    def m(self) -> int:
        return self.plan.m

    def choose_prompt(self, t: int) -> PromptChoice:
        _check_step(t, self.total_steps)
        return PromptChoice(self._target_text, KIND_TARGET, 0)

    def observe_scores(self, t: int, scores: TokenScores):
        _check_step(t, self.total_steps)
        return None

    @property
    def transition_log(self) -> list:
        return []


def build_session(plan: PromptPlan, config: SessionConfig):
    if config.scheduler == "aps":
        return ApsSession(plan, config)
    if config.scheduler == "r2f":
        return R2fSession(plan, config)
    return NullSession(plan, config)


def r2f_stop_points(visual_detail_levels, total_steps: int) -> list:
    """Stop point per concept: round(alpha[level] * T), level in 1..5."""
    if total_steps < 1:
        raise RangeViolation(f"T must be >= 1: {total_steps}")
    points = []
    for level in visual_detail_levels:
        level = int(level)
        if not 1 <= level <= 5:
            raise LevelOutOfRange(f"visual detail level {level} outside 1..5")
        points.append(round(R2F_ALPHA[level - 1] * total_steps))
    return points


def r2f_choose_prompt(t: int, total_steps: int, plan: PromptPlan, stop_points):
    """Functional form of the baseline chooser (one-shot, stateless)."""
    config = SessionConfig(total_steps=total_steps, scheduler="r2f")
    return R2fSession(plan, config, stop_points=stop_points).choose_prompt(t)
