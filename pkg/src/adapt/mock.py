"""Synthetic attention-dynamics backend.

Stands in for a real diffusion model: per-token scores follow an analytic
saturation curve (exponential decay onto a baseline, optionally with bounded
deterministic pseudo-noise), and text embeddings are hash-seeded unit vectors.
Everything is a pure function of (config, plan, params) so full sessions are
replayable bit-for-bit on any platform.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import __version__
from .attention import TokenScores
from .concepts import PromptPlan, slot_spans
from .embedding import (
    LsmParams,
    PemParams,
    lsm_combine,
    lsm_orthogonalize,
    pem_combine,
    pem_gate,
    select_attribute_index,
)
from .errors import DimMismatch, RangeViolation, StepOutOfRange
from .scheduler import (
    ApsSession,
    R2fSession,
    SessionConfig,
    build_session,
    offset_of,
)
from .trace import TRACE_SCHEMA, Trace, config_hash, vector_digest

SOS_LABEL = "<sos>"

_MASK64 = (1 << 64) - 1
_PHI64 = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer; the only bit mixer used for pseudo-randomness."""
    x = (x + _PHI64) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def _uniform_pm1(h: int) -> float:
    """Map a 64-bit hash to [-1, 1]."""
    return (h >> 11) / float(1 << 53) * 2.0 - 1.0


def _text_seed(text: str, seed: int) -> int:
    digest = hashlib.sha256(f"{seed}\x1f{text}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class TokenDynamics:
    """Analytic score curve for one token: baseline + amplitude * e^(-(T-t)/kappa)."""

    baseline: float = 0.02
    amplitude: float = 0.5
    kappa: float = 10.0
    never_converges: bool = False

    def __post_init__(self):
        if self.baseline < 0 or self.amplitude < 0:
            raise RangeViolation("baseline and amplitude must be >= 0")
        if self.baseline + self.amplitude > 1.0:
            raise RangeViolation(
                f"baseline + amplitude must be <= 1: "
                f"{self.baseline} + {self.amplitude}"
            )
        if self.kappa <= 0:
            raise RangeViolation(f"kappa must be > 0: {self.kappa}")

    def value_at(self, t: int, total_steps: int) -> float:
        z = self.baseline + self.amplitude * math.exp(
            -(total_steps - t) / self.kappa
        )
        return max(z, 0.5) if self.never_converges else z


# the prepended start-of-sequence stand-in: high, non-saturating
SOS_DYNAMICS = TokenDynamics(
    baseline=0.6, amplitude=0.3, kappa=25.0, never_converges=True
)


@dataclass(frozen=True)
class MockConfig:
    """Synthetic session parameters; dynamics[i] drives semantic token i."""

    total_steps: int
    dynamics: tuple
    seed: int = 42
    noise_scale: float = 0.0
    embed_dim: int = 64
    labels: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.dynamics):
                raise DimMismatch("labels length differs from dynamics length")
        if self.total_steps < 1:
            raise RangeViolation(f"T must be >= 1: {self.total_steps}")
        if not self.dynamics:
            raise RangeViolation("at least one token dynamics entry required")
        if self.noise_scale < 0:
            raise RangeViolation(f"noise_scale must be >= 0: {self.noise_scale}")
        if self.embed_dim < 2:
            raise RangeViolation(f"embed_dim must be >= 2: {self.embed_dim}")

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else f"tok{i + 1}"

    def to_dict(self) -> dict:
        doc = {
            "T": self.total_steps,
            "seed": self.seed,
            "noise_scale": self.noise_scale,
            "embed_dim": self.embed_dim,
            "tokens": [
                {
                    "label": self.label(i),
                    "baseline": d.baseline,
                    "amplitude": d.amplitude,
                    "kappa": d.kappa,
                    "never_converges": d.never_converges,
                }
                for i, d in enumerate(self.dynamics)
            ],
        }
        return doc


def _dynamics_from_dict(doc: dict) -> TokenDynamics:
    return TokenDynamics(
        baseline=float(doc.get("baseline", 0.02)),
        amplitude=float(doc.get("amplitude", 0.5)),
        kappa=float(doc.get("kappa", 10.0)),
        never_converges=bool(doc.get("never_converges", False)),
    )


def mock_config_from_dict(doc: dict, n_tokens: int = None) -> MockConfig:
    """Build a MockConfig from its JSON form.

    Either "tokens" lists one dynamics entry per semantic token, or "default"
    gives a single template expanded to n_tokens entries (n_tokens then comes
    from the plan's target tokenization).
    """
    if "tokens" in doc:
        entries = list(doc["tokens"])
        dynamics = tuple(_dynamics_from_dict(e) for e in entries)
        labels = (
            tuple(e["label"] for e in entries)
            if all("label" in e for e in entries)
            else None
        )
    elif "default" in doc:
        if n_tokens is None:
            raise RangeViolation("default dynamics need a token count from the plan")
        dynamics = (_dynamics_from_dict(doc["default"]),) * n_tokens
        labels = None
    else:
        raise RangeViolation("mock config needs either 'tokens' or 'default'")
    return MockConfig(
        total_steps=int(doc.get("T", 50)),
        dynamics=dynamics,
        seed=int(doc.get("seed", 42)),
        noise_scale=float(doc.get("noise_scale", 0.0)),
        embed_dim=int(doc.get("embed_dim", 64)),
        labels=labels,
    )


def synth_scores(cfg: MockConfig, t: int, slot_indices=None) -> TokenScores:
    """Scores for step t; the SOS stand-in is generated then excluded."""
    if not 1 <= t <= cfg.total_steps:
        raise StepOutOfRange(f"t={t} outside 1..{cfg.total_steps}")
    full = [SOS_DYNAMICS] + list(cfg.dynamics)
    values = []
    for i, dyn in enumerate(full):
        z = dyn.value_at(t, cfg.total_steps)
        if cfg.noise_scale:
            h = mix64(mix64(mix64(cfg.seed & _MASK64) ^ i) ^ t)
            z += cfg.noise_scale * _uniform_pm1(h)
            if dyn.never_converges:
                z = max(z, 0.5)
        values.append(min(max(z, 0.0), 1.0))
    return TokenScores(
        values=tuple(values[1:]),  # drop the SOS position
        token_labels=tuple(cfg.label(i) for i in range(len(cfg.dynamics))),
        excluded_indices=(0,),
        slot_indices=slot_indices,
    )


def pseudo_embed(text: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic hash-seeded unit vector standing in for a text encoder."""
    if dim < 2:
        raise RangeViolation(f"dim must be >= 2: {dim}")
    state = _text_seed(text, seed)
    raw = np.empty(dim, dtype=np.float64)
    for i in range(dim):
        raw[i] = _uniform_pm1(mix64(state ^ (i + 1)))
    norm = math.sqrt(float(raw @ raw))
    if norm == 0.0:  # astronomically unlikely; perturb deterministically
        raw[0] = 1.0
        norm = 1.0
    return (raw / norm).astype(np.float32)


def token_slot_map(plan: PromptPlan):
    """Owning slot (or None) for each whitespace token of the target prompt."""
    text = plan.target_text
    spans = slot_spans(plan, frozenset(range(1, plan.m + 1)))
    owners = []
    pos = 0
    for token in text.split():
        start = text.index(token, pos)
        end = start + len(token)
        pos = end
        owner = None
        for slot, (s0, s1) in spans.items():
            if start < s1 and end > s0:
                owner = slot
                break
        owners.append(owner)
    return owners


def run_session(
    cfg: MockConfig,
    plan: PromptPlan,
    session_config: SessionConfig,
    pem_params: PemParams = PemParams(),
    lsm_params: LsmParams = LsmParams(),
) -> Trace:
    """Drive one full synthetic generation and assemble its trace."""
    tokens = plan.target_text.split()
    if len(tokens) != len(cfg.dynamics):
        raise DimMismatch(
            f"{len(cfg.dynamics)} dynamics entries for {len(tokens)} target tokens"
        )
    if cfg.total_steps != session_config.total_steps:
        raise RangeViolation(
            f"mock T={cfg.total_steps} differs from session T="
            f"{session_config.total_steps}"
        )
    labels = cfg.labels or tuple(tokens)
    cfg = MockConfig(
        total_steps=cfg.total_steps,
        dynamics=cfg.dynamics,
        seed=cfg.seed,
        noise_scale=cfg.noise_scale,
        embed_dim=cfg.embed_dim,
        labels=labels,
    )
    session = build_session(plan, session_config)
    slots = tuple(token_slot_map(plan))

    dim, seed = cfg.embed_dim, cfg.seed
    embed_cache = {}

    def embed(text: str) -> np.ndarray:
        if text not in embed_cache:
            embed_cache[text] = pseudo_embed(text, dim, seed)
        return embed_cache[text]

    c_f = embed(plan.frequent_text)
    c_r = embed(plan.target_text)
    gamma, delta = pem_gate(c_f, c_r, pem_params)
    c_pool = pem_combine(c_f, c_r, pem_params)
    pem_record = {
        "gamma": gamma,
        "delta": delta,
        "lambda_pool": pem_params.lambda_pool,
        "c_pool_norm": float(np.linalg.norm(c_pool.astype(np.float64))),
        "c_pool_digest": vector_digest(c_pool),
    }
    l_null = embed("")

    config_doc = {
        **session_config.to_dict(),
        "lambda_pool": pem_params.lambda_pool,
        "s": pem_params.s,
        "p": pem_params.p,
        "epsilon": pem_params.epsilon,
        "lambda_attr": lsm_params.lambda_attr,
        "seed": cfg.seed,
        "noise_scale": cfg.noise_scale,
        "embed_dim": cfg.embed_dim,
    }
    if isinstance(session, R2fSession):
        config_doc["stop_points"] = list(session.stop_points)
    header = {
        "schema": TRACE_SCHEMA,
        "versions": {"engine": __version__, "trace": TRACE_SCHEMA},
        "config": config_doc,
        "config_hash": config_hash(config_doc),
        "plan": plan.to_dict(),
        "mock": cfg.to_dict(),
    }
    trace = Trace(header=header)

    total = cfg.total_steps
    for t in range(total, 0, -1):
        choice = session.choose_prompt(t)
        offset = offset_of(t, total)
        step = {
            "event": "step",
            "t": t,
            "offset": offset,
            "offset_parity": "even" if offset % 2 == 0 else "odd",
            "prompt_kind": choice.kind,
            "prompt_text": choice.text,
            "p_trans": choice.p_trans_at_choice,
            "pem": dict(pem_record),
        }
        step["lsm"] = _lsm_record(
            plan, choice, embed, lsm_params, l_null
        )
        trace.events.append(step)
        if offset % 2 == 0:
            scores = synth_scores(cfg, t, slot_indices=slots)
            record = {
                "event": "scores",
                "t": t,
                "values": list(scores.values),
                "labels": list(scores.token_labels),
                "excluded_positions": list(scores.excluded_indices),
                "tau_s": session_config.tau_s,
            }
            if isinstance(session, ApsSession):
                record["locked"] = session.locked
                pending = session.pending_statistic(scores)
                if pending is not None:
                    record["k"], record["statistic"] = pending
            trace.events.append(record)
            event = session.observe_scores(t, scores)
            if event is not None:
                trace.events.append(
                    {
                        "event": "transition",
                        "t": t,
                        "slot": event.slot,
                        "p_trans": event.p_trans,
                        "locked": event.locked,
                        "statistic": event.statistic,
                    }
                )
    return trace.validate()


def _lsm_record(plan, choice, embed, lsm_params, l_null) -> dict:
    if plan.m == 0:
        return {"skipped": True, "reason": "no concept pairs"}
    attr_index = select_attribute_index(choice.p_trans_at_choice, plan.m)
    attr_text = plan.pair(attr_index).attribute_text
    record = {
        "attr_index": attr_index,
        "lambda_attr": lsm_params.lambda_attr,
        "skipped": False,
    }
    if not attr_text:
        record["skipped"] = True
        record["reason"] = "empty attribute"
        return record
    direction = lsm_orthogonalize(embed(attr_text), l_null)
    guided = lsm_combine(embed(choice.text), direction, lsm_params)
    record["l_hat_norm"] = float(np.linalg.norm(guided.astype(np.float64)))
    record["l_hat_digest"] = vector_digest(guided)
    return record
