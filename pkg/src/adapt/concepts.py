"""Concept pairs, prompt templates, and the phrase-splicing Reconstruct operation.

A prompt plan splits the original prompt into literal text and numbered slots,
one slot per rare/frequent concept pair. Rendering a slot "rare" reproduces the
original prompt's text for that span; rendering it "frequent" splices in the
surrogate phrase with the leading capitalization adapted to the original span.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import (
    AmbiguousPhrase,
    CountMismatch,
    EmptyClause,
    InvalidPair,
    InvalidPlan,
    MissingBreak,
    OverlappingPhrases,
    PhraseNotFound,
)

BREAK_TOKEN = "BREAK"
AND_TOKEN = "AND"

# reserved tokens match only as whole whitespace-delimited words
_BREAK_RE = re.compile(r"(?:(?<=\s)|^)BREAK(?=\s|$)")
_AND_RE = re.compile(r"(?:(?<=\s)|^)AND(?=\s|$)")


def _normalize(text: str) -> str:
    """Collapse whitespace runs and casefold, for phrase comparison."""
    return " ".join(text.split()).casefold()


@dataclass(frozen=True)
class ConceptPair:
    """One rare/frequent/attribute phrase triple occupying one template slot."""

    index: int
    rare_phrase: str
    frequent_phrase: str
    attribute_text: str = ""

    def __post_init__(self):
        if self.index < 1:
            raise InvalidPair(f"pair index must be 1-based, got {self.index}")
        if not self.rare_phrase.strip():
            raise InvalidPair("rare phrase is empty")
        if not self.frequent_phrase.strip():
            raise InvalidPair("frequent phrase is empty")
        if _normalize(self.rare_phrase) == _normalize(self.frequent_phrase):
            raise InvalidPair(
                f"rare phrase equals frequent phrase: {self.rare_phrase!r}"
            )


@dataclass(frozen=True)
class Slot:
    """A template hole: pair index plus the text as it appeared in the prompt."""

    index: int
    source_text: str


@dataclass(frozen=True)
class PromptPlan:
    """Original prompt decomposed into literals and concept slots."""

    original_prompt: str
    segments: tuple = ()
    pairs: tuple = ()

    def __post_init__(self):
        slot_indices = [s.index for s in self.segments if isinstance(s, Slot)]
        pair_indices = [p.index for p in self.pairs]
        if sorted(slot_indices) != sorted(set(slot_indices)):
            raise InvalidPlan("duplicate slot index in segments")
        if sorted(slot_indices) != sorted(pair_indices):
            raise InvalidPlan(
                f"slot indices {sorted(slot_indices)} do not match "
                f"pair indices {sorted(pair_indices)}"
            )
        if pair_indices != list(range(1, len(self.pairs) + 1)):
            raise InvalidPlan("pair indices must be 1..m in order")
        rendered = reconstruct(self, frozenset(pair_indices))
        if rendered != self.original_prompt:
            raise InvalidPlan(
                f"all-rare rendering {rendered!r} does not reproduce "
                f"original prompt {self.original_prompt!r}"
            )

    @property
    def m(self) -> int:
        return len(self.pairs)

    def pair(self, index: int) -> ConceptPair:
        return self.pairs[index - 1]

    @property
    def target_text(self) -> str:
        """Prompt with every slot rare (the original prompt)."""
        return reconstruct(self, frozenset(range(1, self.m + 1)))

    @property
    def frequent_text(self) -> str:
        """Prompt with every slot frequent."""
        return reconstruct(self, frozenset())

    def template(self) -> str:
        """Human-readable template with [slotN] markers."""
        out = []
        for seg in self.segments:
            out.append(f"[slot{seg.index}]" if isinstance(seg, Slot) else seg)
        return "".join(out)

    def to_dict(self) -> dict:
        return {
            "original_prompt": self.original_prompt,
            "pairs": [
                {
                    "index": p.index,
                    "rare": p.rare_phrase,
                    "frequent": p.frequent_phrase,
                    "attribute": p.attribute_text,
                }
                for p in self.pairs
            ],
        }


def plan_from_dict(doc: dict) -> PromptPlan:
    """Rebuild a plan from its concept-map JSON form (original + pairs)."""
    pairs = [
        ConceptPair(
            index=int(p["index"]),
            rare_phrase=p["rare"],
            frequent_phrase=p["frequent"],
            attribute_text=p.get("attribute", ""),
        )
        for p in sorted(doc["pairs"], key=lambda p: int(p["index"]))
    ]
    return bind_template(doc["original_prompt"], pairs, whole_prompt_fallback=True)


def trivial_plan(prompt: str) -> PromptPlan:
    """Plan with no concept pairs; the whole prompt is literal text."""
    return PromptPlan(original_prompt=prompt, segments=(prompt,), pairs=())


def _match_case(replacement: str, source: str) -> str:
    """Adapt the replacement's first letter to the source span's casing."""
    if not replacement or not source:
        return replacement
    if source[0].islower() and replacement[0].isupper():
        return replacement[0].lower() + replacement[1:]
    if source[0].isupper() and replacement[0].islower():
        return replacement[0].upper() + replacement[1:]
    return replacement


def render_segments(plan: PromptPlan, rare_selection) -> list:
    """Render each segment; returns (text, slot_index_or_None) pieces."""
    selection = frozenset(rare_selection)
    invalid = selection - frozenset(range(1, plan.m + 1))
    if invalid:
        raise InvalidPlan(f"selection {sorted(invalid)} outside slots 1..{plan.m}")
    pieces = []
    for seg in plan.segments:
        if isinstance(seg, Slot):
            if seg.index in selection:
                pieces.append((seg.source_text, seg.index))
            else:
                pair = plan.pair(seg.index)
                pieces.append(
                    (_match_case(pair.frequent_phrase, seg.source_text), seg.index)
                )
        else:
            pieces.append((seg, None))
    return pieces


def reconstruct(plan: PromptPlan, rare_selection) -> str:
    """Render the plan with the given slots rare and the rest frequent."""
    return "".join(text for text, _ in render_segments(plan, rare_selection))


def slot_spans(plan: PromptPlan, rare_selection) -> dict:
    """Character spans of each slot in the rendered text: {index: (start, end)}."""
    spans = {}
    pos = 0
    for text, idx in render_segments(plan, rare_selection):
        if idx is not None:
            spans[idx] = (pos, pos + len(text))
        pos += len(text)
    return spans


def _split_on_token(text: str, token_re: re.Pattern) -> list:
    """Split on a reserved uppercase token delimited by whitespace."""
    parts = []
    start = 0
    for m in token_re.finditer(text):
        parts.append(text[start : m.start()])
        start = m.end()
    parts.append(text[start:])
    return parts


def parse_prompt_sequence(sequence_text: str, context_text: str = "") -> PromptPlan:
    """Parse `F1 BREAK R1 [AND F2 BREAK R2 ...]` plus an optional context list.

    Clause i yields pair i with the frequent phrase left of BREAK and the rare
    phrase right of it; the i-th AND-separated context clause becomes the
    pair's attribute text. The returned plan is anchored on the rare phrases
    joined by " AND "; bind_template() re-anchors it onto a real prompt.
    """
    if not sequence_text.strip():
        raise EmptyClause("empty prompt sequence")
    clauses = _split_on_token(sequence_text, _AND_RE)
    contexts = _split_on_token(context_text, _AND_RE) if context_text.strip() else []
    if contexts and len(contexts) != len(clauses):
        raise CountMismatch(
            f"{len(contexts)} context clauses for {len(clauses)} sequence clauses"
        )
    pairs = []
    for i, clause in enumerate(clauses, start=1):
        if not clause.strip():
            raise EmptyClause(f"clause {i} is empty")
        halves = _split_on_token(clause, _BREAK_RE)
        if len(halves) < 2:
            raise MissingBreak(f"clause {i} has no BREAK: {clause.strip()!r}")
        if len(halves) > 2:
            raise MissingBreak(f"clause {i} has multiple BREAKs: {clause.strip()!r}")
        frequent, rare = (h.strip() for h in halves)
        if not frequent or not rare:
            raise EmptyClause(f"clause {i} has an empty side of BREAK")
        attribute = contexts[i - 1].strip() if contexts else ""
        pairs.append(
            ConceptPair(
                index=i,
                rare_phrase=rare,
                frequent_phrase=frequent,
                attribute_text=attribute,
            )
        )
    original = f" {AND_TOKEN} ".join(p.rare_phrase for p in pairs)
    segments = []
    for p in pairs:
        if segments:
            segments.append(f" {AND_TOKEN} ")
        segments.append(Slot(index=p.index, source_text=p.rare_phrase))
    return PromptPlan(
        original_prompt=original, segments=tuple(segments), pairs=tuple(pairs)
    )


def render_sequence(plan: PromptPlan) -> str:
    """Inverse of parse_prompt_sequence: `F1 BREAK R1 AND F2 BREAK R2 ...`."""
    return f" {AND_TOKEN} ".join(
        f"{p.frequent_phrase} {BREAK_TOKEN} {p.rare_phrase}" for p in plan.pairs
    )


def _normalized_with_map(text: str):
    """Casefolded, whitespace-collapsed copy plus a map back to original offsets.

    Returns (norm, starts, ends) where norm[i] came from original span
    [starts[i], ends[i]).
    """
    norm = []
    starts = []
    ends = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            j = i
            while j < n and text[j].isspace():
                j += 1
            if norm:  # drop leading whitespace entirely
                norm.append(" ")
                starts.append(i)
                ends.append(j)
            i = j
        else:
            folded = text[i].casefold()
            for ch in folded:  # casefold may expand one char to several
                norm.append(ch)
                starts.append(i)
                ends.append(i + 1)
            i += 1
    # trailing synthetic space, if any, is harmless: phrases are stripped
    return "".join(norm), starts, ends


def _word_char(ch: str) -> bool:
    return ch.isalnum()


def _find_phrase(original: str, phrase: str) -> list:
    """All word-boundary occurrences of phrase in original; spans in original."""
    norm, starts, ends = _normalized_with_map(original)
    needle = _normalize(phrase)
    if not needle:
        return []
    spans = []
    at = 0
    while True:
        hit = norm.find(needle, at)
        if hit < 0:
            break
        at = hit + 1
        before = norm[hit - 1] if hit > 0 else ""
        after_i = hit + len(needle)
        after = norm[after_i] if after_i < len(norm) else ""
        if (before and _word_char(before) and _word_char(needle[0])) or (
            after and _word_char(after) and _word_char(needle[-1])
        ):
            continue  # inside a longer word
        spans.append((starts[hit], ends[after_i - 1]))
    return spans


def bind_template(
    original_prompt: str, pairs, whole_prompt_fallback: bool = False
) -> PromptPlan:
    """Locate each pair's rare phrase inside the original prompt to form slots.

    Each rare phrase must occur exactly once (case-insensitive, whitespace
    normalized, word-boundary delimited). With whole_prompt_fallback and a
    single pair whose phrase is absent, the whole prompt becomes slot 1.
    """
    pairs = tuple(pairs)
    found = {}
    for pair in pairs:
        spans = _find_phrase(original_prompt, pair.rare_phrase)
        if not spans:
            if whole_prompt_fallback and len(pairs) == 1:
                return PromptPlan(
                    original_prompt=original_prompt,
                    segments=(Slot(index=1, source_text=original_prompt),),
                    pairs=pairs,
                )
            raise PhraseNotFound(
                f"rare phrase {pair.rare_phrase!r} not found in "
                f"{original_prompt!r}"
            )
        if len(spans) > 1:
            raise AmbiguousPhrase(
                f"rare phrase {pair.rare_phrase!r} occurs {len(spans)} times"
            )
        found[pair.index] = spans[0]
    ordered = sorted(found.items(), key=lambda kv: kv[1][0])
    prev_end = 0
    prev_idx = None
    for idx, (start, end) in ordered:
        if start < prev_end:
            raise OverlappingPhrases(
                f"slots {prev_idx} and {idx} overlap in the original prompt"
            )
        prev_end = end
        prev_idx = idx
    segments = []
    pos = 0
    for idx, (start, end) in ordered:
        if start > pos:
            segments.append(original_prompt[pos:start])
        segments.append(Slot(index=idx, source_text=original_prompt[start:end]))
        pos = end
    if pos < len(original_prompt):
        segments.append(original_prompt[pos:])
    return PromptPlan(
        original_prompt=original_prompt, segments=tuple(segments), pairs=pairs
    )
