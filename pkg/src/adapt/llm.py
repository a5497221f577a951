"""Concept-mapping client: instruction building, response parsing, backends.

The instruction text lives in bundled resources and is sent verbatim (plus the
input prompt) to either a chat-completions-style HTTP endpoint or an offline
fixture directory. Fixture mode is fully deterministic and is what CI uses;
HTTP responses can be cached back into a fixture directory for replay.
"""

from __future__ import annotations

import hashlib
import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass
from importlib import resources

from .concepts import (
    PromptPlan,
    _AND_RE,
    _BREAK_RE,
    bind_template,
    parse_prompt_sequence,
    trivial_plan,
)
from .errors import (
    BackendUnavailable,
    ConceptMappingError,
    EmptyPrompt,
    EngineError,
    FixtureMissing,
    InconsistentCount,
    MissingField,
    RangeViolation,
)
from .tensorio import _atomic_write_bytes

FIELD_NUM = "Num Rare Concepts"
FIELD_SEQUENCE = "Final Prompt Sequence"
FIELD_CONTEXT = "Context"

DEFAULT_API_KEY_ENV = "ADAPT_LLM_API_KEY"


def _resource(name: str) -> str:
    return resources.files("adapt.resources").joinpath(name).read_text("utf-8")


def build_instruction(prompt: str) -> tuple:
    """(system, user) message bodies: the bundled instruction text with the
    prompt appended after "Input:". The prompt passes through verbatim."""
    if not prompt:
        raise EmptyPrompt("prompt is empty")
    system = _resource("instruction_system.txt")
    user = _resource("instruction_user.txt") + f"\n\nInput: {prompt}"
    return system, user


@dataclass(frozen=True)
class ConceptMappingResponse:
    """Labeled fields extracted from one concept-mapping completion."""

    raw_text: str
    num_rare_concepts: int
    final_sequence: str
    context: str


def _sequence_clause_count(sequence: str) -> int:
    if not _BREAK_RE.search(sequence):
        return 0
    return len(_AND_RE.split(sequence))


def parse_llm_response(raw: str) -> ConceptMappingResponse:
    """Extract the labeled fields; the last occurrence of each label wins."""
    fields = {}
    for line in raw.splitlines():
        stripped = line.strip()
        for label in (FIELD_NUM, FIELD_SEQUENCE, FIELD_CONTEXT):
            prefix = label + ":"
            if stripped.startswith(prefix):
                fields[label] = stripped[len(prefix) :].strip()
    if FIELD_SEQUENCE not in fields:
        raise MissingField(FIELD_SEQUENCE)
    if FIELD_NUM not in fields:
        raise MissingField(FIELD_NUM)
    try:
        num = int(fields[FIELD_NUM])
        if num < 0:
            raise ValueError
    except ValueError:
        raise MissingField(FIELD_NUM) from None
    sequence = fields[FIELD_SEQUENCE]
    parsed = _sequence_clause_count(sequence)
    if parsed != num:
        raise InconsistentCount(
            f"declared {num} rare concepts, sequence has {parsed} clauses"
        )
    return ConceptMappingResponse(
        raw_text=raw,
        num_rare_concepts=num,
        final_sequence=sequence,
        context=fields.get(FIELD_CONTEXT, ""),
    )


def fixture_key(prompt: str, model: str) -> str:
    digest = hashlib.sha256(f"{model}\n{prompt}".encode("utf-8")).hexdigest()
    return digest[:24]


def write_fixture(directory, prompt: str, raw_response: str, model: str = "fixture"):
    """Record a raw response so fixture mode can replay it offline."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(os.fspath(directory), fixture_key(prompt, model) + ".json")
    payload = json.dumps(
        {"prompt": prompt, "model": model, "raw_response": raw_response},
        sort_keys=True,
        indent=2,
    )
    _atomic_write_bytes(path, payload.encode("utf-8"))
    return path


class FixtureBackend:
    """Replays recorded responses from a directory, keyed by (prompt, model)."""

    def __init__(self, directory, model: str = "fixture"):
        self.directory = os.fspath(directory)
        self.model = model

    def complete(self, prompt: str, system: str, user: str) -> str:
        path = os.path.join(self.directory, fixture_key(prompt, self.model) + ".json")
        if not os.path.exists(path):
            raise FixtureMissing(
                f"no fixture for prompt {prompt!r} (model {self.model!r}) in "
                f"{self.directory}"
            )
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)["raw_response"]


class HttpBackend:
    """Generic chat-completions endpoint; temperature pinned to 0."""

    def __init__(
        self,
        url: str,
        model: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 60.0,
        cache_dir=None,
    ):
        self.url = url
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.cache_dir = cache_dir

    def complete(self, prompt: str, system: str, user: str) -> str:
        body = json.dumps(
            {
                "model": self.model,
                "temperature": 0,
                "messages": [
                    {"role": "system", "content": system},
                    {"role": "user", "content": user},
                ],
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        request = urllib.request.Request(self.url, data=body, headers=headers)
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as e:
            raise BackendUnavailable(f"{self.url}: {e}") from e
        try:
            raw = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise BackendUnavailable(
                f"{self.url}: unexpected response shape: {e}"
            ) from e
        if self.cache_dir is not None:
            write_fixture(self.cache_dir, prompt, raw, model=self.model)
        return raw


def backend_from_spec(spec: str, model: str = "gpt-4o", cache_dir=None):
    """Parse a CLI backend spec: fixture:<dir> or http:<url>."""
    if spec.startswith("fixture:"):
        return FixtureBackend(spec[len("fixture:") :], model=model)
    if spec.startswith("http:") or spec.startswith("https:"):
        return HttpBackend(spec, model=model, cache_dir=cache_dir)
    raise RangeViolation(f"unknown backend spec: {spec!r}")


def map_concepts(prompt: str, backend) -> PromptPlan:
    """Instruction -> backend -> parse -> bind: the full concept-map pipeline."""
    system, user = build_instruction(prompt)
    raw = backend.complete(prompt, system, user)
    try:
        response = parse_llm_response(raw)
        if response.num_rare_concepts == 0:
            return trivial_plan(prompt)
        sequence_plan = parse_prompt_sequence(
            response.final_sequence, response.context
        )
        return bind_template(prompt, sequence_plan.pairs, whole_prompt_fallback=True)
    except EngineError as e:
        raise ConceptMappingError(str(e), raw) from e
