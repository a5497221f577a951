"""Session traces: canonical NDJSON records, comparison, and plot-data export.

Serialization is deterministic: keys sorted, compact separators, and floats
pre-rounded to 9 significant digits (which also round-trips any float32
exactly), so identical sessions produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import FormatError

TRACE_SCHEMA = 1


def round_floats(obj):
    """Copy of obj with every float rounded to 9 significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def canon_dumps(obj) -> str:
    """Deterministic single-line JSON."""
    return json.dumps(
        round_floats(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    )


def config_hash(config: dict) -> str:
    return hashlib.sha256(canon_dumps(config).encode("utf-8")).hexdigest()


def vector_digest(array) -> str:
    """Short content digest of a float32 vector for trace records."""
    import numpy as np

    data = np.ascontiguousarray(array, dtype="<f4").tobytes()
    return hashlib.sha256(data).hexdigest()[:12]


@dataclass
class Trace:
    """Header plus ordered event records for one simulated session."""

    header: dict
    events: list = field(default_factory=list)

    @property
    def total_steps(self) -> int:
        return int(self.header["config"]["T"])

    def steps(self) -> list:
        return [e for e in self.events if e["event"] == "step"]

    def scores(self) -> list:
        return [e for e in self.events if e["event"] == "scores"]

    def transitions(self) -> list:
        return [e for e in self.events if e["event"] == "transition"]

    def transition_log(self) -> list:
        return [(e["t"], e["slot"]) for e in self.transitions()]

    def validate(self):
        """Structural invariants: t grouping and scores-before-transition."""
        seen = []
        for e in self.events:
            t = e["t"]
            if not seen or seen[-1] != t:
                seen.append(t)
        if seen != sorted(set(seen), reverse=True):
            raise FormatError("event timesteps are not grouped strictly decreasing")
        if seen and (seen[0] != self.total_steps or seen[-1] != 1):
            raise FormatError(
                f"trace must cover t={self.total_steps}..1, got {seen[0]}..{seen[-1]}"
            )
        previous = None
        for e in self.events:
            if e["event"] == "transition":
                if (
                    previous is None
                    or previous["event"] != "scores"
                    or previous["t"] != e["t"]
                ):
                    raise FormatError(
                        f"transition at t={e['t']} not preceded by scores"
                    )
            previous = e
        return self


def serialize_trace(trace: Trace) -> str:
    lines = [canon_dumps({"event": "header", **trace.header})]
    lines.extend(canon_dumps(e) for e in trace.events)
    return "\n".join(lines) + "\n"


def write_trace(path, trace: Trace):
    from .tensorio import _atomic_write_bytes

    _atomic_write_bytes(path, serialize_trace(trace).encode("utf-8"))


def parse_trace(text: str) -> Trace:
    header = None
    events = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"trace line {lineno} is not JSON: {e}") from e
        if not isinstance(record, dict) or "event" not in record:
            raise FormatError(f"trace line {lineno} lacks an event field")
        if record["event"] == "header":
            if header is not None:
                raise FormatError("duplicate trace header")
            record.pop("event")
            header = record
        else:
            if header is None:
                raise FormatError("trace events before header")
            events.append(record)
    if header is None:
        raise FormatError("trace has no header")
    return Trace(header=header, events=events).validate()


def read_trace(path) -> Trace:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_trace(fh.read())


def stop_point_offsets(trace: Trace) -> dict:
    """Realized per-slot switch offsets (elapsed steps), scheduler-agnostic.

    Adaptive traces report the offset of each logged transition; baseline
    traces report the configured stop points from the header.
    """
    config = trace.header["config"]
    if config.get("scheduler") == "r2f" and "stop_points" in config:
        return {i + 1: int(s) for i, s in enumerate(config["stop_points"])}
    total = trace.total_steps
    return {slot: total - t for t, slot in trace.transition_log()}


def compare_traces(a: Trace, b: Trace, atol: float = 1e-6) -> dict:
    """Per-step prompt divergences and per-slot stop-point deltas."""
    if a.total_steps != b.total_steps:
        raise FormatError(
            f"traces have different T: {a.total_steps} vs {b.total_steps}"
        )
    steps_a = {e["t"]: e for e in a.steps()}
    steps_b = {e["t"]: e for e in b.steps()}
    divergences = []
    for t in sorted(set(steps_a) | set(steps_b), reverse=True):
        ea, eb = steps_a.get(t), steps_b.get(t)
        if ea is None or eb is None:
            divergences.append({"t": t, "a": ea and ea["prompt_text"], "b": eb and eb["prompt_text"]})
        elif ea["prompt_text"] != eb["prompt_text"]:
            divergences.append({"t": t, "a": ea["prompt_text"], "b": eb["prompt_text"]})
    scores_a = {e["t"]: e for e in a.scores()}
    scores_b = {e["t"]: e for e in b.scores()}
    score_divergences = 0
    for t in set(scores_a) & set(scores_b):
        va, vb = scores_a[t]["values"], scores_b[t]["values"]
        if len(va) != len(vb):
            score_divergences += max(len(va), len(vb))
            continue
        score_divergences += sum(1 for x, y in zip(va, vb) if abs(x - y) > atol)
    stops_a = stop_point_offsets(a)
    stops_b = stop_point_offsets(b)
    deltas = {}
    for slot in sorted(set(stops_a) | set(stops_b)):
        sa, sb = stops_a.get(slot), stops_b.get(slot)
        deltas[str(slot)] = {
            "a_offset": sa,
            "b_offset": sb,
            "delta_steps": None if sa is None or sb is None else abs(sa - sb),
        }
    return {
        "T": a.total_steps,
        "divergence_count": len(divergences),
        "prompt_divergences": divergences,
        "score_divergence_count": score_divergences,
        "stop_points": deltas,
        "atol": atol,
    }


def scores_csv(traces: dict) -> str:
    """Long-format CSV of z_i(t) curves with the threshold, for plotting.

    traces maps a name (e.g. "A"/"B") to a Trace.
    """
    rows = ["trace,t,offset,token,z,tau_s"]
    for name, trace in traces.items():
        tau = trace.header["config"].get("tau_s", "")
        total = trace.total_steps
        for record in trace.scores():
            t = record["t"]
            for label, value in zip(record["labels"], record["values"]):
                rows.append(
                    f"{name},{t},{total - t},{_csv_field(label)},"
                    f"{float(f'{value:.9g}')},{tau}"
                )
    return "\n".join(rows) + "\n"


def _csv_field(text: str) -> str:
    if any(ch in text for ch in ",\"\n"):
        return '"' + text.replace('"', '""') + '"'
    return text
