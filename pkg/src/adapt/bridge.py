"""Line-oriented stdio protocol server embedding the engine in a host pipeline.

One JSON object per line, strict request-reply in order. The host drives a
session: hello (protocol version 1), configure (plan + hyperparameters), then
per-step aps_choose / aps_observe, stateless pem / lsm / project vector ops,
and bye. Vectors up to 8192 elements travel inline as base64 f32le; larger
ones go through temp files passed by path. Malformed input never drops the
connection: it produces an error reply with id null.
"""

from __future__ import annotations

import base64
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .attention import TokenScores
from .concepts import plan_from_dict, trivial_plan
from .embedding import (
    LsmParams,
    PemParams,
    lsm_combine,
    lsm_orthogonalize,
    pem_combine,
    pem_gate,
    project_out,
)
from .errors import EngineError, ProtocolError
from .scheduler import SessionConfig, build_session
from .trace import canon_dumps, config_hash

PROTOCOL_VERSION = 1
INLINE_VECTOR_LIMIT = 8192  # elements


def encode_vector(array, inline_limit: int = INLINE_VECTOR_LIMIT) -> dict:
    data = np.ascontiguousarray(array, dtype="<f4")
    if data.size <= inline_limit:
        return {"b64": base64.b64encode(data.tobytes()).decode("ascii")}
    fd, path = tempfile.mkstemp(suffix=".f32", prefix="adapt-vec-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data.tobytes())
    return {"file": path}


def decode_vector(obj) -> np.ndarray:
    if not isinstance(obj, dict):
        raise ProtocolError("vector payload must be {'b64': ...} or {'file': ...}")
    if "b64" in obj:
        raw = base64.b64decode(obj["b64"])
        return np.frombuffer(raw, dtype="<f4").copy()
    if "file" in obj:
        return np.fromfile(obj["file"], dtype="<f4")
    raise ProtocolError("vector payload has neither 'b64' nor 'file'")


class BridgeServer:
    """Serves one host session over paired text streams."""

    def __init__(self, stdin=None, stdout=None):
        self.stdin = stdin if stdin is not None else sys.stdin
        self.stdout = stdout if stdout is not None else sys.stdout
        self.last_id = None
        self.hello_done = False
        self.session = None
        self.pem_params = PemParams()
        self.lsm_params = LsmParams()

    # -- plumbing ----------------------------------------------------------

    def _send(self, reply: dict):
        self.stdout.write(canon_dumps(reply) + "\n")
        self.stdout.flush()

    def _error(self, request_id, code: str, message: str):
        self._send(
            {"id": request_id, "error": {"code": code, "message": message}}
        )

    def serve(self):
        """Process requests until bye or end of input."""
        for line in self.stdin:
            line = line.strip()
            if not line:
                continue
            try:
                request = json.loads(line)
            except json.JSONDecodeError as e:
                self._error(None, "bad_json", f"malformed JSON: {e}")
                continue
            if not isinstance(request, dict):
                self._error(None, "bad_request", "request must be a JSON object")
                continue
            request_id = request.get("id")
            op = request.get("op")
            if not isinstance(request_id, int):
                self._error(None, "bad_request", "missing integer id")
                continue
            if not isinstance(op, str):
                self._error(request_id, "bad_request", "missing op")
                continue
            if self.last_id is not None and request_id <= self.last_id:
                self._error(
                    request_id,
                    "id_order",
                    f"id {request_id} not greater than {self.last_id}",
                )
                continue
            self.last_id = request_id
            try:
                reply, done = self._dispatch(request_id, op, request)
            except EngineError as e:
                self._error(request_id, e.code, str(e))
                continue
            except Exception as e:  # keep the connection alive on bugs too
                self._error(request_id, "internal", f"{type(e).__name__}: {e}")
                continue
            self._send(reply)
            if done:
                return

    # -- dispatch ----------------------------------------------------------

    def _dispatch(self, request_id: int, op: str, request: dict):
        if op == "hello":
            return self._op_hello(request_id, request), False
        if not self.hello_done:
            raise ProtocolError("hello must come first")
        if op == "bye":
            return {"id": request_id, "op": "bye_ok"}, True
        handler = getattr(self, f"_op_{op}", None)
        if handler is None:
            raise ProtocolError(f"unknown op: {op!r}")
        return handler(request_id, request), False

    def _op_hello(self, request_id: int, request: dict) -> dict:
        version = request.get("version")
        if version != PROTOCOL_VERSION:
            raise ProtocolError(
                f"unsupported protocol version {version!r}; serving "
                f"{PROTOCOL_VERSION}"
            )
        self.hello_done = True
        return {
            "id": request_id,
            "op": "hello_ok",
            "engine_version": __version__,
            "protocol": PROTOCOL_VERSION,
        }

    def _op_configure(self, request_id: int, request: dict) -> dict:
        plan_doc = request.get("plan")
        if plan_doc is None:
            raise ProtocolError("configure needs a plan")
        if plan_doc.get("pairs"):
            plan = plan_from_dict(plan_doc)
        else:
            plan = trivial_plan(plan_doc["original_prompt"])
        session_config = SessionConfig.from_dict(request.get("session", {}))
        pem_doc = request.get("pem", {})
        self.pem_params = PemParams(
            lambda_pool=float(pem_doc.get("lambda_pool", 0.3)),
            s=float(pem_doc.get("s", 2.0)),
            p=float(pem_doc.get("p", 100.0)),
            epsilon=float(pem_doc.get("epsilon", 0.93)),
        )
        lsm_doc = request.get("lsm", {})
        self.lsm_params = LsmParams(
            lambda_attr=float(lsm_doc.get("lambda_attr", 0.15))
        )
        self.session = build_session(plan, session_config)
        doc = {
            **session_config.to_dict(),
            "lambda_pool": self.pem_params.lambda_pool,
            "s": self.pem_params.s,
            "p": self.pem_params.p,
            "epsilon": self.pem_params.epsilon,
            "lambda_attr": self.lsm_params.lambda_attr,
        }
        return {
            "id": request_id,
            "op": "configured",
            "m": plan.m,
            "config_hash": config_hash(doc),
            "target_text": plan.target_text,
            "frequent_text": plan.frequent_text,
        }

    def _require_session(self):
        if self.session is None:
            raise ProtocolError("configure must come before scheduler ops")
        return self.session

    def _op_aps_choose(self, request_id: int, request: dict) -> dict:
        session = self._require_session()
        choice = session.choose_prompt(int(request["t"]))
        return {
            "id": request_id,
            "op": "choice",
            "t": int(request["t"]),
            "kind": choice.kind,
            "text": choice.text,
            "p_trans": choice.p_trans_at_choice,
        }

    def _op_aps_observe(self, request_id: int, request: dict) -> dict:
        session = self._require_session()
        values = [float(v) for v in request["scores"]]
        labels = request.get("labels") or [f"tok{i + 1}" for i in range(len(values))]
        slots = request.get("slots")
        scores = TokenScores(
            values=values,
            token_labels=labels,
            excluded_indices=tuple(request.get("excluded_positions", ())),
            slot_indices=tuple(slots) if slots is not None else None,
        )
        event = session.observe_scores(int(request["t"]), scores)
        reply = {
            "id": request_id,
            "op": "observed",
            "t": int(request["t"]),
            "transition": None,
        }
        if event is not None:
            reply["transition"] = {
                "slot": event.slot,
                "p_trans": event.p_trans,
                "locked": event.locked,
                "statistic": event.statistic,
            }
        if hasattr(session, "locked"):
            reply["locked"] = session.locked
            reply["p_trans"] = session.p_trans
        return reply

    def _op_pem(self, request_id: int, request: dict) -> dict:
        params = self.pem_params
        if "lambda_pool" in request:
            params = PemParams(
                lambda_pool=float(request["lambda_pool"]),
                s=params.s,
                p=params.p,
                epsilon=params.epsilon,
            )
        c_f = decode_vector(request["c_f"])
        c_r = decode_vector(request["c_r"])
        gamma, delta = pem_gate(c_f, c_r, params)
        combined = pem_combine(c_f, c_r, params)
        return {
            "id": request_id,
            "op": "pem_result",
            "c_pool": encode_vector(combined),
            "gamma": gamma,
            "delta": delta,
        }

    def _op_lsm(self, request_id: int, request: dict) -> dict:
        params = self.lsm_params
        if "lambda_attr" in request:
            params = LsmParams(lambda_attr=float(request["lambda_attr"]))
        l_base = decode_vector(request["l_base"])
        l_attr = decode_vector(request["l_attr"])
        l_null = decode_vector(request["l_null"])
        direction = lsm_orthogonalize(l_attr, l_null)
        guided = lsm_combine(l_base, direction, params)
        return {"id": request_id, "op": "lsm_result", "l_hat": encode_vector(guided)}

    def _op_project(self, request_id: int, request: dict) -> dict:
        result = project_out(decode_vector(request["a"]), decode_vector(request["b"]))
        return {"id": request_id, "op": "projection", "result": encode_vector(result)}


def serve(stdin=None, stdout=None):
    BridgeServer(stdin=stdin, stdout=stdout).serve()
