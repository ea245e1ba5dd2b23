"""Threaded mock HTTP services used by pipeline and client tests: a
deterministic text-generation endpoint and a deterministic scorer."""

from __future__ import annotations

import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from intentforge.generation import CONTINUATIONS, Relation

# Relation-specific tail pools; lowercase tails parse nicely with the toy
# grammar and several mention spans present in the fixture concept table.
TAIL_POOLS: dict[Relation, list[str]] = {
    Relation.UsedFor: [
        "outdoor activities.",
        "hiking during the winter.",
        "his daughter!",
        "his daughter also",
        "camping with the family.",
        "daily use.",
    ],
    Relation.HasA: [
        "pockets and zippers.",
        "a warm lining.",
        "a waterproof shell.",
        "matching colors.",
        "soft fabric.",
        "durable straps.",
    ],
    Relation.CapableOf: [
        "keeping him warm.",
        "blocking the cold wind.",
        "protecting his gear.",
        "holding a bottle.",
        "keeping the rain outside.",
        "tracking his steps.",
    ],
    Relation.Cause: [
        "stay warm during hiking.",
        "enjoy camping with his daughter.",
        "go outside in the winter.",
        "wear them together.",
        "keep his gear safe.",
        "give a gift to her family.",
    ],
    Relation.Open: [
        "he likes outdoor activities.",
        "they make a matching set.",
        "he wanted a gift for his daughter.",
        "winter is coming.",
        "they go well together.",
        "he enjoys hiking trips.",
    ],
}
FALLBACK_POOL = [
    "the same brand.",
    "a similar style.",
    "good quality materials.",
    "the outdoor season.",
]


def _relation_of_prompt(prompt: str) -> Relation:
    best: Relation = Relation.Open
    best_len = -1
    for rel, cont in CONTINUATIONS.items():
        if cont and prompt.endswith(cont) and len(cont) > best_len:
            best, best_len = rel, len(cont)
    return best


def _stable_int(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def generate_texts(prompt: str, n: int) -> list[str]:
    rel = _relation_of_prompt(prompt)
    pool = TAIL_POOLS.get(rel, FALLBACK_POOL)
    base = _stable_int(prompt)
    return [pool[(base + i) % len(pool)] for i in range(n)]


def score_text(text: str) -> tuple[float, float]:
    h = _stable_int("plau:" + text)
    plau = 0.05 + 0.94 * ((h % 10_000) / 10_000)
    h2 = _stable_int("typ:" + text)
    typ = 0.05 + 0.94 * ((h2 % 10_000) / 10_000)
    return round(plau, 4), round(typ, 4)


class _Handler(BaseHTTPRequestHandler):
    server_version = "MockLM/0.1"

    def log_message(self, fmt, *args):
        pass

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        return json.loads(self.rfile.read(length))

    def _reply(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        state = self.server.state  # type: ignore[attr-defined]
        with state["lock"]:
            state["requests"] += 1
            if state["fail_next"] > 0:
                state["fail_next"] -= 1
                self._reply({"error": "induced failure"}, status=503)
                return
        if self.path == "/v1/generate":
            req = self._read_json()
            self._reply({"texts": generate_texts(req["prompt"], int(req.get("n", 1)))})
        elif self.path == "/v1/score":
            req = self._read_json()
            plau, typ = [], []
            for text in req["texts"]:
                p, t = score_text(text)
                plau.append(p)
                typ.append(t)
            self._reply({"plausibility": plau, "typicality": typ})
        else:
            self._reply({"error": "not found"}, status=404)


class MockServer:
    """Context manager exposing /v1/generate and /v1/score on localhost."""

    def __init__(self, fail_next: int = 0):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.httpd.state = {"lock": threading.Lock(), "requests": 0, "fail_next": fail_next}
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    @property
    def requests(self) -> int:
        return self.httpd.state["requests"]

    def fail_next(self, n: int) -> None:
        with self.httpd.state["lock"]:
            self.httpd.state["fail_next"] = n

    def __enter__(self) -> "MockServer":
        self.thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
