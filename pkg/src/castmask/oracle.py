"""Oracle endpoints: wire protocol, answer parsing, and the query runner.

One request per query, as a JSON document::

    {"question": ..., "media": ..., "window": [start_s, end_s],
     "overlays": [{"person": i, "color": "red", "box": [x0, y0, x1, y1]}]}

and a JSON response ``{"text": ...}``.  Supported targets:

* ``mock:gt``                - answers the query's expected answer
* ``mock:flip?rate=R&seed=S``- ground truth inverted on a seeded query subset
* ``mock:unparseable``       - always answers "Maybe."
* any of the above with ``fail_after=N`` - raises transport errors after N calls
* ``http://host:port/path``  - POST the request document, read ``text``
* ``exec:/path/to/program``  - request document on stdin, response on stdout

Answer parsing: the first standalone case-insensitive "yes"/"no" token wins;
neither present means unparseable, which resolves to "no" with a loudly
reported counter.  The runner keeps an append-only JSONL answer log keyed by
(query_id, endpoint); completed pairs are never re-asked, so interrupted
evaluations resume without duplicating work.
"""

from __future__ import annotations

import hashlib
import json
import re
import subprocess
import threading
import urllib.error
import urllib.parse
import urllib.request
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

from .errors import TransportError
from .evaluation import Query

_ANSWER_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)

REQUIRED_ENDPOINTS = 3  # the evaluation protocol majority-votes exactly three oracles


@dataclass(frozen=True)
class OracleEndpoint:
    name: str
    target: str
    timeout_s: float = 30.0
    max_retries: int = 2


@dataclass(frozen=True)
class OracleAnswer:
    raw_text: str
    parsed: str  # "yes" | "no" | "unparseable"


@dataclass
class EvalStats:
    unparseable: int = 0
    errors: int = 0
    asked: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def count_unparseable(self) -> None:
        with self._lock:
            self.unparseable += 1


def parse_answer(raw_text: str) -> str:
    m = _ANSWER_RE.search(raw_text)
    return m.group(1).lower() if m else "unparseable"


def resolve_unparseable(answer: OracleAnswer, stats: EvalStats | None = None) -> str:
    """Map unparseable to "no", counting it; yes/no pass through untouched."""
    if answer.parsed == "unparseable":
        if stats is not None:
            stats.count_unparseable()
        return "no"
    return answer.parsed


def request_document(query: Query, media_ref: str) -> str:
    obj = {
        "question": query.question_text,
        "media": media_ref,
        "window": query.window.as_list(),
        "overlays": [
            {"person": o.person, "color": o.color, "box": o.box.as_list()}
            for o in query.overlays
        ],
    }
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


class _FailAfter:
    """Shared mutable call budget for fault-injection targets."""

    def __init__(self, budget: int):
        self.remaining = budget
        self.lock = threading.Lock()

    def spend(self) -> None:
        with self.lock:
            if self.remaining <= 0:
                raise TransportError("endpoint died (fail_after budget exhausted)")
            self.remaining -= 1


class Transport:
    def __init__(self, endpoint: OracleEndpoint, run_seed: int = 0):
        self.endpoint = endpoint
        self.run_seed = run_seed
        self._fail: _FailAfter | None = None
        target = endpoint.target
        self._params: dict[str, str] = {}
        if "?" in target:
            target, _, qs = target.partition("?")
            self._params = dict(urllib.parse.parse_qsl(qs))
        self._base = target
        if "fail_after" in self._params:
            self._fail = _FailAfter(int(self._params["fail_after"]))

    def send(self, query: Query, media_ref: str) -> str:
        if self._fail is not None:
            self._fail.spend()
        if self._base == "mock:gt":
            return "Yes." if query.expected == "yes" else "No."
        if self._base == "mock:flip":
            rate = float(self._params.get("rate", "0.3"))
            seed = int(self._params.get("seed", str(self.run_seed)))
            gt = query.expected
            h = hashlib.blake2b(f"{seed}:{query.query_id}".encode(), digest_size=8).digest()
            flip = int.from_bytes(h, "big") % 10_000 < rate * 10_000
            answer = ("no" if gt == "yes" else "yes") if flip else gt
            return "Yes." if answer == "yes" else "No."
        if self._base == "mock:unparseable":
            return "Maybe."
        if self._base.startswith("http://") or self._base.startswith("https://"):
            return self._send_http(query, media_ref)
        if self._base.startswith("exec:"):
            return self._send_exec(query, media_ref)
        raise TransportError(f"unknown endpoint target {self.endpoint.target!r}")

    def _send_http(self, query: Query, media_ref: str) -> str:
        body = request_document(query, media_ref).encode("utf-8")
        req = urllib.request.Request(
            self._base, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.endpoint.timeout_s) as resp:
                payload = resp.read()
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(f"http request failed: {exc}") from exc
        return _response_text(payload)

    def _send_exec(self, query: Query, media_ref: str) -> str:
        program = self._base[len("exec:") :]
        try:
            proc = subprocess.run(
                [program],
                input=request_document(query, media_ref).encode("utf-8"),
                capture_output=True,
                timeout=self.endpoint.timeout_s,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise TransportError(f"exec transport failed: {exc}") from exc
        if proc.returncode != 0:
            raise TransportError(f"oracle process exited {proc.returncode}")
        return _response_text(proc.stdout)


def _response_text(payload: bytes) -> str:
    try:
        obj = json.loads(payload.decode("utf-8"))
        text = obj["text"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise TransportError(f"malformed oracle response: {exc}") from exc
    if not isinstance(text, str):
        raise TransportError("malformed oracle response: 'text' is not a string")
    return text


def ask(transport: Transport | OracleEndpoint, query: Query, media_ref: str) -> OracleAnswer:
    """Send one query, retrying transport failures up to max_retries.

    Accepts a bare endpoint for one-shot use; stateful targets (fail_after
    budgets) need a persistent Transport.
    """
    if isinstance(transport, OracleEndpoint):
        transport = Transport(transport)
    last: Exception | None = None
    for _ in range(transport.endpoint.max_retries + 1):
        try:
            raw = transport.send(query, media_ref)
            return OracleAnswer(raw_text=raw, parsed=parse_answer(raw))
        except TransportError as exc:
            last = exc
    raise TransportError(f"{transport.endpoint.name}: {last}") from last


# ---------------------------------------------------------------------------
# Answer log and runner
# ---------------------------------------------------------------------------


def load_answer_log(path) -> dict[tuple[str, str], dict]:
    """Latest record per (query_id, endpoint); error records are retried later."""
    records: dict[tuple[str, str], dict] = {}
    try:
        fh = open(path, encoding="utf-8")
    except FileNotFoundError:
        return records
    with fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records[(obj["query_id"], obj["endpoint"])] = obj
    return records


def run_queries(
    queries: list[Query],
    media_refs: dict[str, str],
    endpoints: list[OracleEndpoint],
    log_path,
    parallelism: int = 4,
    run_seed: int = 0,
) -> tuple[dict[tuple[str, str], dict], EvalStats]:
    """Answer every (query, endpoint) pair not already in the log.

    Answers append to the JSONL log as they arrive (stable field order); a
    crashed or exhausted run leaves a valid partial log behind.  Raises
    TransportError after logging if any pair still lacks an answer.
    """
    if len(endpoints) != REQUIRED_ENDPOINTS:
        raise ValueError(f"exactly {REQUIRED_ENDPOINTS} endpoints required, got {len(endpoints)}")
    records = load_answer_log(log_path)
    transports = {ep.name: Transport(ep, run_seed=run_seed) for ep in endpoints}
    stats = EvalStats()
    by_id = {q.query_id: q for q in queries}
    # Per-endpoint in-flight caps; one slow or dead oracle cannot starve the rest.
    caps = {ep.name: threading.Semaphore(max(1, parallelism)) for ep in endpoints}

    pending = [
        (q.query_id, ep.name)
        for q in queries
        for ep in endpoints
        if records.get((q.query_id, ep.name), {}).get("status") != "answered"
    ]

    def work(pair):
        qid, name = pair
        q = by_id[qid]
        with caps[name]:
            answer = ask(transports[name], q, media_refs[q.clip_id])
        return {
            "query_id": qid,
            "endpoint": name,
            "status": "answered",
            "raw_text": answer.raw_text,
            "parsed": answer.parsed,
        }

    # Completion order is irrelevant because the log is keyed by
    # (query_id, endpoint); the main thread is the only log writer.
    with open(log_path, "a", encoding="utf-8") as log, ThreadPoolExecutor(
        max_workers=max(1, parallelism)
    ) as pool:
        futures = {pool.submit(work, pair): pair for pair in pending}
        for fut in as_completed(futures):
            qid, name = futures[fut]
            try:
                rec = fut.result()
                stats.asked += 1
            except TransportError as exc:
                rec = {"query_id": qid, "endpoint": name, "status": "error", "error": str(exc)}
                stats.errors += 1
            log.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
            log.flush()
            records[(qid, name)] = rec

    incomplete = [
        (q.query_id, ep.name)
        for q in queries
        for ep in endpoints
        if records.get((q.query_id, ep.name), {}).get("status") != "answered"
    ]
    if incomplete:
        raise TransportError(
            f"{len(incomplete)} query/endpoint pairs unanswered after retries; "
            f"partial log preserved at {log_path}"
        )
    return records, stats


def assemble_votes(
    queries: list[Query],
    records: dict[tuple[str, str], dict],
    endpoints: list[OracleEndpoint],
    stats: EvalStats,
):
    """Build VoteRecords from a complete answer log, resolving unparseables."""
    from .evaluation import VoteRecord, majority_vote

    votes = {}
    for q in queries:
        answers = []
        for ep in endpoints:
            rec = records[(q.query_id, ep.name)]
            resolved = resolve_unparseable(
                OracleAnswer(raw_text=rec.get("raw_text", ""), parsed=rec["parsed"]), stats
            )
            answers.append(resolved)
        majority = majority_vote(answers)
        votes[q.query_id] = VoteRecord(
            query_id=q.query_id,
            answers=tuple(answers),
            majority=majority,
            correct=majority == q.expected,
        )
    return votes
