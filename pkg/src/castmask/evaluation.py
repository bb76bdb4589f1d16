"""Binary-VQA evaluation: query generation, majority voting, and accuracies.

Each annotated event yields yes/no probes over a trimmed sub-clip with
colored-box overlay instructions (red = subject of the question, green =
referenced target).  The pipeline emits overlay/trim *instructions* only;
rendering pixels is the oracle client's job.  Answers from exactly three
oracles are majority-voted; accuracies pool positive and negative
polarities per metric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .categories import categorize_action as categorize_action  # re-export; the op lives here
from .errors import SceneSpecError
from .scene import (
    BoundingBox,
    PersonRef,
    SocialEvent,
    TimeWindow,
    _Check,
    canonical_dumps,
    parse_events,
    parse_persons,
)

TRIM_PAD_S = 1.0

ACTION_QUESTION = "In this video, does the person in the red box {fragment}? Answer Yes or No."
TARGET_QUESTION = "In this video, does the person in the red box {fragment}? Answer Yes or No."
STILLNESS_QUESTION = (
    "In this video, does the person in the red box perform any notable gesture "
    "or directed action? Answer Yes or No."
)


@dataclass(frozen=True)
class ClipAnnotation:
    clip_id: str
    duration_s: float
    image_width: float
    image_height: float
    persons: tuple[PersonRef, ...]
    events: tuple[SocialEvent, ...]
    media: str | None = None

    def person(self, index: int) -> PersonRef:
        for p in self.persons:
            if p.index == index:
                return p
        raise KeyError(f"no person with index {index}")

    @property
    def media_ref(self) -> str:
        return self.media if self.media is not None else self.clip_id


@dataclass(frozen=True)
class AnnotationSet:
    clips: tuple[ClipAnnotation, ...]


@dataclass(frozen=True)
class Overlay:
    person: int
    color: str  # "red" | "green"
    box: BoundingBox


@dataclass(frozen=True)
class Query:
    query_id: str
    clip_id: str
    metric: str  # "action" | "target" | "stillness"
    polarity: str  # "positive" | "negative" | "n/a"
    window: TimeWindow
    overlays: tuple[Overlay, ...]
    question_text: str
    expected: str  # "yes" | "no"

    def to_record(self) -> str:
        obj = {
            "query_id": self.query_id,
            "clip_id": self.clip_id,
            "metric": self.metric,
            "polarity": self.polarity,
            "window": self.window.as_list(),
            "overlays": [
                {"person": o.person, "color": o.color, "box": o.box.as_list()}
                for o in self.overlays
            ],
            "question": self.question_text,
            "expected": self.expected,
        }
        return json.dumps(obj, sort_keys=True, ensure_ascii=False)

    @staticmethod
    def from_record(line: str) -> "Query":
        obj = json.loads(line)
        return Query(
            query_id=obj["query_id"],
            clip_id=obj["clip_id"],
            metric=obj["metric"],
            polarity=obj["polarity"],
            window=TimeWindow(*obj["window"]),
            overlays=tuple(
                Overlay(o["person"], o["color"], BoundingBox(*o["box"])) for o in obj["overlays"]
            ),
            question_text=obj["question"],
            expected=obj["expected"],
        )


@dataclass(frozen=True)
class VoteRecord:
    query_id: str
    answers: tuple[str, str, str]
    majority: str
    correct: bool


# ---------------------------------------------------------------------------
# Annotation documents
# ---------------------------------------------------------------------------


def parse_annotations(document: str) -> AnnotationSet:
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SceneSpecError([("$", f"malformed document: {exc}")]) from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("clips"), list) or not obj["clips"]:
        raise SceneSpecError([("$.clips", "expected a non-empty clips array")])
    check = _Check()
    clips = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(obj["clips"]):
        path = f"$.clips[{i}]"
        if not isinstance(raw, dict):
            check.fail(path, "expected an object")
            continue
        clip_id = raw.get("clip_id")
        if not isinstance(clip_id, str) or not clip_id:
            check.fail(f"{path}.clip_id", "expected a non-empty string")
            continue
        if clip_id in seen_ids:
            check.fail(f"{path}.clip_id", f"duplicate clip id {clip_id!r}")
            continue
        seen_ids.add(clip_id)
        before = len(check.problems)
        duration = check.number(raw, "duration_s", path, positive=True)
        width = check.number(raw, "image_width", path, positive=True)
        height = check.number(raw, "image_height", path, positive=True)
        if len(check.problems) > before:
            continue
        persons = parse_persons(raw.get("persons"), f"{path}.persons", check, width, height)
        events = parse_events(
            raw.get("events"), f"{path}.events", check, {p.index for p in persons}, duration
        )
        media = raw.get("media")
        if media is not None and not isinstance(media, str):
            check.fail(f"{path}.media", "expected a string or null")
        clips.append(
            ClipAnnotation(
                clip_id=clip_id,
                duration_s=duration,
                image_width=width,
                image_height=height,
                persons=tuple(sorted(persons, key=lambda p: p.index)),
                events=events,
                media=media,
            )
        )
    check.raise_if_failed()
    return AnnotationSet(clips=tuple(clips))


def format_annotations(annotations: AnnotationSet) -> str:
    obj = {
        "clips": [
            {
                "clip_id": c.clip_id,
                "duration_s": c.duration_s,
                "image_width": c.image_width,
                "image_height": c.image_height,
                "media": c.media,
                "persons": [{"index": p.index, "box": p.box.as_list()} for p in c.persons],
                "events": [
                    {
                        "actor": e.actor,
                        "action": e.action_text,
                        "target": e.target,
                        "window": e.window.as_list(),
                    }
                    for e in c.events
                ],
            }
            for c in annotations.clips
        ]
    }
    return canonical_dumps(obj)


def load_annotations(path) -> AnnotationSet:
    with open(path, encoding="utf-8") as fh:
        return parse_annotations(fh.read())


# ---------------------------------------------------------------------------
# Query generation
# ---------------------------------------------------------------------------


def trim_window(event: SocialEvent, clip_duration: float) -> TimeWindow:
    """Sub-clip window: one second of context on each side, clamped."""
    return TimeWindow(
        max(0.0, event.window.start_s - TRIM_PAD_S),
        min(clip_duration, event.window.end_s + TRIM_PAD_S),
    )


def _red(clip: ClipAnnotation, person: int) -> Overlay:
    return Overlay(person=person, color="red", box=clip.person(person).box)


def _green(clip: ClipAnnotation, person: int) -> Overlay:
    return Overlay(person=person, color="green", box=clip.person(person).box)


def generate_action_queries(annotations: AnnotationSet) -> list[Query]:
    """Positive probe per event; negative probe on a distractor when one exists.

    The distractor is the lowest-index person other than the actor -
    deterministic so reruns regenerate identical manifests.
    """
    queries = []
    for clip in annotations.clips:
        for event in clip.events:
            window = trim_window(event, clip.duration_s)
            question = ACTION_QUESTION.format(fragment=event.category.question_template)
            queries.append(
                Query(
                    query_id=f"{clip.clip_id}:action:{event.event_id}:pos",
                    clip_id=clip.clip_id,
                    metric="action",
                    polarity="positive",
                    window=window,
                    overlays=(_red(clip, event.actor),),
                    question_text=question,
                    expected="yes",
                )
            )
            distractors = [p.index for p in clip.persons if p.index != event.actor]
            if distractors:
                queries.append(
                    Query(
                        query_id=f"{clip.clip_id}:action:{event.event_id}:neg",
                        clip_id=clip.clip_id,
                        metric="action",
                        polarity="negative",
                        window=window,
                        overlays=(_red(clip, min(distractors)),),
                        question_text=question,
                        expected="no",
                    )
                )
    return queries


def generate_target_queries(annotations: AnnotationSet) -> list[Query]:
    """Probes for targeted events: true target (yes) and a wrong target (no)."""
    queries = []
    for clip in annotations.clips:
        for event in clip.events:
            if event.target is None:
                continue
            window = trim_window(event, clip.duration_s)
            question = TARGET_QUESTION.format(fragment=event.category.target_template)
            queries.append(
                Query(
                    query_id=f"{clip.clip_id}:target:{event.event_id}:pos",
                    clip_id=clip.clip_id,
                    metric="target",
                    polarity="positive",
                    window=window,
                    overlays=(_red(clip, event.actor), _green(clip, event.target)),
                    question_text=question,
                    expected="yes",
                )
            )
            wrong = [
                p.index for p in clip.persons if p.index not in (event.actor, event.target)
            ]
            if wrong:
                queries.append(
                    Query(
                        query_id=f"{clip.clip_id}:target:{event.event_id}:neg",
                        clip_id=clip.clip_id,
                        metric="target",
                        polarity="negative",
                        window=window,
                        overlays=(_red(clip, event.actor), _green(clip, min(wrong))),
                        question_text=question,
                        expected="no",
                    )
                )
    return queries


def generate_stillness_queries(annotations: AnnotationSet) -> list[Query]:
    """One full-clip probe per person with no annotated events; expected no."""
    queries = []
    for clip in annotations.clips:
        involved = {e.actor for e in clip.events}
        for person in clip.persons:
            if person.index in involved:
                continue
            queries.append(
                Query(
                    query_id=f"{clip.clip_id}:still:{person.index}",
                    clip_id=clip.clip_id,
                    metric="stillness",
                    polarity="n/a",
                    window=TimeWindow(0.0, clip.duration_s),
                    overlays=(_red(clip, person.index),),
                    question_text=STILLNESS_QUESTION,
                    expected="no",
                )
            )
    return queries


def generate_queries(annotations: AnnotationSet) -> list[Query]:
    return (
        generate_action_queries(annotations)
        + generate_target_queries(annotations)
        + generate_stillness_queries(annotations)
    )


# ---------------------------------------------------------------------------
# Voting and metrics
# ---------------------------------------------------------------------------


def majority_vote(answers) -> str:
    answers = tuple(answers)
    if len(answers) != 3 or any(a not in ("yes", "no") for a in answers):
        raise ValueError(f"need exactly 3 yes/no answers, got {answers!r}")
    return "yes" if answers.count("yes") >= 2 else "no"


METRICS = ("action", "target", "stillness")


@dataclass(frozen=True)
class MetricReport:
    action_acc: float
    target_acc: float
    stillness_acc: float
    per_oracle: dict[str, dict[str, float]]
    counts: dict[str, dict[str, int]]
    n_queries: int
    unparseable: int = 0
    oracle_names: tuple[str, str, str] = ("oracle-1", "oracle-2", "oracle-3")

    def accuracy(self, metric: str) -> float:
        return {"action": self.action_acc, "target": self.target_acc, "stillness": self.stillness_acc}[metric]

    def to_obj(self) -> dict[str, Any]:
        return {
            "action_acc": self.action_acc,
            "target_acc": self.target_acc,
            "stillness_acc": self.stillness_acc,
            "per_oracle": self.per_oracle,
            "counts": self.counts,
            "n_queries": self.n_queries,
            "unparseable": self.unparseable,
            "oracle_names": list(self.oracle_names),
        }

    def to_table(self) -> str:
        rows = [f"{'metric':<12}{'majority':>10}" + "".join(f"{n:>16}" for n in self.oracle_names)]
        for metric in METRICS:
            cells = "".join(f"{self.per_oracle[n][metric]:>16.1f}" for n in self.oracle_names)
            rows.append(f"{metric:<12}{self.accuracy(metric):>10.1f}{cells}")
        rows.append(f"queries: {self.n_queries}  unparseable answers: {self.unparseable}")
        return "\n".join(rows)


def _accuracy(pairs: list[tuple[str, str]]) -> float:
    """Percentage of (answer, expected) pairs that agree; 0.0 on empty."""
    if not pairs:
        return 0.0
    hits = sum(1 for got, want in pairs if got == want)
    return 100.0 * hits / len(pairs)


def compute_metrics(
    queries: list[Query],
    votes: dict[str, VoteRecord],
    oracle_names: tuple[str, str, str] = ("oracle-1", "oracle-2", "oracle-3"),
    unparseable: int = 0,
) -> MetricReport:
    missing = [q.query_id for q in queries if q.query_id not in votes]
    if missing:
        raise ValueError(f"missing votes for {len(missing)} queries, e.g. {missing[:3]}")
    by_metric: dict[str, list[tuple[str, str]]] = {m: [] for m in METRICS}
    per_oracle_pairs: dict[str, dict[str, list[tuple[str, str]]]] = {
        name: {m: [] for m in METRICS} for name in oracle_names
    }
    counts: dict[str, dict[str, int]] = {m: {} for m in METRICS}
    for q in queries:
        rec = votes[q.query_id]
        by_metric[q.metric].append((rec.majority, q.expected))
        counts[q.metric][q.polarity] = counts[q.metric].get(q.polarity, 0) + 1
        for name, answer in zip(oracle_names, rec.answers):
            per_oracle_pairs[name][q.metric].append((answer, q.expected))
    return MetricReport(
        action_acc=_accuracy(by_metric["action"]),
        target_acc=_accuracy(by_metric["target"]),
        stillness_acc=_accuracy(by_metric["stillness"]),
        per_oracle={
            name: {m: _accuracy(pairs[m]) for m in METRICS}
            for name, pairs in per_oracle_pairs.items()
        },
        counts=counts,
        n_queries=len(queries),
        unparseable=unparseable,
        oracle_names=tuple(oracle_names),
    )


def aggregate_runs(reports: list[MetricReport]) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation (n-1; 0.0 for a single run) per metric."""
    if not reports:
        raise ValueError("need at least one report")
    out = {}
    for metric in METRICS:
        values = [r.accuracy(metric) for r in reports]
        mean = sum(values) / len(values)
        if len(values) == 1:
            std = 0.0
        else:
            var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
            std = var**0.5
        out[metric] = (mean, std)
    return out
