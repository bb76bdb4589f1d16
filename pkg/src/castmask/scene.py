"""Scene-script schema: domain types, validation, and the document format.

A scene script is a single JSON document (UTF-8, key/value + arrays) with
fields mirroring :class:`SceneSpec`: image dimensions, fps, frame count, an
optional free scene sentence, persons with first-frame boxes, and social
events ``(actor, action, optional target, time window)``.  Boxes are
``[x_min, y_min, x_max, y_max]`` in image pixels (origin top-left); windows
are ``[start_s, end_s]`` in decimal seconds.  ``format_scene_spec`` writes the
canonical form (sorted keys, two-space indent) so identical specs always
yield byte-identical documents.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

from .categories import DEFAULT_CATEGORIES, ActionCategory, categorize_action
from .errors import SceneSpecError, UncategorizedActionError

# Reserved event_id for the synthetic "remains still" events attached to
# persons without annotated events; real events are 1-based.
STILLNESS_EVENT_ID = 0

STILLNESS_TEXT = "remains still with no notable action"


def canonical_dumps(obj: Any) -> str:
    """Serialize to the canonical JSON text used by every document format."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {self.as_list()}")

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


@dataclass(frozen=True)
class TimeWindow:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not (0 <= self.start_s < self.end_s):
            raise ValueError(f"degenerate window [{self.start_s}, {self.end_s}]")

    def as_list(self) -> list[float]:
        return [self.start_s, self.end_s]


@dataclass(frozen=True)
class PersonRef:
    index: int  # 1-based
    box: BoundingBox


@dataclass(frozen=True)
class SocialEvent:
    event_id: int  # 1-based; STILLNESS_EVENT_ID for synthetic stillness events
    actor: int
    action_text: str
    category: ActionCategory | None
    target: int | None
    window: TimeWindow

    @property
    def key(self) -> tuple[int, int]:
        return (self.actor, self.event_id)


@dataclass(frozen=True)
class SceneSpec:
    image_width: float
    image_height: float
    fps: float
    num_frames: int
    scene_text: str
    persons: tuple[PersonRef, ...]
    events: tuple[SocialEvent, ...]

    @property
    def clip_duration(self) -> float:
        return self.num_frames / self.fps

    def person(self, index: int) -> PersonRef:
        for p in self.persons:
            if p.index == index:
                return p
        raise KeyError(f"no person with index {index}")


def stillness_events(spec: SceneSpec) -> tuple[SocialEvent, ...]:
    """Synthetic full-clip events for persons with no annotated events.

    Stillness text is bound to the still person's own region rather than the
    background, so the mask gates it like any other event.
    """
    involved = {e.actor for e in spec.events}
    out = []
    for p in spec.persons:
        if p.index not in involved:
            out.append(
                SocialEvent(
                    event_id=STILLNESS_EVENT_ID,
                    actor=p.index,
                    action_text=STILLNESS_TEXT,
                    category=None,
                    target=None,
                    window=TimeWindow(0.0, spec.clip_duration),
                )
            )
    return tuple(out)


# ---------------------------------------------------------------------------
# Document parsing / formatting
# ---------------------------------------------------------------------------


class _Check:
    """Collects (field_path, message) diagnostics instead of failing fast."""

    def __init__(self):
        self.problems: list[tuple[str, str]] = []

    def fail(self, path: str, msg: str) -> None:
        self.problems.append((path, msg))

    def number(self, obj: dict, key: str, path: str, positive: bool = False) -> float | None:
        v = obj.get(key)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            self.fail(f"{path}.{key}", "expected a number")
            return None
        if positive and v <= 0:
            self.fail(f"{path}.{key}", "must be positive")
            return None
        return v

    def raise_if_failed(self) -> None:
        if self.problems:
            raise SceneSpecError(self.problems)


def parse_box(raw: Any, path: str, check: _Check) -> BoundingBox | None:
    if (
        not isinstance(raw, list)
        or len(raw) != 4
        or any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in raw)
    ):
        check.fail(path, "box must be [x_min, y_min, x_max, y_max]")
        return None
    x0, y0, x1, y1 = (float(v) for v in raw)
    if not (x0 < x1 and y0 < y1):
        check.fail(path, f"degenerate box {raw}")
        return None
    return BoundingBox(x0, y0, x1, y1)


def parse_persons(
    raw: Any, path: str, check: _Check, image_width: float, image_height: float
) -> tuple[PersonRef, ...]:
    if not isinstance(raw, list) or not raw:
        check.fail(path, "persons must be a non-empty array")
        return ()
    persons: list[PersonRef] = []
    seen: set[int] = set()
    for i, entry in enumerate(raw):
        p_path = f"{path}[{i}]"
        if not isinstance(entry, dict):
            check.fail(p_path, "expected an object")
            continue
        idx = entry.get("index")
        if not isinstance(idx, int) or isinstance(idx, bool) or idx < 1:
            check.fail(f"{p_path}.index", "expected a 1-based integer index")
            continue
        if idx in seen:
            check.fail(f"{p_path}.index", f"duplicate person index {idx}")
            continue
        seen.add(idx)
        box = parse_box(entry.get("box"), f"{p_path}.box", check)
        if box is None:
            continue
        if box.x_min < 0 or box.y_min < 0 or box.x_max > image_width or box.y_max > image_height:
            check.fail(f"{p_path}.box", f"box {box.as_list()} exceeds image bounds")
            continue
        persons.append(PersonRef(index=idx, box=box))
    if seen and sorted(seen) != list(range(1, len(seen) + 1)):
        check.fail(path, f"person indices must be contiguous 1..N, got {sorted(seen)}")
    return tuple(persons)


def parse_events(
    raw: Any,
    path: str,
    check: _Check,
    person_indices: set[int],
    clip_duration: float,
    categories: tuple[ActionCategory, ...] = DEFAULT_CATEGORIES,
) -> tuple[SocialEvent, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        check.fail(path, "events must be an array")
        return ()
    events: list[SocialEvent] = []
    for i, entry in enumerate(raw):
        e_path = f"{path}[{i}]"
        if not isinstance(entry, dict):
            check.fail(e_path, "expected an object")
            continue
        actor = entry.get("actor")
        if not isinstance(actor, int) or isinstance(actor, bool):
            check.fail(f"{e_path}.actor", "expected an integer person index")
            continue
        if actor not in person_indices:
            check.fail(f"{e_path}.actor", f"invalid actor index {actor}")
            continue
        target = entry.get("target")
        if target is not None:
            if not isinstance(target, int) or isinstance(target, bool):
                check.fail(f"{e_path}.target", "expected an integer person index or null")
                continue
            if target not in person_indices:
                check.fail(f"{e_path}.target", f"invalid target index {target}")
                continue
            if target == actor:
                check.fail(f"{e_path}.target", "target must differ from actor")
                continue
        action = entry.get("action")
        if not isinstance(action, str) or not action.strip():
            check.fail(f"{e_path}.action", "expected non-empty action text")
            continue
        if action != action.strip():
            check.fail(f"{e_path}.action", "action text must not have leading/trailing whitespace")
            continue
        window_raw = entry.get("window")
        if (
            not isinstance(window_raw, list)
            or len(window_raw) != 2
            or any(not isinstance(v, (int, float)) or isinstance(v, bool) for v in window_raw)
        ):
            check.fail(f"{e_path}.window", "window must be [start_s, end_s]")
            continue
        start_s, end_s = float(window_raw[0]), float(window_raw[1])
        if not (0 <= start_s < end_s):
            check.fail(f"{e_path}.window", f"need 0 <= start < end, got {window_raw}")
            continue
        if end_s > clip_duration + 1e-9:
            check.fail(f"{e_path}.window", f"window end {end_s} exceeds clip duration {clip_duration}")
            continue
        try:
            category = categorize_action(action, categories)
        except UncategorizedActionError:
            check.fail(f"{e_path}.action", f"no action category matched {action!r}")
            continue
        events.append(
            SocialEvent(
                event_id=len(events) + 1,
                actor=actor,
                action_text=action,
                category=category,
                target=target,
                window=TimeWindow(start_s, end_s),
            )
        )
    return tuple(events)


def parse_scene_spec(document: str) -> SceneSpec:
    """Parse and validate a scene-script document.

    Every violated invariant is reported with its field path; nothing is
    silently coerced.
    """
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SceneSpecError([("$", f"malformed document: {exc}")]) from exc
    if not isinstance(obj, dict):
        raise SceneSpecError([("$", "top-level value must be an object")])

    check = _Check()
    width = check.number(obj, "image_width", "$", positive=True)
    height = check.number(obj, "image_height", "$", positive=True)
    fps = check.number(obj, "fps", "$", positive=True)
    num_frames = obj.get("num_frames")
    if not isinstance(num_frames, int) or isinstance(num_frames, bool) or num_frames < 1:
        check.fail("$.num_frames", "expected an integer >= 1")
        num_frames = None
    scene_text = obj.get("scene_text", "")
    if not isinstance(scene_text, str):
        check.fail("$.scene_text", "expected a string")
        scene_text = ""
    check.raise_if_failed()

    persons = parse_persons(obj.get("persons"), "$.persons", check, width, height)
    duration = num_frames / fps
    events = parse_events(
        obj.get("events"), "$.events", check, {p.index for p in persons}, duration
    )
    check.raise_if_failed()

    return SceneSpec(
        image_width=width,
        image_height=height,
        fps=fps,
        num_frames=num_frames,
        scene_text=scene_text,
        persons=tuple(sorted(persons, key=lambda p: p.index)),
        events=events,
    )


def format_scene_spec(spec: SceneSpec) -> str:
    """Canonical document for a spec; parse(format(spec)) == spec."""
    obj = {
        "image_width": spec.image_width,
        "image_height": spec.image_height,
        "fps": spec.fps,
        "num_frames": spec.num_frames,
        "scene_text": spec.scene_text,
        "persons": [{"index": p.index, "box": p.box.as_list()} for p in spec.persons],
        "events": [
            {
                "actor": e.actor,
                "action": e.action_text,
                "target": e.target,
                "window": e.window.as_list(),
            }
            for e in spec.events
        ],
    }
    return canonical_dumps(obj)


def load_scene_spec(path) -> SceneSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_scene_spec(fh.read())


def save_scene_spec(spec: SceneSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_scene_spec(spec))


def left_to_right(persons: tuple[PersonRef, ...]) -> tuple[PersonRef, ...]:
    """Persons ordered by box center-x, ties broken by person index."""
    return tuple(sorted(persons, key=lambda p: (p.box.center()[0], p.index)))


def format_seconds(value: float) -> str:
    """Seconds for prompt timestamps: bare integer when whole, else repr."""
    if math.isfinite(value) and value == int(value):
        return str(int(value))
    return repr(value)
