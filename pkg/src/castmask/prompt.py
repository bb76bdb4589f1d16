"""Canonical prompt serialization with byte-span provenance, and token spans.

Grammar (frozen; golden fixtures pin the exact bytes):

    header    := "There are N people in the scene: " enum "."      (N > 1)
               | "There is 1 person in the scene: " enum "."
    enum      := "the person <pos> (speaker <i>)" {", " ...}       left-to-right
    event     := "[<t1>s--<t2>s] The person <pos> <action>."       sorted by
                                                            (start, actor)
    stillness := "The person <pos> remains still with no notable action."
                                                            sorted by person

Sentences are joined by single spaces; a separator space belongs to the
segment that precedes it.  Positional descriptors are "on the left",
"second from the left", ..., "in the middle" (odd N), ..., "on the right".
For a targeted event whose boxes yield a direction, the direction word is
inserted right after the action's leading verb, and verb + direction word
form the event's Directional span.  All offsets are UTF-8 byte offsets.
"""

from __future__ import annotations

import enum
from bisect import bisect_right
from dataclasses import dataclass

from .errors import SceneSpecError
from .scene import (
    STILLNESS_EVENT_ID,
    STILLNESS_TEXT,
    BoundingBox,
    SceneSpec,
    SocialEvent,
    format_seconds,
    left_to_right,
    stillness_events,
)
from .tokenizer import Token, Tokenizer


class Direction(str, enum.Enum):
    LEFTWARD = "leftward"
    RIGHTWARD = "rightward"
    NONE = "none"


# Geometry within 5% of the image width of dead-ahead emits no direction
# word: only left/right cues exist, and ambiguous layouts should not inject
# misleading ones.
DIRECTION_TIE_BAND = 0.05


def derive_direction(
    actor_box: BoundingBox, target_box: BoundingBox, image_width: float
) -> Direction:
    """Left/right of the actor the target sits, from box centers."""
    eps = DIRECTION_TIE_BAND * image_width
    actor_cx = actor_box.center()[0]
    target_cx = target_box.center()[0]
    if target_cx < actor_cx - eps:
        return Direction.LEFTWARD
    if target_cx > actor_cx + eps:
        return Direction.RIGHTWARD
    return Direction.NONE


class SegmentKind(str, enum.Enum):
    BACKGROUND = "background"
    EVENT = "event"
    DIRECTIONAL = "directional"


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    actor: int | None
    event_id: int | None
    byte_start: int
    byte_end: int

    @property
    def key(self) -> tuple[int, int] | None:
        if self.kind is SegmentKind.BACKGROUND:
            return None
        return (self.actor, self.event_id)


@dataclass(frozen=True)
class PromptLayout:
    full_text: str
    segments: tuple[Segment, ...]

    def validate(self) -> None:
        total = len(self.full_text.encode("utf-8"))
        pos = 0
        for seg in self.segments:
            if seg.byte_start != pos or seg.byte_end <= seg.byte_start:
                raise ValueError(f"segments must be sorted, non-overlapping, covering; broke at {seg}")
            pos = seg.byte_end
        if pos != total:
            raise ValueError(f"segments cover {pos} of {total} bytes")
        # Directional spans must sit inside the textual hull of their event.
        hulls: dict[tuple[int, int], list[int]] = {}
        for seg in self.segments:
            if seg.kind is SegmentKind.EVENT:
                hull = hulls.setdefault(seg.key, [seg.byte_start, seg.byte_end])
                hull[0] = min(hull[0], seg.byte_start)
                hull[1] = max(hull[1], seg.byte_end)
        for seg in self.segments:
            if seg.kind is SegmentKind.DIRECTIONAL:
                hull = hulls.get(seg.key)
                if hull is None or seg.byte_start < hull[0] or seg.byte_end > hull[1]:
                    raise ValueError(f"directional span {seg} outside its event span")


_ORDINALS = (
    "second", "third", "fourth", "fifth", "sixth", "seventh",
    "eighth", "ninth", "tenth", "eleventh", "twelfth",
)


def positional_descriptor(position: int, n: int) -> str:
    """Descriptor for the person at `position` (0-based, left-to-right) of n."""
    if n > 1 and position == 0:
        return "on the left"
    if n > 1 and position == n - 1:
        return "on the right"
    if n % 2 == 1 and position == n // 2:
        return "in the middle"
    if position - 1 < len(_ORDINALS):
        return f"{_ORDINALS[position - 1]} from the left"
    return f"{position + 1}th from the left"


class _Builder:
    def __init__(self):
        self.parts: list[str] = []
        self.segs: list[list] = []  # [kind, actor, event_id, start, end]
        self.pos = 0

    def add(self, text: str, kind: SegmentKind, actor: int | None = None, event_id: int | None = None):
        if not text:
            return
        nbytes = len(text.encode("utf-8"))
        if self.segs and self.segs[-1][:3] == [kind, actor, event_id]:
            self.segs[-1][4] += nbytes
        else:
            self.segs.append([kind, actor, event_id, self.pos, self.pos + nbytes])
        self.parts.append(text)
        self.pos += nbytes

    def separator(self):
        # A sentence separator extends whatever segment precedes it.
        last = self.segs[-1]
        self.parts.append(" ")
        last[4] += 1
        self.pos += 1

    def layout(self) -> PromptLayout:
        segments = tuple(Segment(k, a, e, s, t) for k, a, e, s, t in self.segs)
        layout = PromptLayout(full_text="".join(self.parts), segments=segments)
        layout.validate()
        return layout


def _direction_for_event(spec: SceneSpec, event: SocialEvent) -> Direction:
    if event.target is None:
        return Direction.NONE
    return derive_direction(
        spec.person(event.actor).box, spec.person(event.target).box, spec.image_width
    )


def serialize_prompt(spec: SceneSpec) -> PromptLayout:
    """Render the canonical prompt and record segment provenance."""
    order = left_to_right(spec.persons)
    n = len(order)
    position_of = {p.index: i for i, p in enumerate(order)}

    b = _Builder()
    head = "There is 1 person in the scene: " if n == 1 else f"There are {n} people in the scene: "
    enum_txt = ", ".join(
        f"the person {positional_descriptor(i, n)} (speaker {p.index})" for i, p in enumerate(order)
    )
    b.add(head + enum_txt + ".", SegmentKind.BACKGROUND)
    if spec.scene_text:
        b.separator()
        b.add(spec.scene_text, SegmentKind.BACKGROUND)

    for event in sorted(spec.events, key=lambda e: (e.window.start_s, e.actor)):
        b.separator()
        t1 = format_seconds(event.window.start_s)
        t2 = format_seconds(event.window.end_s)
        desc = positional_descriptor(position_of[event.actor], n)
        prefix = f"[{t1}s--{t2}s] The person {desc} "
        direction = _direction_for_event(spec, event)
        if direction is Direction.NONE:
            b.add(prefix + event.action_text + ".", SegmentKind.EVENT, event.actor, event.event_id)
        else:
            space = event.action_text.find(" ")
            verb = event.action_text if space < 0 else event.action_text[:space]
            rest = "" if space < 0 else event.action_text[space:]
            b.add(prefix, SegmentKind.EVENT, event.actor, event.event_id)
            b.add(f"{verb} {direction.value}", SegmentKind.DIRECTIONAL, event.actor, event.event_id)
            b.add(rest + ".", SegmentKind.EVENT, event.actor, event.event_id)

    for still in stillness_events(spec):
        b.separator()
        desc = positional_descriptor(position_of[still.actor], n)
        b.add(
            f"The person {desc} {STILLNESS_TEXT}.",
            SegmentKind.EVENT,
            still.actor,
            STILLNESS_EVENT_ID,
        )

    return b.layout()


@dataclass(frozen=True)
class TokenSpanMap:
    """Token index sets for the background, per-event, and directional families.

    The three families partition ``range(n_text_tokens)``.  Directional tokens
    live only in ``directional`` but count as members of their event's span
    wherever event membership is tested.
    """

    n_text_tokens: int
    background: frozenset[int]
    per_event: dict[tuple[int, int], frozenset[int]]
    directional: dict[tuple[int, int], frozenset[int]]

    def validate(self) -> None:
        if not self.background:
            raise ValueError("background token set is empty")
        families = [self.background, *self.per_event.values(), *self.directional.values()]
        union: set[int] = set()
        total = 0
        for fam in families:
            union |= fam
            total += len(fam)
        if total != len(union) or union != set(range(self.n_text_tokens)):
            raise ValueError("token families must partition the token range")
        if not set(self.directional) <= set(self.per_event):
            raise ValueError("directional keys must be a subset of event keys")

    def event_tokens(self, key: tuple[int, int]) -> frozenset[int]:
        """Full span of an event: its own tokens plus its directional tokens."""
        return self.per_event[key] | self.directional.get(key, frozenset())


def map_spans_to_tokens(layout: PromptLayout, tokenizer: Tokenizer) -> TokenSpanMap:
    """Assign each token to the segment containing its first byte."""
    total = len(layout.full_text.encode("utf-8"))
    tokens: list[Token] = tokenizer.tokenize(layout.full_text)
    starts = [seg.byte_start for seg in layout.segments]

    background: set[int] = set()
    per_event: dict[tuple[int, int], set[int]] = {
        seg.key: set() for seg in layout.segments if seg.kind is SegmentKind.EVENT
    }
    directional: dict[tuple[int, int], set[int]] = {}
    for i, tok in enumerate(tokens):
        if tok.byte_start < 0 or tok.byte_end > total or tok.byte_start >= tok.byte_end:
            raise SceneSpecError(
                [("tokens", f"token {i} offsets [{tok.byte_start}, {tok.byte_end}) outside text")]
            )
        seg = layout.segments[bisect_right(starts, tok.byte_start) - 1]
        if seg.kind is SegmentKind.BACKGROUND:
            background.add(i)
        elif seg.kind is SegmentKind.EVENT:
            per_event[seg.key].add(i)
        else:
            directional.setdefault(seg.key, set()).add(i)

    span_map = TokenSpanMap(
        n_text_tokens=len(tokens),
        background=frozenset(background),
        per_event={k: frozenset(v) for k, v in sorted(per_event.items())},
        directional={k: frozenset(v) for k, v in sorted(directional.items())},
    )
    span_map.validate()
    return span_map
