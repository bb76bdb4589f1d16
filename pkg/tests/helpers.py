"""Shared randomized-instance generators for the test suite."""

from __future__ import annotations

import numpy as np

from castmask.attention import build_recipe
from castmask.evaluation import AnnotationSet, ClipAnnotation
from castmask.geometry import build_grid
from castmask.pipeline import build_regions
from castmask.prompt import TokenSpanMap
from castmask.scene import (
    BoundingBox,
    PersonRef,
    SceneSpec,
    SocialEvent,
    TimeWindow,
)
from castmask.categories import categorize_action

# action_text -> has an unambiguous category; single/few words keep prompts short
ACTION_POOL = (
    "speaks",
    "points at the card",
    "nods",
    "laughs out loud",
    "waves",
    "leans back",
    "drinks",
    "looks around",
    "listens",
    "claps",
    "picks up the cup",
)


def random_box(rng: np.random.Generator, width: float, height: float) -> BoundingBox:
    x0 = rng.uniform(0, width - 2)
    x1 = rng.uniform(x0 + 1, width)
    y0 = rng.uniform(0, height - 2)
    y1 = rng.uniform(y0 + 1, height)
    return BoundingBox(x0, y0, x1, y1)


def random_window(
    rng: np.random.Generator, duration: float, quantum: float | None = None
) -> TimeWindow:
    start = rng.uniform(0, duration * 0.8)
    end = rng.uniform(start + duration * 0.05, duration)
    if quantum is not None:
        start = np.floor(start / quantum) * quantum
        end = min(duration, np.ceil(end / quantum) * quantum)
        if end <= start:
            end = min(duration, start + quantum)
    return TimeWindow(float(start), float(end))


def random_scene_spec(
    rng: np.random.Generator,
    n_persons: int | None = None,
    n_events: int | None = None,
    max_persons: int = 6,
    max_events: int = 4,
    with_scene_text: bool = True,
    width_choices=(160, 320, 832),
    height_choices=(96, 192, 480),
    max_frames: int = 32,
    window_quantum: float | None = None,
) -> SceneSpec:
    n = int(n_persons if n_persons is not None else rng.integers(1, max_persons + 1))
    k = int(n_events if n_events is not None else rng.integers(0, max_events + 1))
    width = float(rng.choice(width_choices))
    height = float(rng.choice(height_choices))
    fps = float(rng.choice([8, 16]))
    num_frames = int(rng.integers(5, max_frames + 1))
    duration = num_frames / fps
    persons = tuple(
        PersonRef(index=i + 1, box=random_box(rng, width, height)) for i in range(n)
    )
    events = []
    for j in range(k):
        actor = int(rng.integers(1, n + 1))
        target = None
        if n >= 2 and rng.random() < 0.5:
            choices = [p.index for p in persons if p.index != actor]
            target = int(rng.choice(choices))
        action = str(rng.choice(ACTION_POOL))
        events.append(
            SocialEvent(
                event_id=j + 1,
                actor=actor,
                action_text=action,
                category=categorize_action(action),
                target=target,
                window=random_window(rng, duration, quantum=window_quantum),
            )
        )
    return SceneSpec(
        image_width=width,
        image_height=height,
        fps=fps,
        num_frames=num_frames,
        scene_text="A small recorded social scene." if with_scene_text and rng.random() < 0.4 else "",
        persons=persons,
        events=tuple(events),
    )


def random_direct_instance(
    rng: np.random.Generator,
    max_grid=(8, 12, 20),
    max_persons: int = 6,
    max_events: int = 4,
    max_tokens: int = 64,
    gamma: float = 0.5,
    d_model: int = 16,
    force_directional: bool = False,
):
    """Recipe built from a random geometry-backed scene and a synthetic token
    partition; token budget is controlled exactly (prompt text not involved)."""
    t_cap, h_cap, w_cap = max_grid
    t_lat = int(rng.integers(1, t_cap + 1))
    h_lat = int(rng.integers(1, h_cap + 1))
    w_lat = int(rng.integers(1, w_cap + 1))
    spatial, temporal, fps = 16, 4, 16.0
    width, height = w_lat * spatial, h_lat * spatial
    num_frames = 1 + (t_lat - 1) * temporal
    grid = build_grid(width, height, num_frames, fps, spatial, temporal)
    assert (grid.t_lat, grid.h_lat, grid.w_lat) == (t_lat, h_lat, w_lat)
    duration = num_frames / fps

    n = int(rng.integers(1, max_persons + 1))
    k = int(rng.integers(0, max_events + 1))
    persons = tuple(PersonRef(index=i + 1, box=random_box(rng, width, height)) for i in range(n))
    events = []
    for j in range(k):
        actor = int(rng.integers(1, n + 1))
        events.append(
            SocialEvent(
                event_id=j + 1,
                actor=actor,
                action_text="speaks",
                category=None,
                target=None,
                window=random_window(rng, duration),
            )
        )
    spec = SceneSpec(
        image_width=width,
        image_height=height,
        fps=fps,
        num_frames=num_frames,
        scene_text="",
        persons=persons,
        events=tuple(events),
    )
    regions = build_regions(spec, grid, expansion_ratio=0.15)
    keys = sorted(regions)

    # Synthetic token partition: background first, then per-event and
    # directional allocations, all within the token budget.
    n_bg = int(rng.integers(1, 7))
    per_event_counts = {key: int(rng.integers(1, 5)) for key in keys}
    directed = [key for key in keys if rng.random() < 0.5]
    if force_directional and keys and not directed:
        directed = [keys[int(rng.integers(0, len(keys)))]]
    dir_counts = {key: int(rng.integers(1, 3)) for key in directed}
    total = n_bg + sum(per_event_counts.values()) + sum(dir_counts.values())
    assert total <= max_tokens
    order = rng.permutation(total)
    cursor = 0

    def take(count):
        nonlocal cursor
        chunk = frozenset(int(i) for i in order[cursor : cursor + count])
        cursor += count
        return chunk

    background = take(n_bg)
    per_event = {key: take(per_event_counts[key]) for key in keys}
    directional = {key: take(dir_counts[key]) for key in directed}
    spans = TokenSpanMap(
        n_text_tokens=total,
        background=background,
        per_event=per_event,
        directional=directional,
    )
    recipe = build_recipe(spans=spans, regions=regions, grid=grid, gamma=gamma, d_model=d_model)
    return recipe


def random_qk(rng: np.random.Generator, recipe, scale: float = 1.0):
    q = rng.normal(scale=scale, size=(recipe.n_visual, recipe.d_model))
    k = rng.normal(scale=scale, size=(recipe.n_text, recipe.d_model))
    return q, k


def random_annotations(rng: np.random.Generator, n_clips: int | None = None) -> AnnotationSet:
    n_clips = int(n_clips if n_clips is not None else rng.integers(1, 5))
    clips = []
    for c in range(n_clips):
        width, height = 320.0, 192.0
        duration = float(rng.uniform(4, 8))
        n = int(rng.integers(1, 6))
        persons = tuple(
            PersonRef(index=i + 1, box=random_box(rng, width, height)) for i in range(n)
        )
        k = int(rng.integers(0, 5))
        events = []
        for j in range(k):
            actor = int(rng.integers(1, n + 1))
            target = None
            if n >= 2 and rng.random() < 0.5:
                target = int(rng.choice([p.index for p in persons if p.index != actor]))
            action = str(rng.choice(ACTION_POOL))
            events.append(
                SocialEvent(
                    event_id=j + 1,
                    actor=actor,
                    action_text=action,
                    category=categorize_action(action),
                    target=target,
                    window=random_window(rng, duration),
                )
            )
        clips.append(
            ClipAnnotation(
                clip_id=f"clip-{c:03d}",
                duration_s=duration,
                image_width=width,
                image_height=height,
                persons=persons,
                events=tuple(events),
            )
        )
    return AnnotationSet(clips=tuple(clips))
