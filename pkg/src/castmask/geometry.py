"""Mapping pixel boxes and second-valued windows onto the latent token grid.

Rasterization rules (the mask construction depends on these exactly):

* Spatial: cell (h, w) belongs to a box iff its pixel center
  ``((w + 0.5) * spatial_factor, (h + 0.5) * spatial_factor)`` lies inside the
  box (closed comparison).  If no cell center falls inside, the single cell
  containing the box center is used instead.
* Temporal: latent frame 0 covers pixel frame 0 only; latent frame t >= 1
  covers pixel frames ``1 + (t-1)*temporal_factor .. min(t*temporal_factor,
  num_frames-1)`` (image-to-video 1+k*factor frame convention).  A latent
  frame belongs to a window iff its covered time span ``[first/fps,
  (last+1)/fps]`` intersects the closed window - inclusive on both sides, so
  window boundaries never open coverage gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateRegionError
from .scene import BoundingBox, SceneSpec, SocialEvent, TimeWindow

DEFAULT_SPATIAL_FACTOR = 16
DEFAULT_TEMPORAL_FACTOR = 4
DEFAULT_EXPANSION_RATIO = 0.15


@dataclass(frozen=True)
class LatentGrid:
    t_lat: int
    h_lat: int
    w_lat: int
    spatial_factor: int
    temporal_factor: int
    fps: float
    image_width: float
    image_height: float
    num_frames: int

    @property
    def n_cells(self) -> int:
        return self.t_lat * self.h_lat * self.w_lat

    def flatten(self, t: int, h: int, w: int) -> int:
        return (t * self.h_lat + h) * self.w_lat + w

    def unflatten(self, index: int) -> tuple[int, int, int]:
        t, rest = divmod(index, self.h_lat * self.w_lat)
        h, w = divmod(rest, self.w_lat)
        return t, h, w

    def frame_coverage(self, t: int) -> tuple[int, int]:
        """Inclusive pixel-frame range covered by latent frame t."""
        if t == 0:
            return 0, 0
        first = 1 + (t - 1) * self.temporal_factor
        last = min(t * self.temporal_factor, self.num_frames - 1)
        return first, last


def build_grid(
    image_width: float,
    image_height: float,
    num_frames: int,
    fps: float,
    spatial_factor: int = DEFAULT_SPATIAL_FACTOR,
    temporal_factor: int = DEFAULT_TEMPORAL_FACTOR,
) -> LatentGrid:
    if min(image_width, image_height, num_frames, fps, spatial_factor, temporal_factor) <= 0:
        raise ValueError("all grid arguments must be positive")
    return LatentGrid(
        t_lat=1 + math.ceil((num_frames - 1) / temporal_factor),
        h_lat=math.ceil(image_height / spatial_factor),
        w_lat=math.ceil(image_width / spatial_factor),
        spatial_factor=spatial_factor,
        temporal_factor=temporal_factor,
        fps=fps,
        image_width=image_width,
        image_height=image_height,
        num_frames=num_frames,
    )


def expand_box(
    box: BoundingBox, ratio: float, image_width: float, image_height: float
) -> BoundingBox:
    """Grow each side outward by ratio x side-length, clamped to the image."""
    if not 0 <= ratio < 1:
        raise ValueError(f"expansion ratio must be in [0, 1), got {ratio}")
    dx = ratio * box.width
    dy = ratio * box.height
    return BoundingBox(
        x_min=max(0.0, box.x_min - dx),
        y_min=max(0.0, box.y_min - dy),
        x_max=min(float(image_width), box.x_max + dx),
        y_max=min(float(image_height), box.y_max + dy),
    )


def box_to_spatial_cells(grid: LatentGrid, box: BoundingBox) -> set[tuple[int, int]]:
    """Cells whose centers fall in the box; center cell as non-empty fallback."""
    sf = grid.spatial_factor
    hs = [h for h in range(grid.h_lat) if box.y_min <= (h + 0.5) * sf <= box.y_max]
    ws = [w for w in range(grid.w_lat) if box.x_min <= (w + 0.5) * sf <= box.x_max]
    if hs and ws:
        return {(h, w) for h in hs for w in ws}
    cx, cy = box.center()
    h = min(grid.h_lat - 1, max(0, int(cy // sf)))
    w = min(grid.w_lat - 1, max(0, int(cx // sf)))
    return {(h, w)}


def window_to_latent_frames(grid: LatentGrid, window: TimeWindow) -> set[int]:
    out = set()
    for t in range(grid.t_lat):
        first, last = grid.frame_coverage(t)
        if first / grid.fps <= window.end_s and window.start_s <= (last + 1) / grid.fps:
            out.add(t)
    return out


@dataclass(frozen=True)
class EventRegion:
    actor: int
    event_id: int
    indices: frozenset[int]
    block_form: tuple[tuple[int, int, int, int, int], ...]
    """Rectangles (t, h_start, h_stop, w_start, w_stop); stops are exclusive."""

    @property
    def key(self) -> tuple[int, int]:
        return (self.actor, self.event_id)

    def validate(self, grid: LatentGrid) -> None:
        covered = set()
        for t, h0, h1, w0, w1 in self.block_form:
            for h in range(h0, h1):
                for w in range(w0, w1):
                    covered.add(grid.flatten(t, h, w))
        if covered != set(self.indices):
            raise ValueError("block_form does not cover the region indices")


def event_region(
    grid: LatentGrid,
    spec: SceneSpec,
    event: SocialEvent,
    expansion_ratio: float = DEFAULT_EXPANSION_RATIO,
) -> EventRegion:
    """Spatiotemporal token set of one event: expanded actor box x window."""
    box = expand_box(
        spec.person(event.actor).box, expansion_ratio, spec.image_width, spec.image_height
    )
    cells = box_to_spatial_cells(grid, box)
    frames = window_to_latent_frames(grid, event.window)
    if not cells or not frames:
        raise DegenerateRegionError(
            f"event (actor={event.actor}, k={event.event_id}) maps to an empty region"
        )
    hs = sorted({h for h, _ in cells})
    ws = sorted({w for _, w in cells})
    # Center-in-box rasterization of a rectangle is always a dense cell rectangle.
    assert len(cells) == len(hs) * len(ws)
    h0, h1 = hs[0], hs[-1] + 1
    w0, w1 = ws[0], ws[-1] + 1
    blocks = tuple((t, h0, h1, w0, w1) for t in sorted(frames))
    indices = frozenset(
        grid.flatten(t, h, w) for t in frames for h in hs for w in ws
    )
    return EventRegion(actor=event.actor, event_id=event.event_id, indices=indices, block_form=blocks)
