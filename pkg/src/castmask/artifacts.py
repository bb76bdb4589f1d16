"""Recipe (SDMR) and dense-block (SDMB) artifact files.

SDMR is text, UTF-8::

    SDMR <version> sha256:<hex>\n
    <canonical JSON body>

The checksum covers the raw body bytes (everything after the first newline),
so readers in any language can verify without re-canonicalizing JSON.  The
body holds a header object (grid dims, n_text_tokens, d_model, gamma as a
decimal string), the prompt text with its byte segments, the token span
listing, and the per-event region rectangles.  The writer emits sorted keys
and sorted listings, so write -> read -> write is byte-identical.

SDMB is binary: magic ``SDMB``, then version, rows, cols as little-endian
u32, then rows*cols IEEE-754 float32 values, little-endian, row-major
(negative infinity permitted).
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .attention import MaskRecipe, build_recipe
from .errors import ArtifactError
from .geometry import EventRegion, LatentGrid
from .prompt import PromptLayout, Segment, SegmentKind, TokenSpanMap
from .scene import canonical_dumps

SDMR_MAGIC = "SDMR"
SDMR_VERSION = 1
SDMB_MAGIC = b"SDMB"
SDMB_VERSION = 1


def _recipe_body(recipe: MaskRecipe, layout: PromptLayout) -> dict:
    grid = recipe.grid
    return {
        "header": {
            "d_model": recipe.d_model,
            "gamma": repr(recipe.gamma),
            "grid": {
                "t_lat": grid.t_lat,
                "h_lat": grid.h_lat,
                "w_lat": grid.w_lat,
                "spatial_factor": grid.spatial_factor,
                "temporal_factor": grid.temporal_factor,
                "fps": grid.fps,
                "image_width": grid.image_width,
                "image_height": grid.image_height,
                "num_frames": grid.num_frames,
            },
            "n_text_tokens": recipe.spans.n_text_tokens,
        },
        "prompt": {
            "text": layout.full_text,
            "segments": [
                [seg.kind.value, seg.actor, seg.event_id, seg.byte_start, seg.byte_end]
                for seg in layout.segments
            ],
        },
        "spans": {
            "background": sorted(recipe.spans.background),
            "events": [
                {
                    "actor": s,
                    "event": k,
                    "tokens": sorted(recipe.spans.per_event[(s, k)]),
                    "directional": sorted(recipe.spans.directional.get((s, k), frozenset())),
                }
                for s, k in sorted(recipe.spans.per_event)
            ],
        },
        "regions": [
            {
                "actor": s,
                "event": k,
                "blocks": [list(b) for b in recipe.regions[(s, k)].block_form],
            }
            for s, k in sorted(recipe.regions)
        ],
    }


def dumps_recipe(recipe: MaskRecipe, layout: PromptLayout) -> str:
    body = canonical_dumps(_recipe_body(recipe, layout))
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{SDMR_MAGIC} {SDMR_VERSION} sha256:{digest}\n{body}"


def loads_recipe(text: str) -> tuple[MaskRecipe, PromptLayout]:
    newline = text.find("\n")
    if newline < 0:
        raise ArtifactError("truncated recipe artifact: no header line")
    head = text[:newline].split(" ")
    if len(head) != 3 or head[0] != SDMR_MAGIC:
        raise ArtifactError(f"bad recipe magic line {text[:newline]!r}")
    try:
        version = int(head[1])
    except ValueError as exc:
        raise ArtifactError(f"bad recipe version {head[1]!r}") from exc
    if version != SDMR_VERSION:
        raise ArtifactError(f"unsupported recipe version {version}")
    if not head[2].startswith("sha256:"):
        raise ArtifactError("missing checksum field")
    body = text[newline + 1 :]
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if digest != head[2][len("sha256:") :]:
        raise ArtifactError("recipe checksum mismatch")
    try:
        obj = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"malformed recipe body: {exc}") from exc
    try:
        return _recipe_from_body(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"invalid recipe body: {exc}") from exc


def _recipe_from_body(obj: dict) -> tuple[MaskRecipe, PromptLayout]:
    header = obj["header"]
    g = header["grid"]
    grid = LatentGrid(
        t_lat=g["t_lat"],
        h_lat=g["h_lat"],
        w_lat=g["w_lat"],
        spatial_factor=g["spatial_factor"],
        temporal_factor=g["temporal_factor"],
        fps=g["fps"],
        image_width=g["image_width"],
        image_height=g["image_height"],
        num_frames=g["num_frames"],
    )
    segments = tuple(
        Segment(SegmentKind(kind), actor, event, start, end)
        for kind, actor, event, start, end in obj["prompt"]["segments"]
    )
    layout = PromptLayout(full_text=obj["prompt"]["text"], segments=segments)
    layout.validate()

    spans_obj = obj["spans"]
    per_event = {}
    directional = {}
    for entry in spans_obj["events"]:
        key = (entry["actor"], entry["event"])
        per_event[key] = frozenset(entry["tokens"])
        if entry["directional"]:
            directional[key] = frozenset(entry["directional"])
    spans = TokenSpanMap(
        n_text_tokens=header["n_text_tokens"],
        background=frozenset(spans_obj["background"]),
        per_event=per_event,
        directional=directional,
    )

    regions = {}
    for entry in obj["regions"]:
        key = (entry["actor"], entry["event"])
        blocks = tuple(tuple(b) for b in entry["blocks"])
        indices = frozenset(
            grid.flatten(t, h, w)
            for t, h0, h1, w0, w1 in blocks
            for h in range(h0, h1)
            for w in range(w0, w1)
        )
        regions[key] = EventRegion(
            actor=entry["actor"], event_id=entry["event"], indices=indices, block_form=blocks
        )

    recipe = build_recipe(
        spans=spans,
        regions=regions,
        grid=grid,
        gamma=float(header["gamma"]),
        d_model=header["d_model"],
    )
    return recipe, layout


def write_recipe(recipe: MaskRecipe, layout: PromptLayout, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_recipe(recipe, layout))


def read_recipe(path) -> tuple[MaskRecipe, PromptLayout]:
    with open(path, encoding="utf-8", newline="") as fh:
        return loads_recipe(fh.read())


# ---------------------------------------------------------------------------
# SDMB dense blocks
# ---------------------------------------------------------------------------


def dumps_block(block: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(block, dtype=np.float32)
    if arr.ndim != 2:
        raise ArtifactError(f"block must be 2-D, got shape {arr.shape}")
    header = SDMB_MAGIC + struct.pack("<III", SDMB_VERSION, arr.shape[0], arr.shape[1])
    return header + arr.astype("<f4", copy=False).tobytes(order="C")


def loads_block(data: bytes) -> np.ndarray:
    if len(data) < 16 or data[:4] != SDMB_MAGIC:
        raise ArtifactError("bad block magic")
    version, rows, cols = struct.unpack("<III", data[4:16])
    if version != SDMB_VERSION:
        raise ArtifactError(f"unsupported block version {version}")
    expected = 16 + 4 * rows * cols
    if len(data) != expected:
        raise ArtifactError(f"block payload is {len(data)} bytes, expected {expected}")
    return np.frombuffer(data[16:], dtype="<f4").reshape(rows, cols).copy()


def write_block(block: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_block(block))


def read_block(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return loads_block(fh.read())
