"""End-to-end compilation: scene script -> prompt -> spans -> regions -> recipe."""

from __future__ import annotations

from dataclasses import dataclass

from .attention import DEFAULT_D_MODEL, DEFAULT_GAMMA, MaskRecipe, build_recipe
from .geometry import (
    DEFAULT_EXPANSION_RATIO,
    DEFAULT_SPATIAL_FACTOR,
    DEFAULT_TEMPORAL_FACTOR,
    EventRegion,
    LatentGrid,
    build_grid,
    event_region,
)
from .prompt import PromptLayout, TokenSpanMap, map_spans_to_tokens, serialize_prompt
from .scene import SceneSpec, stillness_events
from .tokenizer import MockTokenizer, Tokenizer


@dataclass(frozen=True)
class CompiledScene:
    spec: SceneSpec
    layout: PromptLayout
    spans: TokenSpanMap
    grid: LatentGrid
    regions: dict[tuple[int, int], EventRegion]
    recipe: MaskRecipe


def build_regions(
    spec: SceneSpec, grid: LatentGrid, expansion_ratio: float = DEFAULT_EXPANSION_RATIO
) -> dict[tuple[int, int], EventRegion]:
    """Regions for every annotated event plus the synthetic stillness events."""
    regions = {}
    for event in list(spec.events) + list(stillness_events(spec)):
        region = event_region(grid, spec, event, expansion_ratio)
        regions[region.key] = region
    return regions


def compile_scene(
    spec: SceneSpec,
    gamma: float = DEFAULT_GAMMA,
    d_model: int = DEFAULT_D_MODEL,
    spatial_factor: int = DEFAULT_SPATIAL_FACTOR,
    temporal_factor: int = DEFAULT_TEMPORAL_FACTOR,
    expansion_ratio: float = DEFAULT_EXPANSION_RATIO,
    tokenizer: Tokenizer | None = None,
) -> CompiledScene:
    tokenizer = tokenizer if tokenizer is not None else MockTokenizer()
    layout = serialize_prompt(spec)
    spans = map_spans_to_tokens(layout, tokenizer)
    grid = build_grid(
        spec.image_width, spec.image_height, spec.num_frames, spec.fps,
        spatial_factor, temporal_factor,
    )
    regions = build_regions(spec, grid, expansion_ratio)
    recipe = build_recipe(spans=spans, regions=regions, grid=grid, gamma=gamma, d_model=d_model)
    return CompiledScene(
        spec=spec, layout=layout, spans=spans, grid=grid, regions=regions, recipe=recipe
    )
