"""Block-sparse mask/bias recipes and the exact masked cross-attention kernel.

The recipe encodes two additive terms on the visual-to-text attention logits:
a mask that is 0 for background tokens everywhere and 0 for event tokens at
visual rows inside the event's region (-inf elsewhere), and a bias of
``gamma * sqrt(d_model)`` on directional tokens at rows inside their event's
region.  The softmax normalizes over unmasked entries only, so masked
weights are exactly zero - not 1e-9 residue - which is what makes the
leakage and isolation contracts exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import EventRegion, LatentGrid
from .prompt import TokenSpanMap

MASKED = float("-inf")

# Reweighting-strength sweep grid shipped as a named config.
GAMMA_SWEEP = (0.0, 0.1, 0.3, 0.5, 0.7, 1.0)
DEFAULT_GAMMA = 0.5
DEFAULT_D_MODEL = 64


@dataclass(frozen=True)
class MaskRecipe:
    grid: LatentGrid
    spans: TokenSpanMap
    regions: dict[tuple[int, int], EventRegion]
    gamma: float
    d_model: int
    # Kernel-ready encodings, derived once at build time.
    token_slot: np.ndarray = field(repr=False, compare=False)
    token_dir: np.ndarray = field(repr=False, compare=False)
    slot_rows: np.ndarray = field(repr=False, compare=False)
    slot_keys: tuple[tuple[int, int], ...] = field(repr=False, compare=False)

    @property
    def n_visual(self) -> int:
        return self.grid.n_cells

    @property
    def n_text(self) -> int:
        return self.spans.n_text_tokens

    @property
    def bias_magnitude(self) -> float:
        return self.gamma * math.sqrt(self.d_model)


def build_recipe(
    spans: TokenSpanMap,
    regions: dict[tuple[int, int], EventRegion],
    grid: LatentGrid,
    gamma: float = DEFAULT_GAMMA,
    d_model: int = DEFAULT_D_MODEL,
) -> MaskRecipe:
    """Validate and freeze a recipe, precomputing the kernel encodings."""
    spans.validate()
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if d_model < 1:
        raise ValueError(f"d_model must be >= 1, got {d_model}")
    span_keys = set(spans.per_event)
    region_keys = set(regions)
    if span_keys != region_keys:
        raise ValueError(
            f"event keys mismatch: spans only {sorted(span_keys - region_keys)}, "
            f"regions only {sorted(region_keys - span_keys)}"
        )
    n_v = grid.n_cells
    slot_keys = tuple(sorted(span_keys))
    slot_of = {key: i for i, key in enumerate(slot_keys)}

    token_slot = np.full(spans.n_text_tokens, -1, dtype=np.int64)
    token_dir = np.zeros(spans.n_text_tokens, dtype=np.bool_)
    for key, toks in spans.per_event.items():
        for l in toks:
            token_slot[l] = slot_of[key]
    for key, toks in spans.directional.items():
        for l in toks:
            token_slot[l] = slot_of[key]
            token_dir[l] = True

    slot_rows = np.zeros((len(slot_keys), n_v), dtype=np.bool_)
    for key, region in regions.items():
        idx = np.fromiter(region.indices, dtype=np.int64)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= n_v:
            raise ValueError(f"region {key} has indices outside the grid")
        slot_rows[slot_of[key], idx] = True

    for arr in (token_slot, token_dir, slot_rows):
        arr.setflags(write=False)
    return MaskRecipe(
        grid=grid,
        spans=spans,
        regions=dict(sorted(regions.items())),
        gamma=float(gamma),
        d_model=int(d_model),
        token_slot=token_slot,
        token_dir=token_dir,
        slot_rows=slot_rows,
        slot_keys=slot_keys,
    )


def _check_indices(recipe: MaskRecipe, v: int, l: int) -> None:
    if not (0 <= v < recipe.n_visual):
        raise IndexError(f"visual index {v} out of range [0, {recipe.n_visual})")
    if not (0 <= l < recipe.n_text):
        raise IndexError(f"text index {l} out of range [0, {recipe.n_text})")


def mask_entry(recipe: MaskRecipe, v: int, l: int) -> float:
    """0.0 where attending is allowed, -inf (MASKED) where it is not."""
    _check_indices(recipe, v, l)
    slot = recipe.token_slot[l]
    if slot < 0 or recipe.slot_rows[slot, v]:
        return 0.0
    return MASKED


def bias_entry(recipe: MaskRecipe, v: int, l: int) -> float:
    _check_indices(recipe, v, l)
    slot = recipe.token_slot[l]
    if slot >= 0 and recipe.token_dir[l] and recipe.slot_rows[slot, v]:
        return recipe.bias_magnitude
    return 0.0


def materialize_block(
    recipe: MaskRecipe, v_range: tuple[int, int], l_range: tuple[int, int]
) -> np.ndarray:
    """Dense float32 additive-logit block (mask + bias) for the given ranges."""
    v0, v1 = v_range
    l0, l1 = l_range
    if not (0 <= v0 < v1 <= recipe.n_visual and 0 <= l0 < l1 <= recipe.n_text):
        raise IndexError(f"block range v={v_range} l={l_range} out of bounds")
    return _kernels.materialize(
        recipe.token_slot,
        recipe.token_dir,
        recipe.slot_rows,
        recipe.bias_magnitude,
        (v0, v1),
        (l0, l1),
    )


def allowed_matrix(recipe: MaskRecipe) -> np.ndarray:
    """Boolean (n_visual, n_text) matrix of unmasked positions."""
    return _kernels._allowed_matrix(recipe.token_slot, recipe.slot_rows, recipe.n_visual)


@dataclass(frozen=True)
class AttentionResult:
    weights: np.ndarray
    per_row_leak: np.ndarray
    """Mass at masked positions per row; identically 0 when a recipe is applied."""


def masked_attention(queries: np.ndarray, keys: np.ndarray, recipe: MaskRecipe) -> AttentionResult:
    """softmax over text of QK^T/sqrt(d) + mask + bias, masked entries exactly 0."""
    q = np.asarray(queries, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or q.shape[1] != k.shape[1]:
        raise ValueError(f"shape mismatch: queries {q.shape} vs keys {k.shape}")
    if q.shape[1] != recipe.d_model:
        raise ValueError(f"embedding width {q.shape[1]} != recipe d_model {recipe.d_model}")
    if q.shape[0] != recipe.n_visual or k.shape[0] != recipe.n_text:
        raise ValueError(
            f"row counts ({q.shape[0]}, {k.shape[0]}) do not match recipe "
            f"({recipe.n_visual}, {recipe.n_text})"
        )
    scores = q @ k.T / math.sqrt(recipe.d_model)
    weights = _kernels.masked_biased_softmax(
        scores, recipe.token_slot, recipe.token_dir, recipe.slot_rows, recipe.bias_magnitude
    )
    return AttentionResult(weights=weights, per_row_leak=np.zeros(q.shape[0]))


def plain_attention(queries: np.ndarray, keys: np.ndarray) -> AttentionResult:
    """Unmasked baseline: softmax(QK^T/sqrt(d)) over the text axis."""
    q = np.asarray(queries, dtype=np.float64)
    k = np.asarray(keys, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or q.shape[1] != k.shape[1]:
        raise ValueError(f"shape mismatch: queries {q.shape} vs keys {k.shape}")
    scores = q @ k.T / math.sqrt(q.shape[1])
    token_slot = np.full(k.shape[0], -1, dtype=np.int64)
    token_dir = np.zeros(k.shape[0], dtype=np.bool_)
    slot_rows = np.zeros((0, q.shape[0]), dtype=np.bool_)
    weights = _kernels.masked_biased_softmax(scores, token_slot, token_dir, slot_rows, 0.0)
    return AttentionResult(weights=weights, per_row_leak=np.zeros(q.shape[0]))


def directional_mass(result: AttentionResult, recipe: MaskRecipe, s: int, k: int) -> float:
    """Mean over the event's rows of total weight on its directional tokens."""
    key = (s, k)
    if key not in recipe.regions:
        raise KeyError(f"unknown event {key}")
    dir_tokens = sorted(recipe.spans.directional.get(key, frozenset()))
    if not dir_tokens:
        return 0.0
    rows = sorted(recipe.regions[key].indices)
    return float(result.weights[np.ix_(rows, dir_tokens)].sum(axis=1).mean())
