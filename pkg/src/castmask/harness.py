"""Desk-scale cross-attention stack for exercising the mask/bias contracts.

The stack is cross-attention-only (no self-attention or feed-forward
sublayers) so the isolation properties hold exactly per layer rather than
statistically.  Weights come from a fully documented generator - a 64-bit
linear congruential stream - so fixtures reproduce bit-for-bit across
platforms and language boundaries:

    state' = (6364136223846793005 * state + 1442695040888963407) mod 2^64
    uniform = (state' >> 11) / 2^53          # top 53 bits -> [0, 1)
    value   = -0.1 + 0.2 * uniform           # [-0.1, 0.1)

Matrices fill row-major from consecutive draws; a model consumes, per layer,
the query, key, value, and output projections in that order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attention import AttentionResult, MaskRecipe, allowed_matrix, masked_attention, plain_attention

LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1


class DeterministicStream:
    """The documented LCG; values uniform in [-0.1, 0.1)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_uniform(self) -> float:
        self._state = (LCG_MULTIPLIER * self._state + LCG_INCREMENT) & _MASK64
        return -0.1 + 0.2 * ((self._state >> 11) / float(1 << 53))

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        out = np.empty((rows, cols), dtype=np.float64)
        flat = out.reshape(-1)
        for i in range(flat.size):
            flat[i] = self.next_uniform()
        out.setflags(write=False)
        return out


@dataclass(frozen=True)
class LayerWeights:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray


@dataclass(frozen=True)
class ToyModel:
    seed: int
    d_model: int
    n_layers: int
    layers: tuple[LayerWeights, ...]


def init_toy_model(seed: int, d_model: int, n_layers: int) -> ToyModel:
    if d_model < 1 or n_layers < 1:
        raise ValueError(f"need d_model >= 1 and n_layers >= 1, got {d_model}, {n_layers}")
    stream = DeterministicStream(seed)
    layers = tuple(
        LayerWeights(
            wq=stream.matrix(d_model, d_model),
            wk=stream.matrix(d_model, d_model),
            wv=stream.matrix(d_model, d_model),
            wo=stream.matrix(d_model, d_model),
        )
        for _ in range(n_layers)
    )
    return ToyModel(seed=seed, d_model=d_model, n_layers=n_layers, layers=layers)


def instance_embeddings(seed: int, n_visual: int, n_text: int, d_model: int):
    """Fixture embeddings: visual rows then text rows off one stream."""
    stream = DeterministicStream(seed)
    return stream.matrix(n_visual, d_model), stream.matrix(n_text, d_model)


def run_stack(
    model: ToyModel,
    visual: np.ndarray,
    text: np.ndarray,
    recipe: MaskRecipe | Sequence[MaskRecipe | None] | None = None,
) -> tuple[np.ndarray, tuple[AttentionResult, ...]]:
    """Residual cross-attention stack; returns outputs and per-layer attention.

    One recipe applies uniformly to every layer; a sequence supplies
    per-layer overrides (None = plain attention at that layer).
    """
    x = np.asarray(visual, dtype=np.float64)
    t = np.asarray(text, dtype=np.float64)
    if x.ndim != 2 or t.ndim != 2 or x.shape[1] != model.d_model or t.shape[1] != model.d_model:
        raise ValueError(
            f"embeddings must be (n, {model.d_model}); got {x.shape} and {t.shape}"
        )
    if isinstance(recipe, (list, tuple)):
        recipes = list(recipe)
        if len(recipes) != model.n_layers:
            raise ValueError(f"need {model.n_layers} per-layer recipes, got {len(recipes)}")
    else:
        recipes = [recipe] * model.n_layers
    attns = []
    for layer, layer_recipe in zip(model.layers, recipes):
        q = x @ layer.wq
        k = t @ layer.wk
        v = t @ layer.wv
        if layer_recipe is not None:
            attn = masked_attention(q, k, layer_recipe)
        else:
            attn = plain_attention(q, k)
        attns.append(attn)
        x = x + (attn.weights @ v) @ layer.wo
    return x, tuple(attns)


@dataclass(frozen=True)
class LeakReport:
    per_event_leak: dict[tuple[int, int], float]
    total_leak: float
    per_row_max: float


def leakage_report(attns: tuple[AttentionResult, ...], recipe: MaskRecipe) -> LeakReport:
    """Mass at positions the recipe masks, aggregated over layers.

    Per event: mean over visual rows *outside* the event's region of the
    weight falling on the event's tokens (its masked columns).  Zero by
    construction on masked runs; measures leakage on unmasked baselines.
    """
    allowed = allowed_matrix(recipe)
    masked = ~allowed
    totals = []
    row_max = 0.0
    per_event_layers: dict[tuple[int, int], list[float]] = {k: [] for k in recipe.regions}
    for attn in attns:
        w = attn.weights
        if w.shape != masked.shape:
            raise ValueError(f"attention shape {w.shape} does not match recipe {masked.shape}")
        masked_mass = np.where(masked, w, 0.0).sum(axis=1)
        totals.append(float(masked_mass.mean()))
        row_max = max(row_max, float(masked_mass.max()))
        for slot, key in enumerate(recipe.slot_keys):
            cols = sorted(recipe.spans.event_tokens(key))
            outside = ~recipe.slot_rows[slot]
            if not outside.any():
                per_event_layers[key].append(0.0)
                continue
            per_event_layers[key].append(float(w[np.ix_(np.where(outside)[0], cols)].sum(axis=1).mean()))
    return LeakReport(
        per_event_leak={k: float(np.mean(v)) for k, v in per_event_layers.items()},
        total_leak=float(np.mean(totals)),
        per_row_max=row_max,
    )


def isolation_probe(
    model: ToyModel,
    visual: np.ndarray,
    text: np.ndarray,
    recipe: MaskRecipe | None,
    event_key: tuple[int, int],
    perturbation,
    reference_recipe: MaskRecipe | None = None,
) -> float:
    """Max |output delta| outside the event's region after perturbing its text.

    Perturbs the text embeddings of the event's tokens (directional included)
    by `perturbation` (scalar or length-d vector).  With the recipe applied
    the result is exactly 0; `recipe=None` runs the unmasked control, with
    `reference_recipe` supplying the region/token bookkeeping.
    """
    book = recipe if recipe is not None else reference_recipe
    if book is None:
        raise ValueError("need a recipe (or reference_recipe) to locate the event")
    if event_key not in book.regions:
        raise KeyError(f"unknown event {event_key}")
    tokens = sorted(book.spans.event_tokens(event_key))
    region = book.regions[event_key].indices

    text = np.asarray(text, dtype=np.float64)
    perturbed = text.copy()
    perturbed[tokens] = perturbed[tokens] + perturbation

    base, _ = run_stack(model, visual, text, recipe)
    moved, _ = run_stack(model, visual, perturbed, recipe)
    outside = np.array([v for v in range(base.shape[0]) if v not in region], dtype=np.int64)
    if outside.size == 0:
        return 0.0
    return float(np.abs(moved[outside] - base[outside]).max())
