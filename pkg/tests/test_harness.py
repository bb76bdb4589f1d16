from __future__ import annotations

import json

import numpy as np
import pytest

from castmask import (
    DeterministicStream,
    compile_scene,
    init_toy_model,
    instance_embeddings,
    isolation_probe,
    leakage_report,
    parse_scene_spec,
    run_stack,
)
from castmask.attention import allowed_matrix, build_recipe
from castmask.geometry import EventRegion, build_grid
from castmask.prompt import TokenSpanMap

from helpers import random_direct_instance
from oracles import LCG_SEED7_FIRST5, lcg_reference


class TestDeterministicStream:
    def test_matches_plain_integer_reference(self):
        stream = DeterministicStream(7)
        got = [stream.next_uniform() for _ in range(5)]
        assert got == lcg_reference(7, 5) == LCG_SEED7_FIRST5

    def test_golden_fixture(self, fixtures_dir):
        golden = json.loads((fixtures_dir / "golden" / "lcg_seed7.json").read_text())
        stream = DeterministicStream(golden["seed"])
        assert [stream.next_uniform() for _ in range(5)] == golden["first"]

    def test_range(self):
        stream = DeterministicStream(123)
        vals = [stream.next_uniform() for _ in range(1000)]
        assert all(-0.1 <= v < 0.1 for v in vals)


class TestInitToyModel:
    def test_bitwise_deterministic(self):
        a = init_toy_model(7, 16, 2)
        b = init_toy_model(7, 16, 2)
        for la, lb in zip(a.layers, b.layers):
            for wa, wb in ((la.wq, lb.wq), (la.wk, lb.wk), (la.wv, lb.wv), (la.wo, lb.wo)):
                assert wa.tobytes() == wb.tobytes()

    def test_seeds_differ(self):
        a = init_toy_model(7, 8, 1)
        b = init_toy_model(8, 8, 1)
        assert a.layers[0].wq.tobytes() != b.layers[0].wq.tobytes()

    def test_first_weight_is_first_stream_value(self):
        model = init_toy_model(7, 4, 1)
        assert model.layers[0].wq[0, 0] == LCG_SEED7_FIRST5[0]

    def test_zero_dims_rejected(self):
        with pytest.raises(ValueError):
            init_toy_model(1, 0, 1)
        with pytest.raises(ValueError):
            init_toy_model(1, 4, 0)


def _fixture_setup(fixtures_dir, name):
    spec = parse_scene_spec((fixtures_dir / "scenes" / f"{name}.json").read_text())
    inst = json.loads((fixtures_dir / "instances" / f"{name}.json").read_text())
    compiled = compile_scene(spec, d_model=inst["d_model"])
    model = init_toy_model(inst["seed"], inst["d_model"], inst["n_layers"])
    visual, text = instance_embeddings(
        inst["embedding_seed"], compiled.recipe.n_visual, compiled.recipe.n_text, inst["d_model"]
    )
    return compiled, model, visual, text, inst


class TestRunStack:
    def test_none_equals_all_background(self):
        grid = build_grid(48, 32, 5, 8, 16, 4)
        spans = TokenSpanMap(5, frozenset(range(5)), {}, {})
        recipe = build_recipe(spans, {}, grid, 0.5, 8)
        model = init_toy_model(3, 8, 2)
        visual, text = instance_embeddings(4, recipe.n_visual, recipe.n_text, 8)
        out_a, _ = run_stack(model, visual, text, recipe)
        out_b, _ = run_stack(model, visual, text, None)
        assert np.allclose(out_a, out_b, atol=1e-6)

    def test_zero_text_embeddings_uniform_rows(self):
        rng = np.random.default_rng(60)
        recipe = random_direct_instance(rng, max_grid=(2, 3, 4), max_persons=2, max_events=2)
        model = init_toy_model(5, recipe.d_model, 1)
        visual = rng.normal(size=(recipe.n_visual, recipe.d_model))
        text = np.zeros((recipe.n_text, recipe.d_model))
        _, attns = run_stack(model, visual, text, recipe)
        allowed = allowed_matrix(recipe)
        w = attns[0].weights
        for v in range(recipe.n_visual):
            n_allowed = allowed[v].sum()
            assert np.allclose(w[v, allowed[v]], 1.0 / n_allowed, atol=1e-12)
            assert np.all(w[v, ~allowed[v]] == 0.0)

    def test_reference_path_bitwise_deterministic(self, force_numpy_kernel, fixtures_dir):
        compiled, model, visual, text, _ = _fixture_setup(fixtures_dir, "golden_small")
        out1, _ = run_stack(model, visual, text, compiled.recipe)
        out2, _ = run_stack(model, visual, text, compiled.recipe)
        assert out1.tobytes() == out2.tobytes()

    def test_parallel_path_matches_reference(self, fixtures_dir, monkeypatch):
        from castmask import _kernels

        if not _kernels.NUMBA_AVAILABLE:
            pytest.skip("numba not available")
        compiled, model, visual, text, _ = _fixture_setup(fixtures_dir, "golden_small")
        monkeypatch.setenv("CASTMASK_KERNEL", "numpy")
        ref, _ = run_stack(model, visual, text, compiled.recipe)
        monkeypatch.setenv("CASTMASK_KERNEL", "numba")
        fast, _ = run_stack(model, visual, text, compiled.recipe)
        assert np.allclose(ref, fast, atol=1e-6)

    def test_shape_mismatch(self):
        model = init_toy_model(1, 8, 1)
        with pytest.raises(ValueError):
            run_stack(model, np.zeros((4, 7)), np.zeros((3, 8)))

    def test_per_layer_overrides(self, fixtures_dir):
        compiled, model, visual, text, _ = _fixture_setup(fixtures_dir, "golden_small")
        recipe = compiled.recipe
        uniform_out, uniform_attns = run_stack(model, visual, text, recipe)
        listed_out, _ = run_stack(model, visual, text, [recipe] * model.n_layers)
        assert np.array_equal(uniform_out, listed_out)
        # recipe on layer 0 only: first layer leak-free, second layer leaks
        _, mixed_attns = run_stack(model, visual, text, [recipe, None])
        assert leakage_report(mixed_attns[:1], recipe).total_leak == 0.0
        assert leakage_report(mixed_attns[1:], recipe).total_leak > 0.0
        with pytest.raises(ValueError, match="per-layer"):
            run_stack(model, visual, text, [recipe])


class TestLeakage:
    def test_masked_run_leaks_exactly_zero(self, fixtures_dir):
        compiled, model, visual, text, _ = _fixture_setup(fixtures_dir, "golden_small")
        _, attns = run_stack(model, visual, text, compiled.recipe)
        report = leakage_report(attns, compiled.recipe)
        assert report.total_leak == 0.0
        assert report.per_row_max == 0.0
        assert all(v == 0.0 for v in report.per_event_leak.values())

    def test_unmasked_baseline_matches_frozen_measurement(self, force_numpy_kernel, fixtures_dir):
        baselines = json.loads((fixtures_dir / "golden" / "leak_baselines.json").read_text())
        for name, frozen in baselines.items():
            compiled, model, visual, text, inst = _fixture_setup(fixtures_dir, name)
            _, attns = run_stack(model, visual, text, None)
            report = leakage_report(attns, compiled.recipe)
            assert report.total_leak > 0.0
            assert report.total_leak == pytest.approx(frozen["unmasked_total_leak"], rel=1e-6)
            assert report.per_row_max == pytest.approx(frozen["unmasked_per_row_max"], rel=1e-6)

    def test_full_coverage_single_event_no_masked_positions(self):
        grid = build_grid(32, 32, 1, 8, 16, 4)
        region = EventRegion(
            actor=1, event_id=1,
            indices=frozenset(range(grid.n_cells)),
            block_form=((0, 0, grid.h_lat, 0, grid.w_lat),),
        )
        spans = TokenSpanMap(4, frozenset({0, 1}), {(1, 1): frozenset({2, 3})}, {})
        recipe = build_recipe(spans, {(1, 1): region}, grid, 0.5, 8)
        model = init_toy_model(2, 8, 1)
        visual, text = instance_embeddings(3, recipe.n_visual, recipe.n_text, 8)
        _, attns = run_stack(model, visual, text, None)  # even unmasked: nothing is masked
        report = leakage_report(attns, recipe)
        assert report.total_leak == 0.0


class TestIsolation:
    def test_masked_probe_exactly_zero_for_every_event(self, fixtures_dir):
        for name in ("golden_small", "leaky_overlap"):
            compiled, model, visual, text, inst = _fixture_setup(fixtures_dir, name)
            for key in sorted(compiled.recipe.regions):
                delta = isolation_probe(
                    model, visual, text, compiled.recipe, key, inst["perturbation_scale"]
                )
                assert delta == 0.0, (name, key)

    def test_unmasked_control_positive_and_frozen(self, force_numpy_kernel, fixtures_dir):
        baselines = json.loads((fixtures_dir / "golden" / "leak_baselines.json").read_text())
        for name, frozen in baselines.items():
            compiled, model, visual, text, inst = _fixture_setup(fixtures_dir, name)
            key = tuple(frozen["first_event"])
            delta = isolation_probe(
                model, visual, text, None, key, inst["perturbation_scale"],
                reference_recipe=compiled.recipe,
            )
            assert delta > 0.0
            assert delta == pytest.approx(frozen["unmasked_isolation_first_event"], rel=1e-6)

    def test_background_perturbation_not_required_zero(self, fixtures_dir):
        # background is globally visible; moving it changes everything
        compiled, model, visual, text, _ = _fixture_setup(fixtures_dir, "golden_small")
        bg = sorted(compiled.recipe.spans.background)
        perturbed = text.copy()
        perturbed[bg] += 0.5
        base, _ = run_stack(model, visual, text, compiled.recipe)
        moved, _ = run_stack(model, visual, perturbed, compiled.recipe)
        assert np.abs(moved - base).max() > 0.0

    def test_temporal_ordering_surrogate(self):
        # same actor, same box, disjoint windows: perturbing event-1 text
        # changes nothing at event-2's latent frames (regions are disjoint)
        from castmask.scene import BoundingBox, PersonRef, SceneSpec, SocialEvent, TimeWindow

        spec = SceneSpec(
            image_width=64, image_height=64, fps=8, num_frames=17, scene_text="",
            persons=(PersonRef(1, BoundingBox(8, 8, 56, 56)),),
            events=(
                SocialEvent(1, 1, "speaks", None, None, TimeWindow(0.0, 0.4)),
                SocialEvent(2, 1, "nods", None, None, TimeWindow(1.3, 2.0)),
            ),
        )
        compiled = compile_scene(spec, d_model=8)
        recipe = compiled.recipe
        assert not (recipe.regions[(1, 1)].indices & recipe.regions[(1, 2)].indices)
        model = init_toy_model(9, 8, 2)
        visual, text = instance_embeddings(10, recipe.n_visual, recipe.n_text, 8)
        tokens = sorted(recipe.spans.event_tokens((1, 1)))
        perturbed = text.copy()
        perturbed[tokens] += 0.7
        base, _ = run_stack(model, visual, text, recipe)
        moved, _ = run_stack(model, visual, perturbed, recipe)
        other_rows = sorted(recipe.regions[(1, 2)].indices)
        assert np.array_equal(base[other_rows], moved[other_rows])

    def test_unknown_event_rejected(self, fixtures_dir):
        compiled, model, visual, text, _ = _fixture_setup(fixtures_dir, "golden_small")
        with pytest.raises(KeyError):
            isolation_probe(model, visual, text, compiled.recipe, (9, 9), 0.5)
