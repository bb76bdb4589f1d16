#!/usr/bin/env python3
"""Regenerate every checked-in fixture and golden file under fixtures/.

Runs the single-threaded reference kernel path so binary goldens are
byte-stable.  The canonical prompt texts are asserted against strings fixed
in this script before being written, so the golden files pin the grammar
itself rather than whatever the serializer happens to emit.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

os.environ["CASTMASK_KERNEL"] = "numpy"

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from castmask import (  # noqa: E402
    compile_scene,
    materialize_block,
    parse_scene_spec,
)
from castmask.artifacts import write_block, write_recipe  # noqa: E402
from castmask.harness import (  # noqa: E402
    DeterministicStream,
    init_toy_model,
    instance_embeddings,
    isolation_probe,
    leakage_report,
    run_stack,
)
from castmask.scene import canonical_dumps, format_scene_spec  # noqa: E402

FIXTURES = REPO / "fixtures"

THREE_PERSON_PROMPT = (
    "There are 3 people in the scene: the person on the left (speaker 1), "
    "the person in the middle (speaker 2), the person on the right (speaker 3). "
    "[0s--3s] The person on the left listening while touching his chin. "
    "[1s--4s] The person in the middle speaks leftward to speaker 1 with anger. "
    "The person on the right remains still with no notable action."
)

TWO_PERSON_PROMPT = (
    "There are 2 people in the scene: the person on the left (speaker 1), "
    "the person on the right (speaker 2). "
    "[0s--4s] The person on the left speaking while waving his hand. "
    "[2s--5s] The person on the right smiling with joy."
)

SCENES = {
    "example_three_person": {
        "image_width": 832,
        "image_height": 480,
        "fps": 16.0,
        "num_frames": 81,
        "scene_text": "",
        "persons": [
            {"index": 1, "box": [40.0, 120.0, 240.0, 460.0]},
            {"index": 2, "box": [320.0, 110.0, 520.0, 460.0]},
            {"index": 3, "box": [600.0, 130.0, 800.0, 460.0]},
        ],
        "events": [
            {"actor": 1, "action": "listening while touching his chin", "target": None,
             "window": [0.0, 3.0]},
            {"actor": 2, "action": "speaks to speaker 1 with anger", "target": 1,
             "window": [1.0, 4.0]},
        ],
    },
    "example_two_person": {
        "image_width": 832,
        "image_height": 480,
        "fps": 16.0,
        "num_frames": 81,
        "scene_text": "",
        "persons": [
            {"index": 1, "box": [60.0, 100.0, 380.0, 470.0]},
            {"index": 2, "box": [460.0, 100.0, 780.0, 470.0]},
        ],
        "events": [
            {"actor": 1, "action": "speaking while waving his hand", "target": None,
             "window": [0.0, 4.0]},
            {"actor": 2, "action": "smiling with joy", "target": None, "window": [2.0, 5.0]},
        ],
    },
    "golden_small": {
        "image_width": 128,
        "image_height": 96,
        "fps": 8.0,
        "num_frames": 9,
        "scene_text": "",
        "persons": [
            {"index": 1, "box": [8.0, 10.0, 56.0, 88.0]},
            {"index": 2, "box": [72.0, 12.0, 120.0, 90.0]},
        ],
        "events": [
            {"actor": 1, "action": "points at speaker 2", "target": 2, "window": [0.0, 0.5]},
            {"actor": 2, "action": "smiling with joy", "target": None, "window": [0.6, 1.1]},
        ],
    },
    "leaky_overlap": {
        "image_width": 160,
        "image_height": 96,
        "fps": 8.0,
        "num_frames": 13,
        "scene_text": "A crowded table.",
        "persons": [
            {"index": 1, "box": [10.0, 8.0, 80.0, 90.0]},
            {"index": 2, "box": [50.0, 10.0, 120.0, 92.0]},
            {"index": 3, "box": [95.0, 6.0, 155.0, 88.0]},
        ],
        "events": [
            {"actor": 1, "action": "speaks to speaker 3", "target": 3, "window": [0.0, 0.8]},
            {"actor": 3, "action": "nods", "target": None, "window": [0.9, 1.5]},
        ],
    },
}

INSTANCES = {
    "golden_small": {"seed": 7, "embedding_seed": 8, "d_model": 16, "n_layers": 2,
                     "perturbation_scale": 0.5},
    "leaky_overlap": {"seed": 11, "embedding_seed": 12, "d_model": 16, "n_layers": 2,
                      "perturbation_scale": 0.5},
}

ANNOTATIONS = {
    "clips": [
        {
            "clip_id": "talkshow-0001",
            "duration_s": 5.0,
            "image_width": 832,
            "image_height": 480,
            "media": None,
            "persons": [
                {"index": 1, "box": [40.0, 120.0, 240.0, 460.0]},
                {"index": 2, "box": [320.0, 110.0, 520.0, 460.0]},
                {"index": 3, "box": [600.0, 130.0, 800.0, 460.0]},
            ],
            "events": [
                {"actor": 1, "action": "listening while touching his chin", "target": None,
                 "window": [0.0, 3.0]},
                {"actor": 2, "action": "speaks to speaker 1 with anger", "target": 1,
                 "window": [1.0, 4.0]},
            ],
        },
        {
            "clip_id": "boardgame-0002",
            "duration_s": 5.0,
            "image_width": 640,
            "image_height": 360,
            "media": None,
            "persons": [
                {"index": 1, "box": [10.0, 60.0, 150.0, 350.0]},
                {"index": 2, "box": [170.0, 55.0, 310.0, 350.0]},
                {"index": 3, "box": [330.0, 60.0, 470.0, 355.0]},
                {"index": 4, "box": [490.0, 50.0, 630.0, 350.0]},
            ],
            "events": [
                {"actor": 1, "action": "points at the banker", "target": 3,
                 "window": [0.5, 2.5]},
                {"actor": 3, "action": "waves", "target": None, "window": [2.0, 4.0]},
            ],
        },
        {
            "clip_id": "interview-0003",
            "duration_s": 6.0,
            "image_width": 320,
            "image_height": 192,
            "media": None,
            "persons": [
                {"index": 1, "box": [10.0, 20.0, 150.0, 180.0]},
                {"index": 2, "box": [170.0, 20.0, 310.0, 180.0]},
            ],
            "events": [
                {"actor": 1, "action": "speaks to speaker 2", "target": 2,
                 "window": [1.0, 5.0]},
            ],
        },
    ]
}


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    print(f"wrote {path.relative_to(REPO)}")


def main() -> None:
    for name, obj in SCENES.items():
        write_text(FIXTURES / "scenes" / f"{name}.json", canonical_dumps(obj))

    write_text(FIXTURES / "annotations" / "demo_annotations.json", canonical_dumps(ANNOTATIONS))

    # Prompt goldens, anchored to the strings fixed above.
    for name, expected in (
        ("example_three_person", THREE_PERSON_PROMPT),
        ("example_two_person", TWO_PERSON_PROMPT),
    ):
        spec = parse_scene_spec((FIXTURES / "scenes" / f"{name}.json").read_text("utf-8"))
        compiled = compile_scene(spec)
        assert compiled.layout.full_text == expected, f"{name} prompt deviates from the example"
        write_text(FIXTURES / "golden" / f"{name}.prompt.txt", compiled.layout.full_text)
        write_recipe(compiled.recipe, compiled.layout, FIXTURES / "golden" / f"{name}.sdmr")
        print(f"wrote fixtures/golden/{name}.sdmr")

    # Round-trip sanity: canonical documents reparse to themselves.
    for name in SCENES:
        text = (FIXTURES / "scenes" / f"{name}.json").read_text("utf-8")
        assert format_scene_spec(parse_scene_spec(text)) == text, f"{name} is not canonical"

    # Dense-block and toy-harness goldens on the two small fixtures.
    baselines = {}
    for name, inst in INSTANCES.items():
        spec = parse_scene_spec((FIXTURES / "scenes" / f"{name}.json").read_text("utf-8"))
        compiled = compile_scene(spec, d_model=inst["d_model"])
        recipe = compiled.recipe
        write_recipe(recipe, compiled.layout, FIXTURES / "golden" / f"{name}.sdmr")
        block = materialize_block(recipe, (0, recipe.n_visual), (0, recipe.n_text))
        write_block(block, FIXTURES / "golden" / f"{name}.sdmb")
        print(f"wrote fixtures/golden/{name}.sdmb ({block.shape[0]}x{block.shape[1]})")

        descriptor = dict(inst)
        descriptor["recipe"] = f"golden/{name}.sdmr"
        write_text(FIXTURES / "instances" / f"{name}.json", canonical_dumps(descriptor))

        model = init_toy_model(inst["seed"], inst["d_model"], inst["n_layers"])
        visual, text = instance_embeddings(
            inst["embedding_seed"], recipe.n_visual, recipe.n_text, inst["d_model"]
        )
        outputs, attns = run_stack(model, visual, text, recipe)
        for layer, attn in enumerate(attns):
            write_block(
                attn.weights.astype(np.float32),
                FIXTURES / "golden" / f"{name}_attn_layer{layer}.sdmb",
            )
        write_block(outputs.astype(np.float32), FIXTURES / "golden" / f"{name}_outputs.sdmb")

        plain_outputs, plain_attns = run_stack(model, visual, text, None)
        unmasked = leakage_report(plain_attns, recipe)
        first_key = sorted(recipe.regions)[0]
        baselines[name] = {
            "unmasked_total_leak": unmasked.total_leak,
            "unmasked_per_row_max": unmasked.per_row_max,
            "unmasked_isolation_first_event": isolation_probe(
                model, visual, text, None, first_key, inst["perturbation_scale"],
                reference_recipe=recipe,
            ),
            "first_event": list(first_key),
        }

    write_text(FIXTURES / "golden" / "leak_baselines.json", canonical_dumps(baselines))

    stream = DeterministicStream(7)
    stream_vals = [stream.next_uniform() for _ in range(5)]
    write_text(FIXTURES / "golden" / "lcg_seed7.json", canonical_dumps({"seed": 7, "first": stream_vals}))


if __name__ == "__main__":
    main()
