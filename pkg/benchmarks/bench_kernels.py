#!/usr/bin/env python3
"""Compare the numpy reference kernels against the numba-parallel kernels.

Times the masked-biased softmax and dense block materialization on the
production-sized grid (21x30x52 visual tokens) and on a smaller desk grid.
Run:  python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from castmask import compile_scene, masked_attention, materialize_block, parse_scene_spec  # noqa: E402
from castmask import _kernels  # noqa: E402


def build(name: str, d_model: int):
    spec = parse_scene_spec((REPO / "fixtures" / "scenes" / f"{name}.json").read_text("utf-8"))
    compiled = compile_scene(spec, d_model=d_model)
    rng = np.random.default_rng(0)
    q = rng.normal(size=(compiled.recipe.n_visual, d_model))
    k = rng.normal(size=(compiled.recipe.n_text, d_model))
    return compiled.recipe, q, k


def timed(fn, repeats: int) -> float:
    fn()  # warmup (and JIT compile on the numba path)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    modes = ["numpy"] + (["numba"] if _kernels.NUMBA_AVAILABLE else [])
    if len(modes) == 1:
        print("numba unavailable; benchmarking the numpy path only")

    cases = [("golden_small", 16), ("example_three_person", 64)]
    print(f"{'case':<36}{'kernel':<22}{'numpy':>12}" + (f"{'numba':>12}{'speedup':>10}" if len(modes) > 1 else ""))
    for name, d_model in cases:
        recipe, q, k = build(name, d_model)
        shape = f"{name} ({recipe.n_visual}x{recipe.n_text})"
        for kernel, fn in (
            ("masked_attention", lambda: masked_attention(q, k, recipe)),
            ("materialize_block", lambda: materialize_block(recipe, (0, recipe.n_visual), (0, recipe.n_text))),
        ):
            results = {}
            for mode in modes:
                os.environ[_kernels.ENV_FLAG] = mode
                results[mode] = timed(fn, args.repeats)
            row = f"{shape:<36}{kernel:<22}{results['numpy'] * 1e3:>10.2f}ms"
            if "numba" in results:
                speed = results["numpy"] / results["numba"]
                row += f"{results['numba'] * 1e3:>10.2f}ms{speed:>9.2f}x"
            print(row)
    os.environ.pop(_kernels.ENV_FLAG, None)


if __name__ == "__main__":
    main()
