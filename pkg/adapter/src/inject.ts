/**
 * All-or-nothing injection: every cross-attention layer receives the
 * materialized additive block, or nothing is touched and an error is raised.
 */

import { materialize } from "./blocks.js";
import { CompiledView, RecipeView, compileView } from "./recipe.js";
import { HostPipeline } from "./toyHost.js";

export class InjectionError extends Error {}

export function inject(host: HostPipeline, view: RecipeView): CompiledView {
  const compiled = compileView(view);
  if (host.dModel !== compiled.dModel) {
    throw new InjectionError(
      `host width ${host.dModel} does not match recipe d_model ${compiled.dModel}`,
    );
  }
  const hookless = host.layers
    .map((layer, i) => (layer.supportsBias ? -1 : i))
    .filter((i) => i >= 0);
  if (hookless.length > 0) {
    throw new InjectionError(`layers without a bias hook: ${hookless.join(", ")}`);
  }
  const block = materialize(compiled);
  for (const layer of host.layers) {
    layer.attentionBias = block;
  }
  return compiled;
}

export function uninstall(host: HostPipeline): void {
  for (const layer of host.layers) layer.attentionBias = null;
}
