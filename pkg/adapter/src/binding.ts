/**
 * A host binding names the backbone and carries everything needed to apply a
 * recipe on that host: its tokenizer (with byte offsets), attention width,
 * layer count, and the grid factors its VAE/patchifier actually uses.  The
 * factors must reproduce the recipe's latent dims exactly; a factor mismatch
 * means the mask was compiled for a different latent layout and silently
 * wrong rows would be gated.
 */

import { inject } from "./inject.js";
import { CompiledView, RecipeView } from "./recipe.js";
import { HostTokenizer, rebindView } from "./tokenizer.js";
import { HostPipeline, buildHost } from "./toyHost.js";

export class BindingError extends Error {}

export interface HostBinding {
  backboneId: string;
  tokenizer: HostTokenizer;
  dModel: number;
  nLayers: number;
  spatialFactor: number;
  temporalFactor: number;
}

export function checkGridFactors(view: RecipeView, binding: HostBinding): void {
  const g = view.grid;
  if (g.spatialFactor !== binding.spatialFactor || g.temporalFactor !== binding.temporalFactor) {
    throw new BindingError(
      `${binding.backboneId}: grid factors ${binding.spatialFactor}/${binding.temporalFactor} ` +
        `do not match the recipe's ${g.spatialFactor}/${g.temporalFactor}`,
    );
  }
  const hLat = Math.ceil(g.imageHeight / binding.spatialFactor);
  const wLat = Math.ceil(g.imageWidth / binding.spatialFactor);
  const tLat = 1 + Math.ceil((g.numFrames - 1) / binding.temporalFactor);
  if (hLat !== g.hLat || wLat !== g.wLat || tLat !== g.tLat) {
    throw new BindingError(
      `${binding.backboneId}: factors reproduce a ${tLat}x${hLat}x${wLat} grid, ` +
        `recipe expects ${g.tLat}x${g.hLat}x${g.wLat}`,
    );
  }
}

export interface BoundRecipe {
  host: HostPipeline;
  hostView: RecipeView;
  compiled: CompiledView;
}

/** Validate the binding, rebind spans onto the host tokenizer, and hook the
 * host's cross-attention layers (all-or-nothing). */
export function bindRecipe(view: RecipeView, binding: HostBinding, seed: number): BoundRecipe {
  checkGridFactors(view, binding);
  const hostView = rebindView(view, binding.tokenizer);
  const host = buildHost(seed, binding.dModel, binding.nLayers);
  const compiled = inject(host, hostView);
  return { host, hostView, compiled };
}
