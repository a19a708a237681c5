/** Pattern colors come from the service's /meta endpoint only, so the UI
 * can never drift from the palette the backend documents. */

import type { GenServeClient } from "./api.js";
import type { Legend, PatternName } from "./types.js";

export const PATTERN_NAMES: PatternName[] = [
  "linear_development",
  "gated_compound",
  "medieval",
  "irregular_grid",
  "orthogonal_grid",
];

export async function loadLegend(client: GenServeClient): Promise<Legend> {
  const meta = await client.meta();
  for (const name of PATTERN_NAMES) {
    if (!(name in meta.pattern_legend)) {
      throw new Error(`service legend is missing '${name}'`);
    }
  }
  return meta.pattern_legend;
}

export function colorFor(legend: Legend, pattern: PatternName): string {
  return legend[pattern];
}
