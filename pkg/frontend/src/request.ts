/** EditorState -> GenerationRequest serialization (and back, for checks). */

import type { GrayCodec } from "./png.js";
import { clipToMask, makeGrid } from "./raster.js";
import type { EditorState, GenerationRequest, RasterGrid } from "./types.js";

function maskToBytes(mask: RasterGrid): RasterGrid {
  const out = makeGrid(mask.width, mask.height);
  for (let i = 0; i < mask.data.length; i++) out.data[i] = mask.data[i] ? 255 : 0;
  return out;
}

export async function buildRequest(
  state: EditorState,
  seed: number,
  codec: GrayCodec
): Promise<GenerationRequest> {
  if (!state.context) throw new Error("no context tile loaded");
  const strokes = [];
  for (const stroke of state.strokes) {
    strokes.push({
      pattern: stroke.pattern,
      raster: await codec.encodeGray8(clipToMask(stroke.coverage, state.mask)),
    });
  }
  return {
    mask: await codec.encodeGray8(maskToBytes(state.mask)),
    context: {
      streets: state.context.streetsPng,
      elevation: state.context.elevation,
      aspect: state.context.aspect,
    },
    junctions: state.junctions.map((j) => [j.row, j.col] as [number, number]),
    pattern_strokes: strokes,
    seed,
  };
}

/** Parse a serialized request back into its editable pieces. */
export async function parseRequest(
  request: GenerationRequest,
  codec: GrayCodec
): Promise<{
  junctions: [number, number][];
  mask: RasterGrid;
  strokes: { pattern: string; coverage: RasterGrid }[];
}> {
  const maskImg = await codec.decodeGray(request.mask);
  const mask = makeGrid(maskImg.width, maskImg.height);
  for (let i = 0; i < mask.data.length; i++) mask.data[i] = maskImg.data[i] > 0.5 ? 1 : 0;
  const strokes = [];
  for (const stroke of request.pattern_strokes) {
    const img = await codec.decodeGray(stroke.raster);
    const coverage = makeGrid(img.width, img.height);
    for (let i = 0; i < coverage.data.length; i++) {
      coverage.data[i] = img.data[i] > 0.5 ? 255 : 0;
    }
    strokes.push({ pattern: stroke.pattern, coverage });
  }
  return {
    junctions: request.junctions.map((j) => [j[0], j[1]] as [number, number]),
    mask,
    strokes,
  };
}
