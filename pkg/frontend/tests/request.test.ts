import { describe, expect, it } from "vitest";

import { RawCodec } from "../src/png.js";
import { buildRequest, parseRequest } from "../src/request.js";
import { at, gridsEqual } from "../src/raster.js";
import {
  createEditor,
  loadContext,
  paintMaskRect,
  paintPattern,
  placeJunction,
  setActivePattern,
} from "../src/state.js";
import type { ContextTile } from "../src/types.js";

const TILE: ContextTile = {
  streetsPng: "streets-b64",
  elevation: { png: "elev-b64", lo: 12.5, hi: 87.5 },
  aspect: { png: "aspect-b64", lo: -1, hi: 360 },
  size: 64,
};

const codec = new RawCodec();

function editor() {
  let state = loadContext(createEditor(64), TILE);
  state = paintMaskRect(state, 10, 10, 50, 50);
  return state;
}

describe("request serialization", () => {
  it("carries a placed junction's (row, col) exactly", async () => {
    let state = editor();
    state = placeJunction(state, 17, 42).state;
    const request = await buildRequest(state, 5, codec);
    expect(request.junctions).toEqual([[17, 42]]);
    expect(request.seed).toBe(5);
  });

  it("passes the context rasters through untouched", async () => {
    const request = await buildRequest(editor(), 0, codec);
    expect(request.context.streets).toBe("streets-b64");
    expect(request.context.elevation).toEqual({ png: "elev-b64", lo: 12.5, hi: 87.5 });
    expect(request.context.aspect).toEqual({ png: "aspect-b64", lo: -1, hi: 360 });
  });

  it("round-trips marker coordinates, mask, and stroke rasters exactly", async () => {
    let state = editor();
    state = placeJunction(state, 20, 21).state;
    state = placeJunction(state, 33, 12).state;
    state = setActivePattern(state, "gated_compound");
    state = paintPattern(state, 25, 25, 5);
    const request = await buildRequest(state, 9, codec);
    const parsed = await parseRequest(request, codec);
    expect(parsed.junctions).toEqual([
      [20, 21],
      [33, 12],
    ]);
    expect(gridsEqual(parsed.mask, state.mask)).toBe(true);
    expect(parsed.strokes).toHaveLength(1);
    expect(parsed.strokes[0].pattern).toBe("gated_compound");
    expect(gridsEqual(parsed.strokes[0].coverage, state.strokes[0].coverage)).toBe(true);
  });

  it("serialized strokes never cover context pixels", async () => {
    let state = editor();
    state = paintPattern(state, 10, 10, 6); // straddles the mask corner
    const request = await buildRequest(state, 0, codec);
    const parsed = await parseRequest(request, codec);
    for (let r = 0; r < 64; r++) {
      for (let c = 0; c < 64; c++) {
        if (at(parsed.strokes[0].coverage, r, c)) {
          expect(at(parsed.mask, r, c)).toBe(1);
        }
      }
    }
  });

  it("refuses to build a request without a context tile", async () => {
    const bare = paintMaskRect(createEditor(64), 5, 5, 20, 20);
    await expect(buildRequest(bare, 0, codec)).rejects.toThrow("no context tile");
  });
});
