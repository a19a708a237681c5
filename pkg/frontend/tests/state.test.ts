import { describe, expect, it } from "vitest";

import { at, countNonZero } from "../src/raster.js";
import {
  createEditor,
  deleteJunction,
  loadContext,
  moveJunction,
  paintMaskBrush,
  paintMaskRect,
  paintPattern,
  placeJunction,
  setActivePattern,
  setTool,
  canGenerate,
} from "../src/state.js";
import type { ContextTile } from "../src/types.js";

const TILE: ContextTile = {
  streetsPng: "streets-b64",
  elevation: { png: "elev-b64", lo: 0, hi: 100 },
  aspect: { png: "aspect-b64", lo: -1, hi: 360 },
  size: 64,
};

function editorWithMask() {
  let state = loadContext(createEditor(64), TILE);
  state = paintMaskRect(state, 16, 16, 47, 47);
  return state;
}

describe("mask painting", () => {
  it("paints rectangles and brushes", () => {
    let state = createEditor(64);
    state = paintMaskRect(state, 4, 4, 7, 9);
    expect(countNonZero(state.mask)).toBe(4 * 6);
    state = paintMaskBrush(state, 30, 30, 3);
    expect(at(state.mask, 30, 30)).toBe(1);
    state = paintMaskRect(state, 4, 4, 7, 9, true);
    expect(at(state.mask, 5, 5)).toBe(0);
  });

  it("erasing the mask drops junctions that fall outside", () => {
    let state = editorWithMask();
    state = placeJunction(state, 20, 20).state;
    expect(state.junctions).toHaveLength(1);
    state = paintMaskRect(state, 16, 16, 47, 47, true);
    expect(state.junctions).toHaveLength(0);
  });
});

describe("junction placement", () => {
  it("places a junction exactly at the clicked pixel", () => {
    const state = editorWithMask();
    const result = placeJunction(state, 23, 31);
    expect(result.rejected).toBe(false);
    expect(result.state.junctions).toEqual([{ row: 23, col: 31 }]);
  });

  it("rejects clicks outside the mask without changing state", () => {
    const state = editorWithMask();
    const result = placeJunction(state, 2, 2);
    expect(result.rejected).toBe(true);
    expect(result.state).toBe(state);
  });

  it("drags update coordinates and stay mask-bound", () => {
    let state = editorWithMask();
    state = placeJunction(state, 20, 20).state;
    const moved = moveJunction(state, 0, 40, 41);
    expect(moved.rejected).toBe(false);
    expect(moved.state.junctions[0]).toEqual({ row: 40, col: 41 });
    const outside = moveJunction(moved.state, 0, 1, 1);
    expect(outside.rejected).toBe(true);
    expect(outside.state.junctions[0]).toEqual({ row: 40, col: 41 });
  });

  it("deletes junctions by index", () => {
    let state = editorWithMask();
    state = placeJunction(state, 20, 20).state;
    state = placeJunction(state, 30, 30).state;
    state = deleteJunction(state, 0);
    expect(state.junctions).toEqual([{ row: 30, col: 30 }]);
  });
});

describe("pattern strokes", () => {
  it("clips strokes to the mask", () => {
    let state = editorWithMask();
    state = setActivePattern(state, "medieval");
    state = paintPattern(state, 16, 16, 4);
    expect(state.strokes).toHaveLength(1);
    const stroke = state.strokes[0];
    for (let r = 0; r < 64; r++) {
      for (let c = 0; c < 64; c++) {
        if (at(stroke.coverage, r, c)) {
          expect(at(state.mask, r, c)).toBe(1);
        }
      }
    }
  });

  it("a stroke fully outside the mask is a no-op", () => {
    const state = editorWithMask();
    const next = paintPattern(state, 2, 2, 2);
    expect(next).toBe(state);
  });

  it("later strokes of a different pattern stay separate (later wins server-side)", () => {
    let state = editorWithMask();
    state = setActivePattern(state, "medieval");
    state = paintPattern(state, 20, 20, 3);
    state = setActivePattern(state, "orthogonal_grid");
    state = paintPattern(state, 20, 20, 3);
    expect(state.strokes.map((s) => s.pattern)).toEqual(["medieval", "orthogonal_grid"]);
  });
});

describe("generation gating", () => {
  it("requires a context tile and a nonempty mask", () => {
    let state = createEditor(64);
    expect(canGenerate(state)).toBe(false);
    state = loadContext(state, TILE);
    expect(canGenerate(state)).toBe(false);
    state = paintMaskRect(state, 8, 8, 16, 16);
    expect(canGenerate(state)).toBe(true);
  });

  it("tool switching is tracked", () => {
    const state = setTool(createEditor(64), "junction");
    expect(state.tool).toBe("junction");
  });
});
