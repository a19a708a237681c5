/** Pure editor-state transitions; the DOM layer only renders and dispatches.
 *
 * Junction markers and pattern strokes are constrained to the painted
 * generation region, and gallery entries are frozen once appended.
 */

import { at, clipToMask, cloneGrid, countNonZero, makeGrid, paintDisc, paintRect } from "./raster.js";
import type {
  ContextTile,
  EditorState,
  GalleryEntry,
  GenerationRequest,
  GenerationResponse,
  Junction,
  PatternName,
  RasterGrid,
  Tool,
} from "./types.js";

export function createEditor(size: number): EditorState {
  return {
    size,
    context: null,
    mask: makeGrid(size, size),
    junctions: [],
    strokes: [],
    tool: "mask-rect",
    activePattern: "orthogonal_grid",
    gallery: [],
    pending: false,
  };
}

export function loadContext(state: EditorState, context: ContextTile): EditorState {
  return { ...createEditor(context.size), context, tool: state.tool };
}

export function setTool(state: EditorState, tool: Tool): EditorState {
  return { ...state, tool };
}

export function setActivePattern(state: EditorState, pattern: PatternName): EditorState {
  return { ...state, activePattern: pattern };
}

function insideMask(state: EditorState, row: number, col: number): boolean {
  return (
    row >= 0 &&
    row < state.size &&
    col >= 0 &&
    col < state.size &&
    at(state.mask, row, col) === 1
  );
}

/** Re-apply mask constraints after the mask itself changed. */
function constrainToMask(state: EditorState): EditorState {
  return {
    ...state,
    junctions: state.junctions.filter((j) => insideMask(state, j.row, j.col)),
    strokes: state.strokes.map((s) => ({
      pattern: s.pattern,
      coverage: clipToMask(s.coverage, state.mask),
    })),
  };
}

export function paintMaskRect(
  state: EditorState,
  r0: number,
  c0: number,
  r1: number,
  c1: number,
  erase = false
): EditorState {
  const mask = paintRect(state.mask, r0, c0, r1, c1, erase ? 0 : 1);
  return constrainToMask({ ...state, mask });
}

export function paintMaskBrush(
  state: EditorState,
  row: number,
  col: number,
  radius: number,
  erase = false
): EditorState {
  const mask = paintDisc(state.mask, row, col, radius, erase ? 0 : 1);
  return constrainToMask({ ...state, mask });
}

export interface PlacementResult {
  state: EditorState;
  rejected: boolean;
}

/** Add a junction marker; clicks outside the generation region are rejected
 * without any state change. */
export function placeJunction(state: EditorState, row: number, col: number): PlacementResult {
  if (!insideMask(state, row, col)) {
    return { state, rejected: true };
  }
  const junction: Junction = { row: Math.round(row), col: Math.round(col) };
  return { state: { ...state, junctions: [...state.junctions, junction] }, rejected: false };
}

export function moveJunction(
  state: EditorState,
  index: number,
  row: number,
  col: number
): PlacementResult {
  if (index < 0 || index >= state.junctions.length) return { state, rejected: true };
  if (!insideMask(state, row, col)) return { state, rejected: true };
  const junctions = state.junctions.map((j, i) =>
    i === index ? { row: Math.round(row), col: Math.round(col) } : j
  );
  return { state: { ...state, junctions }, rejected: false };
}

export function deleteJunction(state: EditorState, index: number): EditorState {
  return { ...state, junctions: state.junctions.filter((_, i) => i !== index) };
}

/** Paint one pattern brush stamp. The stroke is clipped to the mask, so a
 * stroke entirely outside the generation region is a no-op. */
export function paintPattern(
  state: EditorState,
  row: number,
  col: number,
  radius: number
): EditorState {
  const stamp = clipToMask(
    paintDisc(makeGrid(state.size, state.size), row, col, radius, 255),
    state.mask
  );
  if (countNonZero(stamp) === 0) return state;
  const last = state.strokes[state.strokes.length - 1];
  if (last && last.pattern === state.activePattern) {
    // extend the running stroke of the same pattern
    const merged = cloneGrid(last.coverage);
    for (let i = 0; i < merged.data.length; i++) {
      if (stamp.data[i]) merged.data[i] = 255;
    }
    const strokes = [...state.strokes.slice(0, -1), { pattern: last.pattern, coverage: merged }];
    return { ...state, strokes };
  }
  return {
    ...state,
    strokes: [...state.strokes, { pattern: state.activePattern, coverage: stamp }],
  };
}

export function canGenerate(state: EditorState): boolean {
  return state.context !== null && !state.pending && countNonZero(state.mask) > 0;
}

export function markPending(state: EditorState, pending: boolean): EditorState {
  return { ...state, pending };
}

let nextEntryId = 1;

export function appendGalleryEntry(
  state: EditorState,
  request: GenerationRequest,
  response: GenerationResponse,
  now: number
): EditorState {
  const entry: GalleryEntry = Object.freeze({
    id: nextEntryId++,
    request,
    response,
    createdAt: now,
  });
  return { ...state, gallery: Object.freeze([...state.gallery, entry]) as GalleryEntry[] };
}
