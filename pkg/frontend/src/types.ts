/** Shared data shapes for the studio editor and the generation API. */

export type PatternName =
  | "linear_development"
  | "gated_compound"
  | "medieval"
  | "irregular_grid"
  | "orthogonal_grid";

export type Tool =
  | "mask-rect"
  | "mask-brush"
  | "mask-erase"
  | "junction"
  | "pattern-brush"
  | "select";

/** Row-major single-channel raster; values are tool-specific (0/1 or 0/255). */
export interface RasterGrid {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;
}

export interface Junction {
  readonly row: number;
  readonly col: number;
}

/** One painted pattern stroke; later strokes overwrite earlier ones. */
export interface PatternStroke {
  readonly pattern: PatternName;
  /** 0/255 coverage raster at tile resolution. */
  readonly coverage: RasterGrid;
}

export interface ContextTile {
  /** base64 16-bit PNG of the street channel in [0, 1]. */
  readonly streetsPng: string;
  readonly elevation: { png: string; lo: number; hi: number };
  readonly aspect: { png: string; lo: number; hi: number };
  readonly size: number;
}

export interface GenerationRequest {
  mask: string;
  context: {
    streets: string;
    elevation: { png: string; lo: number; hi: number };
    aspect: { png: string; lo: number; hi: number };
  };
  junctions: [number, number][];
  pattern_strokes: { pattern: PatternName; raster: string }[];
  seed: number;
}

export interface GenerationResponse {
  composite: string;
  raw_output: string;
  elapsed_ms: number;
  request_hash: string;
  model_level: number;
  seed: number;
}

export interface GalleryEntry {
  readonly id: number;
  /** The exact request that produced this proposal. */
  readonly request: GenerationRequest;
  readonly response: GenerationResponse;
  readonly createdAt: number;
}

export interface EditorState {
  readonly size: number;
  readonly context: ContextTile | null;
  readonly mask: RasterGrid;
  readonly junctions: readonly Junction[];
  readonly strokes: readonly PatternStroke[];
  readonly tool: Tool;
  readonly activePattern: PatternName;
  readonly gallery: readonly GalleryEntry[];
  readonly pending: boolean;
}

export type Legend = Record<PatternName, string>;

export interface ServiceMeta {
  model_level: number;
  checkpoint_hash: string;
  pattern_legend: Legend;
  pattern_codes: Record<string, number>;
  condition_channels: string[];
}
