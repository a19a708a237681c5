import type { RasterGrid } from "./types.js";

export function makeGrid(width: number, height: number): RasterGrid {
  return { width, height, data: new Uint8Array(width * height) };
}

export function cloneGrid(grid: RasterGrid): RasterGrid {
  return { width: grid.width, height: grid.height, data: grid.data.slice() };
}

export function at(grid: RasterGrid, row: number, col: number): number {
  return grid.data[row * grid.width + col];
}

function withValue(
  grid: RasterGrid,
  paint: (set: (row: number, col: number) => void) => void,
  value: number
): RasterGrid {
  const next = cloneGrid(grid);
  const set = (row: number, col: number) => {
    if (row >= 0 && row < next.height && col >= 0 && col < next.width) {
      next.data[row * next.width + col] = value;
    }
  };
  paint(set);
  return next;
}

export function paintRect(
  grid: RasterGrid,
  r0: number,
  c0: number,
  r1: number,
  c1: number,
  value = 1
): RasterGrid {
  const [ra, rb] = r0 <= r1 ? [r0, r1] : [r1, r0];
  const [ca, cb] = c0 <= c1 ? [c0, c1] : [c1, c0];
  return withValue(
    grid,
    (set) => {
      for (let r = ra; r <= rb; r++) {
        for (let c = ca; c <= cb; c++) set(r, c);
      }
    },
    value
  );
}

export function paintDisc(
  grid: RasterGrid,
  row: number,
  col: number,
  radius: number,
  value = 1
): RasterGrid {
  const r2 = radius * radius;
  return withValue(
    grid,
    (set) => {
      for (let r = Math.floor(row - radius); r <= row + radius; r++) {
        for (let c = Math.floor(col - radius); c <= col + radius; c++) {
          const dr = r - row;
          const dc = c - col;
          if (dr * dr + dc * dc <= r2) set(r, c);
        }
      }
    },
    value
  );
}

/** Zero out every cell of `grid` where `mask` is zero. */
export function clipToMask(grid: RasterGrid, mask: RasterGrid): RasterGrid {
  const next = cloneGrid(grid);
  for (let i = 0; i < next.data.length; i++) {
    if (!mask.data[i]) next.data[i] = 0;
  }
  return next;
}

export function countNonZero(grid: RasterGrid): number {
  let n = 0;
  for (const v of grid.data) if (v) n++;
  return n;
}

export function gridsEqual(a: RasterGrid, b: RasterGrid): boolean {
  if (a.width !== b.width || a.height !== b.height) return false;
  for (let i = 0; i < a.data.length; i++) {
    if (a.data[i] !== b.data[i]) return false;
  }
  return true;
}
