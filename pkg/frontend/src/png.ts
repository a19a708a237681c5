/** PNG codecs behind an interface so the state/request logic stays
 * testable outside a browser. The canvas implementation is used in the
 * app; tests inject a fake codec. */

import type { RasterGrid } from "./types.js";

export interface GrayCodec {
  /** Encode a 0..255 grid as base64 8-bit grayscale PNG. */
  encodeGray8(grid: RasterGrid): Promise<string>;
  /** Decode a base64 grayscale PNG (any depth) to normalized [0, 1]. */
  decodeGray(b64: string): Promise<{ width: number; height: number; data: Float32Array }>;
}

export class CanvasCodec implements GrayCodec {
  async encodeGray8(grid: RasterGrid): Promise<string> {
    const canvas = document.createElement("canvas");
    canvas.width = grid.width;
    canvas.height = grid.height;
    const ctx = canvas.getContext("2d")!;
    const image = ctx.createImageData(grid.width, grid.height);
    for (let i = 0; i < grid.data.length; i++) {
      const v = grid.data[i];
      image.data[4 * i] = v;
      image.data[4 * i + 1] = v;
      image.data[4 * i + 2] = v;
      image.data[4 * i + 3] = 255;
    }
    ctx.putImageData(image, 0, 0);
    return canvas.toDataURL("image/png").split(",")[1];
  }

  async decodeGray(b64: string): Promise<{ width: number; height: number; data: Float32Array }> {
    const img = new Image();
    img.src = `data:image/png;base64,${b64}`;
    await img.decode();
    const canvas = document.createElement("canvas");
    canvas.width = img.naturalWidth;
    canvas.height = img.naturalHeight;
    const ctx = canvas.getContext("2d")!;
    ctx.drawImage(img, 0, 0);
    const image = ctx.getImageData(0, 0, canvas.width, canvas.height);
    const data = new Float32Array(canvas.width * canvas.height);
    for (let i = 0; i < data.length; i++) {
      data[i] = image.data[4 * i] / 255;
    }
    return { width: canvas.width, height: canvas.height, data };
  }
}

/** Deterministic fake codec for tests: serializes raw bytes as base64. */
export class RawCodec implements GrayCodec {
  async encodeGray8(grid: RasterGrid): Promise<string> {
    const header = `${grid.width}x${grid.height}:`;
    let raw = header;
    for (const v of grid.data) raw += String.fromCharCode(v);
    return btoa(raw);
  }

  async decodeGray(b64: string): Promise<{ width: number; height: number; data: Float32Array }> {
    const raw = atob(b64);
    const sep = raw.indexOf(":");
    const [w, h] = raw.slice(0, sep).split("x").map(Number);
    const data = new Float32Array(w * h);
    for (let i = 0; i < data.length; i++) {
      data[i] = raw.charCodeAt(sep + 1 + i) / 255;
    }
    return { width: w, height: h, data };
  }
}
