/** DOM wiring for the studio: canvas layers, tools, and the proposal gallery. */

import { GenServeClient, ServiceError } from "./api.js";
import { colorFor, loadLegend, PATTERN_NAMES } from "./legend.js";
import { CanvasCodec } from "./png.js";
import { buildRequest } from "./request.js";
import {
  appendGalleryEntry,
  canGenerate,
  createEditor,
  deleteJunction,
  loadContext,
  markPending,
  moveJunction,
  paintMaskBrush,
  paintMaskRect,
  paintPattern,
  placeJunction,
  setActivePattern,
  setTool,
} from "./state.js";
import type { EditorState, Legend, PatternName, Tool } from "./types.js";

const TILE = 256;
const JUNCTION_COLOR = "#ff00ff"; // magenta markers, like the guidance dots
const MASK_COLOR = "rgba(64, 128, 255, 0.45)";

const codec = new CanvasCodec();
const client = new GenServeClient("");

let state: EditorState = createEditor(TILE);
let legend: Legend | null = null;
let dragStart: { row: number; col: number } | null = null;
let dragJunction = -1;

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function toast(message: string, isError = false) {
  const el = $("toast");
  el.textContent = message;
  el.className = isError ? "toast error" : "toast";
  el.style.opacity = "1";
  setTimeout(() => (el.style.opacity = "0"), 2500);
}

function canvasPixel(event: PointerEvent): { row: number; col: number } {
  const canvas = $("overlay") as unknown as HTMLCanvasElement;
  const rect = canvas.getBoundingClientRect();
  const col = Math.floor(((event.clientX - rect.left) * canvas.width) / rect.width);
  const row = Math.floor(((event.clientY - rect.top) * canvas.height) / rect.height);
  return { row, col };
}

async function drawBase() {
  const canvas = $("base") as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (!state.context) return;
  const img = await codec.decodeGray(state.context.streetsPng);
  const image = ctx.createImageData(img.width, img.height);
  for (let i = 0; i < img.data.length; i++) {
    const v = Math.round(img.data[i] * 255);
    image.data[4 * i] = v;
    image.data[4 * i + 1] = v;
    image.data[4 * i + 2] = v;
    image.data[4 * i + 3] = 255;
  }
  ctx.putImageData(image, 0, 0);
}

function drawOverlay() {
  const canvas = $("overlay") as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  const mask = ctx.createImageData(state.size, state.size);
  for (let i = 0; i < state.mask.data.length; i++) {
    if (state.mask.data[i]) {
      mask.data[4 * i] = 64;
      mask.data[4 * i + 1] = 128;
      mask.data[4 * i + 2] = 255;
      mask.data[4 * i + 3] = 110;
    }
  }
  ctx.putImageData(mask, 0, 0);

  if (legend) {
    for (const stroke of state.strokes) {
      const color = colorFor(legend, stroke.pattern);
      const r = parseInt(color.slice(1, 3), 16);
      const g = parseInt(color.slice(3, 5), 16);
      const b = parseInt(color.slice(5, 7), 16);
      const layer = ctx.getImageData(0, 0, state.size, state.size);
      for (let i = 0; i < stroke.coverage.data.length; i++) {
        if (stroke.coverage.data[i]) {
          layer.data[4 * i] = r;
          layer.data[4 * i + 1] = g;
          layer.data[4 * i + 2] = b;
          layer.data[4 * i + 3] = 150;
        }
      }
      ctx.putImageData(layer, 0, 0);
    }
  }

  for (const junction of state.junctions) {
    ctx.fillStyle = JUNCTION_COLOR;
    ctx.beginPath();
    ctx.arc(junction.col + 0.5, junction.row + 0.5, 3, 0, Math.PI * 2);
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1;
    ctx.stroke();
  }
}

function render() {
  drawOverlay();
  ($("generate") as HTMLButtonElement).disabled = !canGenerate(state);
  $("status").textContent = state.pending
    ? "generating…"
    : `${state.junctions.length} junctions, ${state.strokes.length} strokes, ` +
      `${state.gallery.length} proposals`;
}

function update(next: EditorState) {
  state = next;
  render();
}

function nearestJunction(row: number, col: number): number {
  let best = -1;
  let bestDist = 36; // 6 px pickup radius
  state.junctions.forEach((j, i) => {
    const d = (j.row - row) ** 2 + (j.col - col) ** 2;
    if (d < bestDist) {
      best = i;
      bestDist = d;
    }
  });
  return best;
}

function onPointerDown(event: PointerEvent) {
  const { row, col } = canvasPixel(event);
  const tool = state.tool;
  if (tool === "mask-rect") {
    dragStart = { row, col };
  } else if (tool === "mask-brush" || tool === "mask-erase") {
    update(paintMaskBrush(state, row, col, 8, tool === "mask-erase"));
  } else if (tool === "pattern-brush") {
    update(paintPattern(state, row, col, 6));
  } else if (tool === "junction") {
    const picked = nearestJunction(row, col);
    if (picked >= 0) {
      dragJunction = picked;
    } else {
      const result = placeJunction(state, row, col);
      if (result.rejected) toast("junctions must sit inside the painted region", true);
      update(result.state);
    }
  } else if (tool === "select") {
    dragJunction = nearestJunction(row, col);
  }
}

function onPointerMove(event: PointerEvent) {
  if (event.buttons === 0) return;
  const { row, col } = canvasPixel(event);
  if (state.tool === "mask-brush" || state.tool === "mask-erase") {
    update(paintMaskBrush(state, row, col, 8, state.tool === "mask-erase"));
  } else if (state.tool === "pattern-brush") {
    update(paintPattern(state, row, col, 6));
  } else if (dragJunction >= 0) {
    const result = moveJunction(state, dragJunction, row, col);
    if (!result.rejected) update(result.state);
  }
}

function onPointerUp(event: PointerEvent) {
  if (state.tool === "mask-rect" && dragStart) {
    const { row, col } = canvasPixel(event);
    update(paintMaskRect(state, dragStart.row, dragStart.col, row, col));
  }
  dragStart = null;
  dragJunction = -1;
}

function onDoubleClick(event: PointerEvent) {
  if (state.tool !== "junction" && state.tool !== "select") return;
  const { row, col } = canvasPixel(event);
  const picked = nearestJunction(row, col);
  if (picked >= 0) update(deleteJunction(state, picked));
}

function addGalleryCard(entryIndex: number) {
  const entry = state.gallery[entryIndex];
  const card = document.createElement("div");
  card.className = "card";
  const img = document.createElement("img");
  img.src = `data:image/png;base64,${entry.response.composite}`;
  img.width = 200;
  img.height = 200;
  const badge = document.createElement("div");
  badge.className = "badge";
  badge.textContent = `#${entry.id} · ${entry.response.elapsed_ms.toFixed(0)} ms · seed ${entry.request.seed}`;
  card.append(img, badge);
  $("gallery").prepend(card);
}

async function generate() {
  if (!canGenerate(state)) return;
  const seed = Number(($("seed") as HTMLInputElement).value) || 0;
  update(markPending(state, true));
  try {
    const request = await buildRequest(state, seed, codec);
    const response = await client.generate(request);
    update(appendGalleryEntry(markPending(state, false), request, response, Date.now()));
    addGalleryCard(state.gallery.length - 1);
  } catch (error) {
    update(markPending(state, false));
    const detail = error instanceof ServiceError ? error.message : String(error);
    toast(`generation failed: ${detail}`, true);
  }
}

async function loadTile() {
  const row = Number(($("tile-row") as HTMLInputElement).value) || 0;
  const col = Number(($("tile-col") as HTMLInputElement).value) || 0;
  try {
    const response = await fetch(`/context?row=${row}&col=${col}&size=${TILE}`);
    const body = await response.json();
    if (!response.ok) throw new ServiceError(response.status, body.detail ?? "load failed");
    update(
      loadContext(state, {
        streetsPng: body.streets,
        elevation: body.elevation,
        aspect: body.aspect,
        size: body.size,
      })
    );
    await drawBase();
    toast(`loaded tile at (${row}, ${col})`);
  } catch (error) {
    toast(`could not load tile: ${error instanceof Error ? error.message : error}`, true);
  }
}

function buildToolbar() {
  const tools: [Tool, string][] = [
    ["mask-rect", "Mask rectangle"],
    ["mask-brush", "Mask brush"],
    ["mask-erase", "Mask eraser"],
    ["junction", "Junctions"],
    ["pattern-brush", "Pattern brush"],
    ["select", "Move"],
  ];
  const bar = $("tools");
  for (const [tool, label] of tools) {
    const button = document.createElement("button");
    button.textContent = label;
    button.onclick = () => {
      update(setTool(state, tool));
      for (const other of bar.children) other.className = "";
      button.className = "active";
    };
    bar.append(button);
  }
  (bar.children[0] as HTMLButtonElement).className = "active";
}

function buildPalette(loaded: Legend) {
  const palette = $("palette");
  for (const name of PATTERN_NAMES) {
    const button = document.createElement("button");
    button.title = name.replace("_", " ");
    button.style.background = colorFor(loaded, name);
    button.onclick = () => {
      update(setActivePattern(setTool(state, "pattern-brush"), name as PatternName));
      for (const other of palette.children) (other as HTMLElement).classList.remove("active");
      button.classList.add("active");
    };
    palette.append(button);
  }
}

async function boot() {
  try {
    const health = await client.health();
    $("model-info").textContent = `model level ${health.model_level} · ${health.checkpoint_hash.slice(0, 8)}`;
    legend = await loadLegend(client);
    buildPalette(legend);
  } catch (error) {
    toast("service unreachable; start `streetgen serve` first", true);
  }
  buildToolbar();
  const overlay = $("overlay");
  overlay.addEventListener("pointerdown", onPointerDown as EventListener);
  overlay.addEventListener("pointermove", onPointerMove as EventListener);
  overlay.addEventListener("pointerup", onPointerUp as EventListener);
  overlay.addEventListener("dblclick", onDoubleClick as EventListener);
  $("generate").onclick = generate;
  $("load-tile").onclick = loadTile;
  render();
}

boot();
