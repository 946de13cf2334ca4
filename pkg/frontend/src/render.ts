/**
 * Scene rendering against an abstract drawing surface.
 *
 * A scene arrives fully resolved (scales, channel bindings, annotations,
 * interaction bindings); rendering is a pure function of (scene, data,
 * brush state), so re-rendering after a cleared brush reproduces the prior
 * draw call for call. The Surface interface is the whole drawing contract:
 * the browser backs it with a canvas, tests with a recorder.
 *
 * Draw order is deterministic: chrome (axes, legends), then marks in row
 * order, then layers, then annotations, then the brush overlay.
 */

import { Table, cellValue, columnByName } from "./frame.js";
import {
  Scale,
  applyColor,
  applyMeasure,
  applyPosition,
  bandStep,
  formatTick,
  linearTicks,
  scaleById,
} from "./scales.js";

export type Role = "chrome" | "mark" | "annotation" | "overlay";
export type Anchor = "start" | "middle" | "end";

export interface Surface {
  clear(width: number, height: number): void;
  circle(x: number, y: number, r: number, fill: string, opacity: number, role: Role): void;
  rect(x: number, y: number, w: number, h: number, fill: string, opacity: number, role: Role): void;
  polyline(points: [number, number][], stroke: string, width: number, opacity: number, role: Role): void;
  polygon(points: [number, number][], fill: string, opacity: number, role: Role): void;
  text(x: number, y: number, body: string, fill: string, size: number, anchor: Anchor, role: Role): void;
}

export interface ChannelBinding {
  field?: string;
  value?: number | string;
  scale_id?: string;
  fields?: string[];
  scale_ids?: string[];
}

export interface SceneLayer {
  mark_type: string;
  channels: Record<string, ChannelBinding>;
}

export interface ScenePlugin {
  key: string;
  data: Record<string, (number | string | null)[]>;
  view: { viewport: Record<string, number>; encodings: Record<string, unknown> };
}

export interface Scene {
  p6scene_version: number;
  view_id: number;
  viewport: { x: number; y: number; width: number; height: number };
  mark_type: string;
  channels: Record<string, ChannelBinding>;
  scales: Scale[];
  data_ref: {
    source: "frame" | "inline";
    columns: string[];
    data?: Record<string, (number | string | null)[]>;
  };
  annotations: Record<string, unknown>[];
  interactions: Record<string, unknown>[];
  layers?: SceneLayer[];
  plugin?: ScenePlugin;
}

export interface BrushRect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface RenderOptions {
  /** Row filter from an active brush; rows outside the set are dropped. */
  filterRows?: Set<number> | null;
  /** Highlight variant: rows outside the set render dimmed instead. */
  highlightRows?: Set<number> | null;
  /** Brush rectangle to overlay (drawn on the brush source view). */
  brushRect?: BrushRect | null;
}

const MARK_COLOR = "#1f77b4";
const CHROME_COLOR = "#666666";
const ANNOTATION_COLOR = "#d62728";
const DEFAULT_OPACITY = 0.85;
const DIM_OPACITY = 0.12;

// --- data access -----------------------------------------------------------

export interface DataSource {
  rowCount: number;
  has(field: string): boolean;
  get(field: string, row: number): number | string | null;
}

export function sceneData(scene: Scene, table: Table | null): DataSource {
  if (scene.data_ref.source === "inline") {
    const data = scene.data_ref.data ?? {};
    const lengths = Object.values(data).map((v) => v.length);
    return {
      rowCount: lengths.length ? Math.max(...lengths) : 0,
      has: (field) => field in data,
      get: (field, row) => {
        const column = data[field];
        return column === undefined ? null : column[row] ?? null;
      },
    };
  }
  return {
    rowCount: table ? table.rowCount : 0,
    has: (field) => table !== null && columnByName(table, field) !== null,
    get: (field, row) => {
      const col = table ? columnByName(table, field) : null;
      return col === null ? null : cellValue(col, row);
    },
  };
}

// --- plugin renderers ------------------------------------------------------

export type PluginRenderer = (
  plugin: ScenePlugin,
  size: { width: number; height: number },
  surface: Surface,
) => void;

const pluginRenderers = new Map<string, PluginRenderer>();

export function registerPluginRenderer(key: string, renderer: PluginRenderer): void {
  if (pluginRenderers.has(key)) {
    throw new Error(`plugin renderer ${JSON.stringify(key)} already registered`);
  }
  pluginRenderers.set(key, renderer);
}

function renderAreaPlugin(
  plugin: ScenePlugin,
  size: { width: number; height: number },
  surface: Surface,
): void {
  const encodings = plugin.view.encodings as Record<string, string>;
  const xs = (plugin.data[encodings.x] ?? []) as (number | null)[];
  const ys = (plugin.data[encodings.y] ?? []) as (number | null)[];
  const points: [number, number][] = [];
  for (let i = 0; i < Math.min(xs.length, ys.length); i++) {
    if (typeof xs[i] === "number" && typeof ys[i] === "number") {
      points.push([xs[i] as number, ys[i] as number]);
    }
  }
  if (!points.length) {
    return;
  }
  const xLo = Math.min(...points.map((p) => p[0]));
  const xHi = Math.max(...points.map((p) => p[0]));
  const yHi = Math.max(0, ...points.map((p) => p[1]));
  const sx = (v: number) => (xHi === xLo ? size.width / 2 : ((v - xLo) / (xHi - xLo)) * size.width);
  const sy = (v: number) => (yHi === 0 ? size.height : size.height - (v / yHi) * size.height);
  const top: [number, number][] = points.map(([x, y]) => [sx(x), sy(y)]);
  const polygon: [number, number][] = [
    [top[0][0], size.height],
    ...top,
    [top[top.length - 1][0], size.height],
  ];
  surface.polygon(polygon, MARK_COLOR, 0.45, "mark");
  surface.polyline(top, MARK_COLOR, 1.5, 1.0, "mark");
}

registerPluginRenderer("area-chart", renderAreaPlugin);

// --- channel helpers -------------------------------------------------------

function rowValue(
  binding: ChannelBinding | undefined,
  data: DataSource,
  row: number,
): number | string | null {
  if (!binding) {
    return null;
  }
  if (binding.value !== undefined) {
    return binding.value;
  }
  return binding.field === undefined ? null : data.get(binding.field, row);
}

function rowOpacity(scene: Scene, data: DataSource, row: number): number {
  const binding = scene.channels.opacity;
  if (!binding) {
    return DEFAULT_OPACITY;
  }
  if (binding.value !== undefined) {
    return Number(binding.value);
  }
  const scale = binding.scale_id ? scaleById(scene.scales, binding.scale_id) : null;
  const v = rowValue(binding, data, row);
  const out = scale ? applyMeasure(scale, v) : null;
  return out === null ? DEFAULT_OPACITY : out;
}

function rowColor(
  channels: Record<string, ChannelBinding>,
  scales: Scale[],
  data: DataSource,
  row: number,
): string {
  const binding = channels.color;
  if (!binding) {
    return MARK_COLOR;
  }
  if (binding.value !== undefined) {
    return String(binding.value);
  }
  const scale = binding.scale_id ? scaleById(scales, binding.scale_id) : null;
  const v = rowValue(binding, data, row);
  const out = scale && v !== null ? applyColor(scale, v) : null;
  return out === null ? MARK_COLOR : out;
}

function missingFields(scene: Scene, data: DataSource): string[] {
  const missing: string[] = [];
  const note = (field: string | undefined) => {
    if (field !== undefined && !data.has(field) && !missing.includes(field)) {
      missing.push(field);
    }
  };
  for (const binding of Object.values(scene.channels)) {
    note(binding.field);
    for (const field of binding.fields ?? []) {
      note(field);
    }
  }
  for (const layer of scene.layers ?? []) {
    for (const binding of Object.values(layer.channels)) {
      note(binding.field);
    }
  }
  return missing;
}

// --- chrome ----------------------------------------------------------------

function drawFrameBorder(surface: Surface, w: number, h: number): void {
  surface.polyline(
    [
      [0.5, 0.5],
      [w - 0.5, 0.5],
      [w - 0.5, h - 0.5],
      [0.5, h - 0.5],
      [0.5, 0.5],
    ],
    "#d0d0d0",
    1,
    1.0,
    "chrome",
  );
}

function drawOverlayMessage(surface: Surface, w: number, h: number, message: string): void {
  drawFrameBorder(surface, w, h);
  surface.text(w / 2, h / 2, message, "#b03030", 12, "middle", "chrome");
}

function drawXAxis(surface: Surface, scale: Scale, w: number, h: number): void {
  surface.polyline([[0, h - 0.5], [w, h - 0.5]], CHROME_COLOR, 1, 1.0, "chrome");
  const ticks = scale.kind === "band" ? scale.domain : linearTicks(scale, 5);
  for (const tick of ticks) {
    const x = applyPosition(scale, tick);
    if (x === null) {
      continue;
    }
    surface.polyline([[x, h - 5], [x, h]], CHROME_COLOR, 1, 1.0, "chrome");
    surface.text(x, h - 8, formatTick(tick), CHROME_COLOR, 10, "middle", "chrome");
  }
}

function drawYAxis(surface: Surface, scale: Scale, h: number): void {
  surface.polyline([[0.5, 0], [0.5, h]], CHROME_COLOR, 1, 1.0, "chrome");
  const ticks = scale.kind === "band" ? scale.domain : linearTicks(scale, 5);
  for (const tick of ticks) {
    const y = applyPosition(scale, tick);
    if (y === null) {
      continue;
    }
    surface.polyline([[0, y], [5, y]], CHROME_COLOR, 1, 1.0, "chrome");
    surface.text(7, y + 3, formatTick(tick), CHROME_COLOR, 10, "start", "chrome");
  }
}

function drawLegend(surface: Surface, scale: Scale, w: number): void {
  const size = 9;
  for (let i = 0; i < scale.domain.length; i++) {
    const y = 8 + i * (size + 5);
    surface.rect(w - 14 - size, y, size, size, String(scale.range[i]), 1.0, "chrome");
    surface.text(w - 18 - size, y + size - 1, formatTick(scale.domain[i]), CHROME_COLOR, 10, "end", "chrome");
  }
}

// --- marks -----------------------------------------------------------------

type RowKeep = (row: number) => { keep: boolean; dim: boolean };

function rowPolicy(options: RenderOptions): RowKeep {
  const filter = options.filterRows ?? null;
  const highlight = options.highlightRows ?? null;
  return (row) => ({
    keep: filter === null || filter.has(row),
    dim: highlight !== null && !highlight.has(row),
  });
}

function sizeToRadius(area: number): number {
  return Math.sqrt(Math.max(area, 0) / Math.PI);
}

function drawCircleMarks(
  scene: Scene,
  channels: Record<string, ChannelBinding>,
  data: DataSource,
  surface: Surface,
  keep: RowKeep,
): void {
  const xScale = scaleById(scene.scales, channels.x?.scale_id ?? "x");
  const yScale = scaleById(scene.scales, channels.y?.scale_id ?? "y");
  if (!xScale || !yScale) {
    return;
  }
  const sizeBinding = channels.size;
  const sizeScale = sizeBinding?.scale_id ? scaleById(scene.scales, sizeBinding.scale_id) : null;
  for (let row = 0; row < data.rowCount; row++) {
    const policy = keep(row);
    if (!policy.keep) {
      continue;
    }
    const x = applyPosition(xScale, rowValue(channels.x, data, row));
    const y = applyPosition(yScale, rowValue(channels.y, data, row));
    if (x === null || y === null) {
      continue;
    }
    let radius = 3.5;
    if (sizeBinding) {
      const raw = rowValue(sizeBinding, data, row);
      const area = sizeScale ? applyMeasure(sizeScale, raw) : typeof raw === "number" ? raw : null;
      if (area === null) {
        continue;
      }
      radius = sizeToRadius(area);
    }
    const opacity = policy.dim ? DIM_OPACITY : rowOpacity(scene, data, row);
    surface.circle(x, y, radius, rowColor(channels, scene.scales, data, row), opacity, "mark");
  }
}

function linearBarWidth(xs: number[], w: number): number {
  const distinct = [...new Set(xs)].sort((a, b) => a - b);
  if (distinct.length < 2) {
    return w * 0.05;
  }
  let gap = Infinity;
  for (let i = 1; i < distinct.length; i++) {
    gap = Math.min(gap, distinct[i] - distinct[i - 1]);
  }
  return gap * 0.8;
}

function drawRectMarks(
  scene: Scene,
  channels: Record<string, ChannelBinding>,
  data: DataSource,
  surface: Surface,
  keep: RowKeep,
): void {
  const xScale = scaleById(scene.scales, channels.x?.scale_id ?? "x");
  const yScale = scaleById(scene.scales, channels.y?.scale_id ?? "y");
  if (!xScale || !yScale) {
    return;
  }
  const centers: (number | null)[] = [];
  for (let row = 0; row < data.rowCount; row++) {
    centers.push(applyPosition(xScale, rowValue(channels.x, data, row)));
  }
  const widthScale = channels.width?.scale_id ? scaleById(scene.scales, channels.width.scale_id) : null;
  const fallbackWidth =
    xScale.kind === "band"
      ? bandStep(xScale) * 0.8
      : linearBarWidth(centers.filter((c): c is number => c !== null), scene.viewport.width);
  const zero = applyPosition(yScale, 0) ?? scene.viewport.height;
  for (let row = 0; row < data.rowCount; row++) {
    const policy = keep(row);
    const center = centers[row];
    if (!policy.keep || center === null) {
      continue;
    }
    const y = applyPosition(yScale, rowValue(channels.y, data, row));
    if (y === null) {
      continue;
    }
    let barWidth = fallbackWidth;
    if (channels.width) {
      const scaled = widthScale
        ? applyMeasure(widthScale, rowValue(channels.width, data, row))
        : Number(rowValue(channels.width, data, row));
      if (scaled !== null && Number.isFinite(scaled)) {
        barWidth = scaled;
      }
    }
    let top = Math.min(y, zero);
    let height = Math.abs(zero - y);
    if (channels.height) {
      const heightScale = channels.height.scale_id
        ? scaleById(scene.scales, channels.height.scale_id)
        : null;
      const scaled = heightScale
        ? applyMeasure(heightScale, rowValue(channels.height, data, row))
        : Number(rowValue(channels.height, data, row));
      if (scaled !== null && Number.isFinite(scaled)) {
        height = scaled;
        top = y - height / 2;
      }
    }
    const opacity = policy.dim ? DIM_OPACITY : rowOpacity(scene, data, row);
    surface.rect(
      center - barWidth / 2,
      top,
      barWidth,
      height,
      rowColor(channels, scene.scales, data, row),
      opacity,
      "mark",
    );
  }
}

function drawLineMarks(
  scene: Scene,
  channels: Record<string, ChannelBinding>,
  data: DataSource,
  surface: Surface,
  keep: RowKeep,
): void {
  const xScale = scaleById(scene.scales, channels.x?.scale_id ?? "x");
  const yScale = scaleById(scene.scales, channels.y?.scale_id ?? "y");
  if (!xScale || !yScale) {
    return;
  }
  const colorBinding = channels.color;
  const seriesKey = (row: number): string => {
    if (!colorBinding || colorBinding.field === undefined) {
      return "";
    }
    const v = rowValue(colorBinding, data, row);
    return v === null ? "" : String(v);
  };
  const order: string[] = [];
  const series = new Map<string, { points: [number, number][]; row: number }>();
  for (let row = 0; row < data.rowCount; row++) {
    if (!keep(row).keep) {
      continue;
    }
    const x = applyPosition(xScale, rowValue(channels.x, data, row));
    const y = applyPosition(yScale, rowValue(channels.y, data, row));
    if (x === null || y === null) {
      continue;
    }
    const key = seriesKey(row);
    if (!series.has(key)) {
      series.set(key, { points: [], row });
      order.push(key);
    }
    series.get(key)!.points.push([x, y]);
  }
  for (const key of order) {
    const entry = series.get(key)!;
    if (entry.points.length < 2) {
      continue;
    }
    surface.polyline(
      entry.points,
      rowColor(channels, scene.scales, data, entry.row),
      1.75,
      rowOpacity(scene, data, entry.row),
      "mark",
    );
  }
}

function drawPcpMarks(
  scene: Scene,
  data: DataSource,
  surface: Surface,
  keep: RowKeep,
  w: number,
  h: number,
): void {
  const dims = scene.channels.dims;
  if (!dims || !dims.fields || !dims.scale_ids) {
    return;
  }
  const fields = dims.fields;
  const scales = dims.scale_ids.map((id) => scaleById(scene.scales, id));
  const axisX = (i: number) => (fields.length === 1 ? w / 2 : (i * w) / (fields.length - 1));
  for (let i = 0; i < fields.length; i++) {
    surface.polyline([[axisX(i), 0], [axisX(i), h]], CHROME_COLOR, 1, 1.0, "chrome");
    const anchor: Anchor = i === 0 ? "start" : i === fields.length - 1 ? "end" : "middle";
    surface.text(axisX(i), 11, fields[i], CHROME_COLOR, 10, anchor, "chrome");
  }
  for (let row = 0; row < data.rowCount; row++) {
    const policy = keep(row);
    if (!policy.keep) {
      continue;
    }
    const points: [number, number][] = [];
    let complete = true;
    for (let i = 0; i < fields.length; i++) {
      const scale = scales[i];
      const y = scale ? applyPosition(scale, data.get(fields[i], row)) : null;
      if (y === null) {
        complete = false;
        break;
      }
      points.push([axisX(i), y]);
    }
    if (!complete || points.length < 2) {
      continue;
    }
    const opacity = policy.dim ? DIM_OPACITY : rowOpacity(scene, data, row);
    surface.polyline(points, rowColor(scene.channels, scene.scales, data, row), 1.25, opacity, "mark");
  }
}

function drawTextMarks(
  scene: Scene,
  channels: Record<string, ChannelBinding>,
  data: DataSource,
  surface: Surface,
  keep: RowKeep,
): void {
  const xScale = scaleById(scene.scales, channels.x?.scale_id ?? "x");
  const yScale = scaleById(scene.scales, channels.y?.scale_id ?? "y");
  if (!xScale || !yScale || !channels.text) {
    return;
  }
  for (let row = 0; row < data.rowCount; row++) {
    if (!keep(row).keep) {
      continue;
    }
    const x = applyPosition(xScale, rowValue(channels.x, data, row));
    const y = applyPosition(yScale, rowValue(channels.y, data, row));
    const body = rowValue(channels.text, data, row);
    if (x === null || y === null || body === null) {
      continue;
    }
    surface.text(x, y, String(body), rowColor(channels, scene.scales, data, row), 11, "middle", "mark");
  }
}

function drawMarks(
  scene: Scene,
  markType: string,
  channels: Record<string, ChannelBinding>,
  data: DataSource,
  surface: Surface,
  keep: RowKeep,
  w: number,
  h: number,
): void {
  if (markType === "circle") {
    drawCircleMarks(scene, channels, data, surface, keep);
  } else if (markType === "rect") {
    drawRectMarks(scene, channels, data, surface, keep);
  } else if (markType === "line") {
    drawLineMarks(scene, channels, data, surface, keep);
  } else if (markType === "pcp-line") {
    drawPcpMarks(scene, data, surface, keep, w, h);
  } else if (markType === "text") {
    drawTextMarks(scene, channels, data, surface, keep);
  }
}

// --- annotations -----------------------------------------------------------

function drawAnnotations(scene: Scene, surface: Surface, w: number, h: number): void {
  const xScale = scaleById(scene.scales, "x");
  const yScale = scaleById(scene.scales, "y");
  for (const ann of scene.annotations) {
    if (ann.kind === "trendline" && xScale && yScale) {
      const slope = Number(ann.slope);
      const intercept = Number(ann.intercept);
      const d0 = xScale.domain[0] as number;
      const d1 = xScale.domain[1] as number;
      const p0: [number, number] = [
        applyPosition(xScale, d0) ?? 0,
        applyPosition(yScale, slope * d0 + intercept) ?? 0,
      ];
      const p1: [number, number] = [
        applyPosition(xScale, d1) ?? w,
        applyPosition(yScale, slope * d1 + intercept) ?? 0,
      ];
      surface.polyline([p0, p1], ANNOTATION_COLOR, 1.5, 0.9, "annotation");
    } else if (ann.kind === "rule" && xScale) {
      for (const pos of (ann.positions as (number | string)[]) ?? []) {
        const x = applyPosition(xScale, pos);
        if (x !== null) {
          surface.polyline([[x, 0], [x, h]], ANNOTATION_COLOR, 1.25, 0.9, "annotation");
        }
      }
    } else if (ann.kind === "label" && xScale) {
      const positions = (ann.positions as (number | string)[]) ?? [];
      const texts = (ann.texts as string[]) ?? [];
      for (let i = 0; i < positions.length; i++) {
        const x = applyPosition(xScale, positions[i]);
        if (x !== null) {
          surface.text(x, 14, texts[i] ?? String(positions[i]), ANNOTATION_COLOR, 10, "middle", "annotation");
        }
      }
    }
  }
}

// --- entry point -----------------------------------------------------------

export function renderScene(
  scene: Scene,
  table: Table | null,
  surface: Surface,
  options: RenderOptions = {},
): void {
  const w = scene.viewport.width;
  const h = scene.viewport.height;
  surface.clear(w, h);

  if (scene.plugin) {
    const renderer = pluginRenderers.get(scene.plugin.key);
    if (!renderer) {
      drawOverlayMessage(surface, w, h, `no renderer for plugin "${scene.plugin.key}"`);
      return;
    }
    drawFrameBorder(surface, w, h);
    renderer(scene.plugin, { width: w, height: h }, surface);
    return;
  }

  const data = sceneData(scene, table);
  if (scene.data_ref.source === "frame" && table === null) {
    drawOverlayMessage(surface, w, h, "no data loaded");
    return;
  }
  const missing = missingFields(scene, data);
  if (missing.length) {
    drawOverlayMessage(surface, w, h, `missing field "${missing[0]}"`);
    return;
  }

  drawFrameBorder(surface, w, h);
  if (scene.mark_type !== "pcp-line") {
    const xScale = scaleById(scene.scales, "x");
    const yScale = scaleById(scene.scales, "y");
    if (xScale) {
      drawXAxis(surface, xScale, w, h);
    }
    if (yScale) {
      drawYAxis(surface, yScale, h);
    }
  }
  const colorScale = scaleById(scene.scales, "color");
  if (colorScale && colorScale.kind === "ordinal-color") {
    drawLegend(surface, colorScale, w);
  }

  const keep = rowPolicy(options);
  drawMarks(scene, scene.mark_type, scene.channels, data, surface, keep, w, h);
  for (const layer of scene.layers ?? []) {
    drawMarks(scene, layer.mark_type, layer.channels, data, surface, keep, w, h);
  }
  drawAnnotations(scene, surface, w, h);

  if (options.brushRect) {
    const r = options.brushRect;
    surface.rect(
      Math.min(r.x0, r.x1),
      Math.min(r.y0, r.y1),
      Math.abs(r.x1 - r.x0),
      Math.abs(r.y1 - r.y0),
      "#888888",
      0.2,
      "overlay",
    );
  }
}

// --- recording surface -----------------------------------------------------

export type RecordedOp = Record<string, unknown> & { op: string; role?: Role };

/** Surface that records draw calls; snapshots make renders comparable. */
export class RecordingSurface implements Surface {
  ops: RecordedOp[] = [];
  clears = 0;

  clear(width: number, height: number): void {
    this.ops = [];
    this.clears += 1;
    this.ops.push({ op: "clear", width, height });
  }

  circle(x: number, y: number, r: number, fill: string, opacity: number, role: Role): void {
    this.ops.push({ op: "circle", x, y, r, fill, opacity, role });
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opacity: number, role: Role): void {
    this.ops.push({ op: "rect", x, y, w, h, fill, opacity, role });
  }

  polyline(points: [number, number][], stroke: string, width: number, opacity: number, role: Role): void {
    this.ops.push({ op: "polyline", points, stroke, width, opacity, role });
  }

  polygon(points: [number, number][], fill: string, opacity: number, role: Role): void {
    this.ops.push({ op: "polygon", points, fill, opacity, role });
  }

  text(x: number, y: number, body: string, fill: string, size: number, anchor: Anchor, role: Role): void {
    this.ops.push({ op: "text", x, y, body, fill, size, anchor, role });
  }

  snapshot(): string {
    return JSON.stringify(this.ops);
  }

  byOp(op: string, role?: Role): RecordedOp[] {
    return this.ops.filter((o) => o.op === op && (role === undefined || o.role === role));
  }
}
