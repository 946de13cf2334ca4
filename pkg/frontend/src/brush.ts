/**
 * Brushing: select rows of the source view geometrically, then filter the
 * linked target views to the same rows. Evaluation is entirely client-side;
 * clearing a brush restores the unfiltered render.
 */

import { BrushRect, DataSource, Scene } from "./render.js";
import { applyPosition, scaleById } from "./scales.js";

export interface BrushBinding {
  event: string;
  mode: string;
  fields: string[];
  source: number;
  targets: number[];
  effect: string;
}

/** The brush binding a scene declares as its source, if any. */
export function sourceBrushBinding(scene: Scene): BrushBinding | null {
  for (const inter of scene.interactions) {
    if (inter.event === "brush" && inter.source === scene.view_id && Array.isArray(inter.targets)) {
      return inter as unknown as BrushBinding;
    }
  }
  return null;
}

function normalized(rect: BrushRect): BrushRect {
  return {
    x0: Math.min(rect.x0, rect.x1),
    x1: Math.max(rect.x0, rect.x1),
    y0: Math.min(rect.y0, rect.y1),
    y1: Math.max(rect.y0, rect.y1),
  };
}

/**
 * Rows whose (x, y) mark position falls inside the rectangle, bounds
 * inclusive. Rows that draw no mark (null or unmappable values) are never
 * selected.
 */
export function rowsInRect(scene: Scene, data: DataSource, rect: BrushRect): Set<number> {
  const xBinding = scene.channels.x;
  const yBinding = scene.channels.y;
  const xScale = scaleById(scene.scales, xBinding?.scale_id ?? "x");
  const yScale = scaleById(scene.scales, yBinding?.scale_id ?? "y");
  const out = new Set<number>();
  if (!xScale || !yScale || !xBinding?.field || !yBinding?.field) {
    return out;
  }
  const r = normalized(rect);
  for (let row = 0; row < data.rowCount; row++) {
    const x = applyPosition(xScale, data.get(xBinding.field, row));
    const y = applyPosition(yScale, data.get(yBinding.field, row));
    if (x === null || y === null) {
      continue;
    }
    if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1) {
      out.add(row);
    }
  }
  return out;
}

/**
 * Parallel-coordinates brushing: pixel ranges on one or more axes select the
 * rows whose polyline passes through every brushed range.
 */
export function rowsInAxisRanges(
  scene: Scene,
  data: DataSource,
  ranges: Record<string, [number, number]>,
): Set<number> {
  const dims = scene.channels.dims;
  const out = new Set<number>();
  if (!dims?.fields || !dims.scale_ids) {
    return out;
  }
  const checks: { field: string; lo: number; hi: number; scaleId: string }[] = [];
  for (let i = 0; i < dims.fields.length; i++) {
    const range = ranges[dims.fields[i]];
    if (range) {
      checks.push({
        field: dims.fields[i],
        lo: Math.min(range[0], range[1]),
        hi: Math.max(range[0], range[1]),
        scaleId: dims.scale_ids[i],
      });
    }
  }
  if (!checks.length) {
    return out;
  }
  for (let row = 0; row < data.rowCount; row++) {
    let inside = true;
    for (const check of checks) {
      const scale = scaleById(scene.scales, check.scaleId);
      const y = scale ? applyPosition(scale, data.get(check.field, row)) : null;
      if (y === null || y < check.lo || y > check.hi) {
        inside = false;
        break;
      }
    }
    if (inside) {
      out.add(row);
    }
  }
  return out;
}
