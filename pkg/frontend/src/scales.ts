/**
 * Scale application. Scenes carry resolved scale descriptors; the client only
 * has to map data values through them. Kinds mirror the server compiler:
 * "linear" (two-number domain), "band" (value list, marks sit at band
 * centers), and "ordinal-color" (value list onto a color list). Linear color
 * ramps arrive as a "linear" scale whose range holds two hex colors.
 */

export interface Scale {
  id: string;
  kind: "linear" | "band" | "ordinal-color";
  domain: (number | string)[];
  range: (number | string)[];
  /** Whether the server widened the domain to round numbers; metadata only. */
  nice?: boolean;
}

export function scaleById(scales: Scale[], id: string): Scale | null {
  for (const s of scales) {
    if (s.id === id) {
      return s;
    }
  }
  return null;
}

function domainIndex(scale: Scale, v: number | string): number {
  for (let i = 0; i < scale.domain.length; i++) {
    if (scale.domain[i] === v) {
      return i;
    }
  }
  return -1;
}

/** Fraction along a linear domain; 0.5 for a degenerate domain. */
function linearT(scale: Scale, v: number): number {
  const d0 = scale.domain[0] as number;
  const d1 = scale.domain[1] as number;
  return d1 === d0 ? 0.5 : (v - d0) / (d1 - d0);
}

/** Position for a linear or band scale; null for unmappable values. */
export function applyPosition(scale: Scale, v: number | string | null): number | null {
  if (v === null) {
    return null;
  }
  if (scale.kind === "band") {
    const i = domainIndex(scale, v);
    if (i < 0) {
      return null;
    }
    const r0 = scale.range[0] as number;
    const r1 = scale.range[1] as number;
    const step = (r1 - r0) / scale.domain.length;
    return r0 + step * (i + 0.5);
  }
  if (typeof v !== "number" || !Number.isFinite(v)) {
    return null;
  }
  const r0 = scale.range[0] as number;
  const r1 = scale.range[1] as number;
  return r0 + linearT(scale, v) * (r1 - r0);
}

/** Width one band occupies, before any mark-level padding. */
export function bandStep(scale: Scale): number {
  const r0 = scale.range[0] as number;
  const r1 = scale.range[1] as number;
  return scale.domain.length ? (r1 - r0) / scale.domain.length : r1 - r0;
}

function channel(hex: string, at: number): number {
  return parseInt(hex.slice(1 + at * 2, 3 + at * 2), 16);
}

function mixHex(a: string, b: string, t: number): string {
  const k = Math.max(0, Math.min(1, t));
  let out = "#";
  for (let i = 0; i < 3; i++) {
    const v = Math.round(channel(a, i) + k * (channel(b, i) - channel(a, i)));
    out += v.toString(16).padStart(2, "0");
  }
  return out;
}

/** Color for an ordinal-color or two-stop linear ramp scale. */
export function applyColor(scale: Scale, v: number | string | null): string | null {
  if (v === null) {
    return null;
  }
  if (scale.kind === "ordinal-color") {
    const i = domainIndex(scale, v);
    return i < 0 ? null : (scale.range[i] as string);
  }
  if (typeof v !== "number" || !Number.isFinite(v)) {
    return null;
  }
  return mixHex(scale.range[0] as string, scale.range[1] as string, linearT(scale, v));
}

/** Scalar (size / opacity / width / height) through a linear scale. */
export function applyMeasure(scale: Scale, v: number | string | null): number | null {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    return null;
  }
  const r0 = scale.range[0] as number;
  const r1 = scale.range[1] as number;
  return r0 + linearT(scale, v) * (r1 - r0);
}

/** Evenly spaced tick values across a linear domain. */
export function linearTicks(scale: Scale, count = 5): number[] {
  const d0 = scale.domain[0] as number;
  const d1 = scale.domain[1] as number;
  if (count < 2 || d0 === d1) {
    return [d0];
  }
  const out: number[] = [];
  for (let i = 0; i < count; i++) {
    out.push(d0 + ((d1 - d0) * i) / (count - 1));
  }
  return out;
}

export function formatTick(v: number | string): string {
  if (typeof v === "string") {
    return v;
  }
  if (Number.isInteger(v) && Math.abs(v) < 1e15) {
    return String(v);
  }
  const magnitude = Math.abs(v);
  if (magnitude !== 0 && (magnitude >= 1e6 || magnitude < 1e-4)) {
    return v.toExponential(2);
  }
  return v.toFixed(magnitude >= 100 ? 1 : 2).replace(/\.?0+$/, "");
}
