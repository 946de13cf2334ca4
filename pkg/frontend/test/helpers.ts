/** Shared test support: fixture loading, a replaying transport, surfaces. */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { HttpResponse, Transport } from "../src/client.js";
import { RecordingSurface } from "../src/render.js";

export const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function readBytes(rel: string): Uint8Array {
  return new Uint8Array(readFileSync(join(FIXTURES, rel)));
}

export function readJson<T = Record<string, unknown>>(rel: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, rel), "utf-8")) as T;
}

export interface Exchange {
  method: string;
  path: string;
  status: number;
  body?: unknown;
  json?: unknown;
  bytes_b64?: string;
}

function stable(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(stable).join(",")}]`;
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => `${JSON.stringify(k)}:${stable(v)}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(value);
}

/**
 * Transport that replays a recorded session and fails on any deviation:
 * out-of-order requests, altered bodies, or requests past the script's end.
 */
export class ScriptedTransport implements Transport {
  private cursor = 0;
  patchCount = 0;

  constructor(private exchanges: Exchange[]) {}

  async request(method: string, path: string, body?: unknown): Promise<HttpResponse> {
    const expected = this.exchanges[this.cursor];
    if (!expected) {
      throw new Error(`unscripted request ${method} ${path} after the session ended`);
    }
    if (expected.method !== method || expected.path !== path) {
      throw new Error(
        `request ${method} ${path} out of order; the script expects ` +
          `${expected.method} ${expected.path} (position ${this.cursor})`,
      );
    }
    if (expected.body !== undefined && stable(body) !== stable(expected.body)) {
      throw new Error(`body mismatch at ${method} ${path}: ${stable(body)}`);
    }
    this.cursor += 1;
    if (method === "PATCH") {
      this.patchCount += 1;
    }
    if (expected.bytes_b64 !== undefined) {
      return {
        status: expected.status,
        bytes: new Uint8Array(Buffer.from(expected.bytes_b64, "base64")),
      };
    }
    return { status: expected.status, json: expected.json };
  }

  get served(): number {
    return this.cursor;
  }

  get exhausted(): boolean {
    return this.cursor === this.exchanges.length;
  }
}

/** One recording surface per view id, with clear-count bookkeeping. */
export class SurfaceMap {
  surfaces = new Map<number, RecordingSurface>();

  provider = (viewId: number): RecordingSurface => {
    let surface = this.surfaces.get(viewId);
    if (!surface) {
      surface = new RecordingSurface();
      this.surfaces.set(viewId, surface);
    }
    return surface;
  };

  get(viewId: number): RecordingSurface {
    return this.provider(viewId);
  }

  resetClears(): void {
    for (const surface of this.surfaces.values()) {
      surface.clears = 0;
    }
  }

  /** View ids re-rendered since the last reset, ascending. */
  clearedViews(): number[] {
    return [...this.surfaces.entries()]
      .filter(([, surface]) => surface.clears > 0)
      .map(([viewId]) => viewId)
      .sort((a, b) => a - b);
  }
}
