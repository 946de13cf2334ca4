/**
 * Service client. The dashboard never talks to the network directly: it goes
 * through a Transport, so the browser build plugs in fetch + WebSocket while
 * tests replay recorded sessions. Edit events are applied strictly in
 * revision order; stale revisions are dropped, gaps wait for the missing
 * event.
 */

import { Table, decodeFrame } from "./frame.js";

export interface HttpResponse {
  status: number;
  json?: unknown;
  bytes?: Uint8Array;
}

export interface Transport {
  request(method: string, path: string, body?: unknown): Promise<HttpResponse>;
}

export interface SceneEvent {
  type: string;
  views: number[];
  revision: number;
}

export interface PatchOutcome {
  ok: boolean;
  status: number;
  body: Record<string, unknown>;
}

export class ServiceError extends Error {
  constructor(
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

function expectJson(response: HttpResponse, context: string): unknown {
  if (response.status >= 400) {
    throw new ServiceError(`${context} failed with status ${response.status}`, response.status);
  }
  return response.json;
}

export class PipelineClient {
  constructor(private transport: Transport) {}

  async createPipeline(spec: unknown): Promise<string> {
    const response = await this.transport.request("POST", "/api/pipelines", spec);
    const body = expectJson(response, "create pipeline") as { pipeline_id: string };
    return body.pipeline_id;
  }

  async getScenes(id: string): Promise<Record<string, unknown>[]> {
    const response = await this.transport.request("GET", `/api/pipelines/${id}/scenes`);
    return expectJson(response, "get scenes") as Record<string, unknown>[];
  }

  async getParams(id: string): Promise<Record<string, unknown>> {
    const response = await this.transport.request("GET", `/api/pipelines/${id}/params`);
    return expectJson(response, "get params") as Record<string, unknown>;
  }

  async getFrame(id: string, columns?: string[]): Promise<Table> {
    const query = columns && columns.length ? `?columns=${columns.join(",")}` : "";
    const response = await this.transport.request("GET", `/api/pipelines/${id}/frame${query}`);
    if (response.status >= 400 || !response.bytes) {
      throw new ServiceError(`get frame failed with status ${response.status}`, response.status);
    }
    return decodeFrame(response.bytes);
  }

  async getResult(id: string, name: string): Promise<Record<string, unknown>> {
    const response = await this.transport.request("GET", `/api/pipelines/${id}/results/${name}`);
    return expectJson(response, `get result ${name}`) as Record<string, unknown>;
  }

  /** One reactive edit; 4xx outcomes are data, not exceptions. */
  async patchParam(id: string, path: string, value: unknown): Promise<PatchOutcome> {
    const response = await this.transport.request("PATCH", `/api/pipelines/${id}/params`, {
      path,
      value,
    });
    return {
      ok: response.status < 400,
      status: response.status,
      body: (response.json ?? {}) as Record<string, unknown>,
    };
  }
}

/**
 * Orders scenes-updated events by revision before handing them to the
 * consumer. Revisions at or below the last applied one are stale duplicates
 * and are dropped; a revision gap holds later events until the missing one
 * arrives.
 */
export class EventQueue {
  private lastApplied = 0;
  private held = new Map<number, SceneEvent>();
  private chain: Promise<void> = Promise.resolve();

  constructor(private apply: (event: SceneEvent) => Promise<void> | void) {}

  push(event: SceneEvent): void {
    if (event.revision <= this.lastApplied || this.held.has(event.revision)) {
      return;
    }
    this.held.set(event.revision, event);
    this.drain();
  }

  private drain(): void {
    let next = this.held.get(this.lastApplied + 1);
    while (next !== undefined) {
      const event = next;
      this.held.delete(event.revision);
      this.lastApplied = event.revision;
      this.chain = this.chain.then(() => Promise.resolve(this.apply(event)));
      next = this.held.get(this.lastApplied + 1);
    }
  }

  /** Resolves once every event applied so far has been processed. */
  async settled(): Promise<void> {
    let tail = this.chain;
    // applying an event may enqueue more work; wait until the chain is stable
    while (true) {
      await tail;
      if (tail === this.chain) {
        return;
      }
      tail = this.chain;
    }
  }

  get pendingRevisions(): number[] {
    return [...this.held.keys()].sort((a, b) => a - b);
  }

  get appliedRevision(): number {
    return this.lastApplied;
  }
}
