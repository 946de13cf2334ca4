/**
 * Dashboard orchestration: one pipeline session wired to per-view surfaces,
 * auto-generated parameter controls, and brushing between linked views.
 *
 * Rendering is driven by scenes-updated events, never by patch responses:
 * an event names the views whose scenes changed, the dashboard refetches
 * scenes and frame once, and re-renders exactly those views. Brushing stays
 * client-side; it never issues a request.
 */

import { EventQueue, PipelineClient, SceneEvent, Transport } from "./client.js";
import { BrushBinding, rowsInRect, sourceBrushBinding } from "./brush.js";
import { Control, EditableParam, buildControls, controlByPath } from "./controls.js";
import { Table } from "./frame.js";
import { BrushRect, RenderOptions, Scene, Surface, renderScene, sceneData } from "./render.js";

export type SurfaceProvider = (viewId: number) => Surface;

interface ActiveBrush {
  binding: BrushBinding;
  rect: BrushRect;
  rows: Set<number>;
}

function sameRows(a: Set<number>, b: Set<number>): boolean {
  if (a.size !== b.size) {
    return false;
  }
  for (const v of a) {
    if (!b.has(v)) {
      return false;
    }
  }
  return true;
}

export class Dashboard {
  private client: PipelineClient;
  private queue: EventQueue;
  private scenes = new Map<number, Scene>();
  private table: Table | null = null;
  private brushes = new Map<number, ActiveBrush>();
  pipelineId: string | null = null;
  controls: Control[] = [];

  constructor(
    transport: Transport,
    private surfaceFor: SurfaceProvider,
  ) {
    this.client = new PipelineClient(transport);
    this.queue = new EventQueue((event) => this.refresh(event));
  }

  /** Create the pipeline, fetch its surfaces of record, render everything. */
  async load(spec: unknown): Promise<void> {
    const id = await this.client.createPipeline(spec);
    await this.attach(id);
  }

  /** Join an already-running pipeline (for example one preloaded at serve). */
  async attach(id: string): Promise<void> {
    this.pipelineId = id;
    const scenes = (await this.client.getScenes(id)) as unknown as Scene[];
    const params = await this.client.getParams(id);
    this.table = await this.client.getFrame(id);
    this.scenes.clear();
    for (const scene of scenes) {
      this.scenes.set(scene.view_id, scene);
    }
    this.controls = buildControls(
      (params.editable ?? []) as EditableParam[],
      (path, value) => this.client.patchParam(id, path, value),
    );
    for (const viewId of this.viewIds()) {
      this.renderView(viewId);
    }
  }

  viewIds(): number[] {
    return [...this.scenes.keys()].sort((a, b) => a - b);
  }

  scene(viewId: number): Scene | null {
    return this.scenes.get(viewId) ?? null;
  }

  frame(): Table | null {
    return this.table;
  }

  control(path: string): Control | null {
    return controlByPath(this.controls, path);
  }

  /** Feed one raw WebSocket event; ordering and staleness are handled here. */
  handleEvent(event: SceneEvent): void {
    this.queue.push(event);
  }

  /** Resolves when every received event has been applied and rendered. */
  async settled(): Promise<void> {
    await this.queue.settled();
  }

  private async refresh(event: SceneEvent): Promise<void> {
    if (!this.pipelineId || event.views.length === 0) {
      return;
    }
    const scenes = (await this.client.getScenes(this.pipelineId)) as unknown as Scene[];
    this.table = await this.client.getFrame(this.pipelineId);
    for (const scene of scenes) {
      this.scenes.set(scene.view_id, scene);
    }
    const toRender = new Set(event.views);
    // a changed brush-source scene can move marks: recompute the selection
    // and re-render targets whose filtered row set actually changed
    for (const [sourceId, brush] of this.brushes) {
      if (!event.views.includes(sourceId)) {
        continue;
      }
      const scene = this.scenes.get(sourceId);
      if (!scene) {
        this.brushes.delete(sourceId);
        continue;
      }
      const rows = rowsInRect(scene, sceneData(scene, this.table), brush.rect);
      if (!sameRows(rows, brush.rows)) {
        brush.rows = rows;
        for (const target of brush.binding.targets) {
          toRender.add(target);
        }
      }
    }
    for (const viewId of [...toRender].sort((a, b) => a - b)) {
      this.renderView(viewId);
    }
  }

  private renderOptions(viewId: number): RenderOptions {
    const options: RenderOptions = {};
    const own = this.brushes.get(viewId);
    if (own) {
      options.brushRect = own.rect;
    }
    for (const brush of this.brushes.values()) {
      if (!brush.binding.targets.includes(viewId)) {
        continue;
      }
      if (brush.binding.effect === "highlight") {
        options.highlightRows = brush.rows;
      } else {
        options.filterRows = brush.rows;
      }
    }
    return options;
  }

  private renderView(viewId: number): void {
    const scene = this.scenes.get(viewId);
    if (!scene) {
      return;
    }
    renderScene(scene, this.table, this.surfaceFor(viewId), this.renderOptions(viewId));
  }

  /**
   * Apply a brush rectangle (view-local pixels) on a source view. Selected
   * rows are the marks geometrically inside the rectangle; targets re-render
   * filtered. Returns the selected rows, or null when the view declares no
   * brush interaction.
   */
  brush(viewId: number, rect: BrushRect): Set<number> | null {
    const scene = this.scenes.get(viewId);
    if (!scene) {
      return null;
    }
    const binding = sourceBrushBinding(scene);
    if (!binding) {
      return null;
    }
    const rows = rowsInRect(scene, sceneData(scene, this.table), rect);
    this.brushes.set(viewId, { binding, rect, rows });
    this.renderView(viewId);
    for (const target of binding.targets) {
      this.renderView(target);
    }
    return rows;
  }

  brushedRows(viewId: number): Set<number> | null {
    const brush = this.brushes.get(viewId);
    return brush ? brush.rows : null;
  }

  /** Drop a brush and restore the unfiltered render of its targets. */
  clearBrush(viewId: number): void {
    const brush = this.brushes.get(viewId);
    if (!brush) {
      return;
    }
    this.brushes.delete(viewId);
    this.renderView(viewId);
    for (const target of brush.binding.targets) {
      this.renderView(target);
    }
  }
}
