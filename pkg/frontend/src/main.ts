/**
 * Browser entry point: binds the dashboard to fetch, WebSocket, and canvas.
 * Everything behavioral lives in the transport-agnostic modules; this file
 * only adapts them to the DOM.
 */

import { HttpResponse, SceneEvent, Transport } from "./client.js";
import { Control } from "./controls.js";
import { Dashboard } from "./dashboard.js";
import { Anchor, Role, Scene, Surface } from "./render.js";

class FetchTransport implements Transport {
  async request(method: string, path: string, body?: unknown): Promise<HttpResponse> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(path, init);
    const type = response.headers.get("content-type") ?? "";
    if (type.includes("octet-stream")) {
      return { status: response.status, bytes: new Uint8Array(await response.arrayBuffer()) };
    }
    const text = await response.text();
    return { status: response.status, json: text ? JSON.parse(text) : undefined };
  }
}

class CanvasSurface implements Surface {
  private ctx: CanvasRenderingContext2D;

  constructor(private canvas: HTMLCanvasElement) {
    this.ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
  }

  clear(width: number, height: number): void {
    this.canvas.width = width;
    this.canvas.height = height;
    this.ctx.clearRect(0, 0, width, height);
    this.ctx.fillStyle = "#ffffff";
    this.ctx.fillRect(0, 0, width, height);
  }

  circle(x: number, y: number, r: number, fill: string, opacity: number, _role: Role): void {
    this.ctx.globalAlpha = opacity;
    this.ctx.fillStyle = fill;
    this.ctx.beginPath();
    this.ctx.arc(x, y, r, 0, Math.PI * 2);
    this.ctx.fill();
    this.ctx.globalAlpha = 1;
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opacity: number, _role: Role): void {
    this.ctx.globalAlpha = opacity;
    this.ctx.fillStyle = fill;
    this.ctx.fillRect(x, y, w, h);
    this.ctx.globalAlpha = 1;
  }

  polyline(points: [number, number][], stroke: string, width: number, opacity: number, _role: Role): void {
    if (points.length < 2) {
      return;
    }
    this.ctx.globalAlpha = opacity;
    this.ctx.strokeStyle = stroke;
    this.ctx.lineWidth = width;
    this.ctx.beginPath();
    this.ctx.moveTo(points[0][0], points[0][1]);
    for (let i = 1; i < points.length; i++) {
      this.ctx.lineTo(points[i][0], points[i][1]);
    }
    this.ctx.stroke();
    this.ctx.globalAlpha = 1;
  }

  polygon(points: [number, number][], fill: string, opacity: number, _role: Role): void {
    if (points.length < 3) {
      return;
    }
    this.ctx.globalAlpha = opacity;
    this.ctx.fillStyle = fill;
    this.ctx.beginPath();
    this.ctx.moveTo(points[0][0], points[0][1]);
    for (let i = 1; i < points.length; i++) {
      this.ctx.lineTo(points[i][0], points[i][1]);
    }
    this.ctx.closePath();
    this.ctx.fill();
    this.ctx.globalAlpha = 1;
  }

  text(x: number, y: number, body: string, fill: string, size: number, anchor: Anchor, _role: Role): void {
    this.ctx.fillStyle = fill;
    this.ctx.font = `${size}px sans-serif`;
    this.ctx.textAlign = anchor === "middle" ? "center" : anchor === "end" ? "right" : "left";
    this.ctx.fillText(body, x, y);
  }
}

function widgetFor(control: Control, onCommit: () => void): HTMLElement {
  const wrap = document.createElement("label");
  wrap.className = "control";
  const name = document.createElement("span");
  name.textContent = control.path;
  wrap.appendChild(name);

  const error = document.createElement("em");
  error.className = "control-error";

  const showOutcome = () => {
    error.textContent = control.error ?? "";
    onCommit();
  };

  if (control.choices) {
    const select = document.createElement("select");
    for (const choice of control.choices) {
      const option = document.createElement("option");
      option.value = String(choice);
      option.textContent = String(choice);
      select.appendChild(option);
    }
    select.value = String(control.value);
    select.addEventListener("change", async () => {
      control.set(select.value);
      await control.commit();
      select.value = String(control.value);
      showOutcome();
    });
    wrap.appendChild(select);
  } else {
    const input = document.createElement("input");
    const numeric = control.kind === "int" || control.kind === "float";
    input.type = numeric ? "number" : "text";
    const show = () => {
      input.value = Array.isArray(control.value)
        ? (control.value as unknown[]).join(", ")
        : String(control.value ?? "");
    };
    show();
    input.addEventListener("change", async () => {
      let parsed: unknown = input.value;
      if (numeric) {
        parsed = Number(input.value);
      } else if (control.kind === "field-list" || Array.isArray(control.committedValue)) {
        parsed = input.value
          .split(",")
          .map((s) => s.trim())
          .filter((s) => s.length > 0);
      } else if (input.value !== "" && !Number.isNaN(Number(input.value))) {
        parsed = Number(input.value);
      }
      control.set(parsed);
      await control.commit();
      show();
      showOutcome();
    });
    wrap.appendChild(input);
  }
  wrap.appendChild(error);
  return wrap;
}

function bindBrush(dashboard: Dashboard, viewId: number, canvas: HTMLCanvasElement): void {
  const scene = dashboard.scene(viewId);
  if (!scene || !scene.interactions.some((i) => i.event === "brush" && i.source === viewId)) {
    return;
  }
  let start: [number, number] | null = null;
  const local = (event: MouseEvent): [number, number] => {
    const bounds = canvas.getBoundingClientRect();
    return [event.clientX - bounds.left, event.clientY - bounds.top];
  };
  canvas.addEventListener("mousedown", (event) => {
    start = local(event);
  });
  canvas.addEventListener("mousemove", (event) => {
    if (!start) {
      return;
    }
    const [x, y] = local(event);
    dashboard.brush(viewId, { x0: start[0], y0: start[1], x1: x, y1: y });
  });
  window.addEventListener("mouseup", () => {
    start = null;
  });
  canvas.addEventListener("dblclick", () => {
    dashboard.clearBrush(viewId);
  });
}

async function boot(): Promise<void> {
  const grid = document.getElementById("views") as HTMLElement;
  const panel = document.getElementById("controls") as HTMLElement;
  const status = document.getElementById("status") as HTMLElement;
  const specBox = document.getElementById("spec") as HTMLTextAreaElement;
  const loadButton = document.getElementById("load") as HTMLButtonElement;

  const transport = new FetchTransport();
  const canvases = new Map<number, CanvasSurface>();
  const dashboard = new Dashboard(transport, (viewId) => {
    let surface = canvases.get(viewId);
    if (!surface) {
      const canvas = document.createElement("canvas");
      canvas.className = "view";
      const scene = dashboard.scene(viewId) as Scene;
      canvas.style.left = `${scene.viewport.x}px`;
      canvas.style.top = `${scene.viewport.y}px`;
      grid.appendChild(canvas);
      surface = new CanvasSurface(canvas);
      canvases.set(viewId, surface);
      bindBrush(dashboard, viewId, canvas);
    }
    return surface;
  });

  const connect = () => {
    const id = dashboard.pipelineId;
    if (!id) {
      return;
    }
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    const socket = new WebSocket(`${scheme}://${location.host}/api/pipelines/${id}/events`);
    socket.addEventListener("message", (event) => {
      dashboard.handleEvent(JSON.parse(event.data) as SceneEvent);
    });
    socket.addEventListener("close", () => {
      status.textContent = "event stream closed";
    });
  };

  const rebuildPanel = () => {
    panel.replaceChildren();
    for (const control of dashboard.controls) {
      panel.appendChild(widgetFor(control, () => undefined));
    }
  };

  const start = async (spec: unknown | null, existing: string | null) => {
    grid.replaceChildren();
    canvases.clear();
    if (existing) {
      await dashboard.attach(existing);
    } else {
      await dashboard.load(spec);
    }
    rebuildPanel();
    connect();
    status.textContent = `pipeline ${dashboard.pipelineId}, views ${dashboard.viewIds().join(", ")}`;
  };

  loadButton.addEventListener("click", async () => {
    try {
      await start(JSON.parse(specBox.value), null);
    } catch (error) {
      status.textContent = String(error);
    }
  });

  try {
    const response = await transport.request("GET", "/api/pipelines");
    const pipelines = ((response.json ?? {}) as { pipelines?: string[] }).pipelines ?? [];
    if (pipelines.length) {
      await start(null, pipelines[0]);
      return;
    }
  } catch (error) {
    status.textContent = String(error);
  }
  status.textContent = "no running pipeline; paste a document and press load";
}

boot().catch((error) => {
  const status = document.getElementById("status");
  if (status) {
    status.textContent = String(error);
  }
});
