/**
 * Parameter controls generated from the service's editable-parameter list.
 * A control keeps a draft value locally; committing a changed draft issues
 * exactly one PATCH. A rejected patch reverts the draft to the last
 * committed value and surfaces the server's message without losing state.
 */

import { PatchOutcome } from "./client.js";

export interface EditableParam {
  path: string;
  value: unknown;
  kind?: string;
  choices?: unknown[];
}

export type CommitFn = (path: string, value: unknown) => Promise<PatchOutcome>;

export type CommitResult = "patched" | "unchanged" | "rejected";

function deepEqual(a: unknown, b: unknown): boolean {
  if (Object.is(a, b)) {
    return true;
  }
  if (Array.isArray(a) && Array.isArray(b)) {
    return a.length === b.length && a.every((v, i) => deepEqual(v, b[i]));
  }
  if (a !== null && b !== null && typeof a === "object" && typeof b === "object") {
    const ka = Object.keys(a as object).sort();
    const kb = Object.keys(b as object).sort();
    return (
      ka.length === kb.length &&
      ka.every(
        (k, i) =>
          k === kb[i] &&
          deepEqual((a as Record<string, unknown>)[k], (b as Record<string, unknown>)[k]),
      )
    );
  }
  return false;
}

export class Control {
  readonly path: string;
  readonly kind: string;
  readonly choices: unknown[] | null;
  private committed: unknown;
  private draft: unknown;
  /** Message from the last rejected commit, null after a success or revert. */
  error: string | null = null;
  /** The value the last rejected commit carried. */
  rejectedValue: unknown = undefined;

  constructor(
    param: EditableParam,
    private commitFn: CommitFn,
  ) {
    this.path = param.path;
    this.kind = param.kind ?? "value";
    this.choices = param.choices ?? null;
    this.committed = param.value;
    this.draft = param.value;
  }

  get value(): unknown {
    return this.draft;
  }

  get committedValue(): unknown {
    return this.committed;
  }

  get dirty(): boolean {
    return !deepEqual(this.draft, this.committed);
  }

  set(value: unknown): void {
    this.draft = value;
  }

  revert(): void {
    this.draft = this.committed;
    this.error = null;
    this.rejectedValue = undefined;
  }

  /**
   * Push the draft to the server. An unchanged draft issues no request; a
   * changed one issues exactly one PATCH whatever the outcome.
   */
  async commit(): Promise<CommitResult> {
    if (!this.dirty) {
      return "unchanged";
    }
    const attempted = this.draft;
    const outcome = await this.commitFn(this.path, attempted);
    if (outcome.ok) {
      this.committed = "value" in outcome.body ? outcome.body.value : attempted;
      this.draft = this.committed;
      this.error = null;
      this.rejectedValue = undefined;
      return "patched";
    }
    this.draft = this.committed;
    this.rejectedValue = attempted;
    const body = outcome.body;
    this.error = String(body.message ?? body.error ?? `rejected with status ${outcome.status}`);
    return "rejected";
  }

  /** Server-side edits (another client's patch) move the committed value. */
  acceptRemote(value: unknown): void {
    const wasClean = !this.dirty;
    this.committed = value;
    if (wasClean) {
      this.draft = value;
    }
  }
}

export function buildControls(editable: EditableParam[], commitFn: CommitFn): Control[] {
  return editable.map((param) => new Control(param, commitFn));
}

export function controlByPath(controls: Control[], path: string): Control | null {
  for (const control of controls) {
    if (control.path === path) {
      return control;
    }
  }
  return null;
}
