import { describe, expect, it } from "vitest";

import { PatchOutcome } from "../src/client.js";
import { Control, buildControls, controlByPath } from "../src/controls.js";

interface Call {
  path: string;
  value: unknown;
}

function commitStub(outcomes: PatchOutcome[]): { calls: Call[]; fn: (p: string, v: unknown) => Promise<PatchOutcome> } {
  const calls: Call[] = [];
  return {
    calls,
    fn: async (path, value) => {
      calls.push({ path, value });
      const next = outcomes.shift();
      if (!next) {
        throw new Error("commit called more times than scripted");
      }
      return next;
    },
  };
}

const accepted = (value: unknown): PatchOutcome => ({
  ok: true,
  status: 200,
  body: { path: "", value, dirty: [], recomputed: [], views: [], revision: 1 },
});

const rejected = (message: string): PatchOutcome => ({
  ok: false,
  status: 400,
  body: { error: "bad-value", message },
});

describe("control commits", () => {
  it("issues exactly one request per committed change", async () => {
    const stub = commitStub([accepted(5), accepted(7)]);
    const control = new Control({ path: "/analyses/C/parameters/k", value: 3 }, stub.fn);

    control.set(5);
    expect(await control.commit()).toBe("patched");
    control.set(7);
    expect(await control.commit()).toBe("patched");

    expect(stub.calls).toEqual([
      { path: "/analyses/C/parameters/k", value: 5 },
      { path: "/analyses/C/parameters/k", value: 7 },
    ]);
    expect(control.value).toBe(7);
    expect(control.committedValue).toBe(7);
    expect(control.dirty).toBe(false);
  });

  it("skips the request entirely when the draft is unchanged", async () => {
    const stub = commitStub([]);
    const control = new Control({ path: "/p", value: [1, 2] }, stub.fn);

    expect(await control.commit()).toBe("unchanged");
    control.set([1, 2]); // same content, different identity
    expect(await control.commit()).toBe("unchanged");
    expect(stub.calls).toHaveLength(0);
  });

  it("reverts the draft and surfaces the message when the server rejects", async () => {
    const stub = commitStub([rejected("n_clusters must be at least 1")]);
    const control = new Control({ path: "/k", value: 3 }, stub.fn);

    control.set(-2);
    expect(await control.commit()).toBe("rejected");
    expect(control.value).toBe(3);
    expect(control.committedValue).toBe(3);
    expect(control.error).toBe("n_clusters must be at least 1");
    expect(control.rejectedValue).toBe(-2);
    expect(control.dirty).toBe(false);
  });

  it("clears the error on the next successful commit", async () => {
    const stub = commitStub([rejected("out of range"), accepted(4)]);
    const control = new Control({ path: "/k", value: 3 }, stub.fn);

    control.set(99);
    await control.commit();
    expect(control.error).toBe("out of range");
    control.set(4);
    expect(await control.commit()).toBe("patched");
    expect(control.error).toBeNull();
    expect(control.rejectedValue).toBeUndefined();
  });

  it("revert discards the draft without a request", async () => {
    const stub = commitStub([]);
    const control = new Control({ path: "/k", value: "pca" }, stub.fn);
    control.set("kmeans");
    expect(control.dirty).toBe(true);
    control.revert();
    expect(control.value).toBe("pca");
    expect(control.dirty).toBe(false);
    expect(stub.calls).toHaveLength(0);
  });

  it("remote updates move clean drafts but preserve dirty ones", () => {
    const stub = commitStub([]);
    const clean = new Control({ path: "/a", value: 1 }, stub.fn);
    clean.acceptRemote(9);
    expect(clean.value).toBe(9);

    const dirty = new Control({ path: "/b", value: 1 }, stub.fn);
    dirty.set(5);
    dirty.acceptRemote(9);
    expect(dirty.value).toBe(5);
    expect(dirty.committedValue).toBe(9);
  });
});

describe("control construction", () => {
  it("builds controls from the editable-parameter listing", () => {
    const stub = commitStub([]);
    const controls = buildControls(
      [
        { path: "/analyses/C/algorithm", value: "kmeans", choices: ["kmeans", "pca"] },
        { path: "/view-layout/rows", value: 2, kind: "int" },
      ],
      stub.fn,
    );
    expect(controls).toHaveLength(2);
    expect(controls[0].choices).toEqual(["kmeans", "pca"]);
    expect(controls[1].kind).toBe("int");
    expect(controlByPath(controls, "/view-layout/rows")).toBe(controls[1]);
    expect(controlByPath(controls, "/absent")).toBeNull();
  });
});
