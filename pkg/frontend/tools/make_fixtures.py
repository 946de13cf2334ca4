"""Regenerate the golden fixtures the dashboard tests replay.

Two fixture families come out of this script, both produced by the running
backend so the client tests exercise real wire bytes:

* frames/ -- P6DF payloads plus a JSON export of every cell (nulls as null,
  categorical codes as labels). Values JSON cannot carry exactly are escaped:
  non-finite floats as {"$f64": "<little-endian hex>"} and int64 beyond 2^53
  as {"$i64": "<decimal>"}. Deliberately corrupted payloads cover the decode
  error paths.
* eva/session.json -- a full recorded dashboard session against the bundled
  exploratory-analysis document: every HTTP exchange in order, the WebSocket
  event per edit, and a brush-selection oracle computed from the final frame
  and scales.

Run from anywhere:  python3 frontend/tools/make_fixtures.py
"""

import base64
import json
import math
import struct
from pathlib import Path

from fastapi.testclient import TestClient

from vizpipe import build_graph, codec, execute
from vizpipe.frame import (
    DataFrame,
    categorical_column,
    float_column,
    int_column,
)
from vizpipe.service import create_app

HERE = Path(__file__).resolve().parent
REPO = HERE.parent.parent
FIXTURES = HERE.parent / "test" / "fixtures"

MAX_SAFE_INT = 2**53 - 1


# --- frame fixtures --------------------------------------------------------

def json_cell(value, dtype):
    if value is None:
        return None
    if dtype == "float64":
        if math.isfinite(value):
            return value
        return {"$f64": struct.pack("<d", value).hex()}
    if dtype == "int64":
        return value if abs(value) <= MAX_SAFE_INT else {"$i64": str(value)}
    return value


def column_doc(col):
    return {
        "name": col.name,
        "dtype": col.dtype,
        "row_count": col.row_count,
        "valid": [bool(b) for b in col.valid] if col.valid is not None else None,
        "dictionary": list(col.dictionary) if col.dictionary is not None else None,
        "values": [json_cell(v, col.dtype) for v in col.to_list()],
    }


def build_frames():
    nan = float("nan")
    inf = float("inf")
    mixed = DataFrame([
        float_column(
            "Measure",
            [1.5, 0.0, -0.0, 2.25e-8, 0.0, 3.125, 6.0, -7.75, 8.5, 9.0, 1e6, 0.0, 0.25],
            valid=[1, 0, 1, 1, 0, 1, 1, 1, 1, 1, 1, 0, 1],
        ),
        int_column(
            "Count",
            [4, 0, -17, 9007199254740991, -9007199254740991, 3, 0, 8, 1, -1, 2, 5, 6],
            valid=[1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
        ),
        categorical_column(
            "Label",
            ["alpha", "beta", None, "gamma", "alpha", "café", "Ωmega",
             None, "line\nbreak", "tab\there", "alpha", "beta", "\U0001f680"],
        ),
        categorical_column(
            "Plain",
            ["", "x", "x", "", "y", "y", "x", "", "y", "x", "", "y", "x"],
        ),
        float_column(
            "Dense",
            [float(i) * 0.5 - 2.0 for i in range(13)],
        ),
    ])
    extremes = DataFrame([
        float_column(
            "Edge",
            [nan, inf, -inf, 1.7976931348623157e308, 5e-324, -1e-310, -0.0, 0.0],
        ),
        int_column(
            "Big",
            [-(2**63), 2**63 - 1, 0, -1, 2**62, -(2**62), 7, -7],
        ),
        categorical_column(
            "Tag",
            ["only one label"] * 8,
        ),
    ])
    allnull = DataFrame([
        float_column("Gone", [0.0] * 6, valid=[0] * 6),
        int_column("Here", [10, 20, 30, 40, 50, 60]),
    ])
    zero_rows = DataFrame([
        float_column("A", []),
        int_column("B", []),
        categorical_column("C", []),
    ])
    empty = DataFrame([])

    spec_path = REPO / "demos" / "specs" / "eva_dashboard.json"
    graph = build_graph(json.loads(spec_path.read_text()), base_dir=spec_path.parent)
    execute(graph)
    pipeline = graph.frame()

    return {
        "mixed": mixed,
        "extremes": extremes,
        "allnull": allnull,
        "zero-rows": zero_rows,
        "empty": empty,
        "pipeline": pipeline,
    }


def write_frame_fixtures():
    outdir = FIXTURES / "frames"
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {"frames": [], "corrupt": []}
    frames = build_frames()
    for name, frame in frames.items():
        payload = codec.encode(frame)
        assert codec.decode(payload).equals(frame)
        (outdir / f"{name}.p6df").write_bytes(payload)
        expected = {
            "row_count": frame.row_count,
            "columns": [column_doc(c) for c in frame.columns],
        }
        (outdir / f"{name}.expected.json").write_text(
            json.dumps(expected, ensure_ascii=False, allow_nan=False,
                       separators=(",", ":")) + "\n")
        manifest["frames"].append(name)

    base = codec.encode(frames["mixed"])
    corrupt = {
        "bad-magic": (b"Q" + base[1:], "BadMagic"),
        "bad-version": (base[:4] + b"\x09" + base[5:], "UnsupportedVersion"),
        "truncated": (base[:-5], "TruncatedPayload"),
        "trailing": (base + b"\x00\x01\x02", "TruncatedPayload"),
    }
    for name, (payload, error) in corrupt.items():
        (outdir / f"{name}.bin").write_bytes(payload)
        manifest["corrupt"].append({"file": f"{name}.bin", "error": error})
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return len(manifest["frames"]), len(manifest["corrupt"])


# --- recorded dashboard session --------------------------------------------

EDITS = [
    ("/analyses/Clusters/parameters/n_clusters", 5),
    ("/analyses/PC/features", ["MotherAge", "MotherWeightGain", "GestationWeeks"]),
    ("/visualizations/2/encodings/opacity", 0.15),
    ("/analyses/Clusters/scaling", "minmax"),
    ("/view-layout/width", 1200),
]


def record_session():
    spec_path = REPO / "demos" / "specs" / "eva_dashboard.json"
    spec = json.loads(spec_path.read_text())
    app = create_app(base_dir=spec_path.parent)
    client = TestClient(app)
    exchanges = []

    def rec(method, path, body, response):
        entry = {"method": method, "path": path, "status": response.status_code}
        if body is not None:
            entry["body"] = body
        if "octet-stream" in response.headers.get("content-type", ""):
            entry["bytes_b64"] = base64.b64encode(response.content).decode("ascii")
        else:
            entry["json"] = response.json()
        exchanges.append(entry)
        return response

    created = rec("POST", "/api/pipelines", spec,
                  client.post("/api/pipelines", content=json.dumps(spec)))
    assert created.status_code == 201, created.json()
    pid = created.json()["pipeline_id"]
    base = f"/api/pipelines/{pid}"
    rec("GET", f"{base}/scenes", None, client.get(f"{base}/scenes"))
    rec("GET", f"{base}/params", None, client.get(f"{base}/params"))
    rec("GET", f"{base}/frame", None, client.get(f"{base}/frame"))

    events = []
    edit_docs = []
    with client.websocket_connect(f"{base}/events") as ws:
        for path, value in EDITS:
            patched = rec("PATCH", f"{base}/params", {"path": path, "value": value},
                          client.patch(f"{base}/params",
                                       json={"path": path, "value": value}))
            assert patched.status_code == 200, patched.json()
            event = ws.receive_json()
            assert event["revision"] == len(events) + 1
            assert event["views"] == patched.json()["views"]
            events.append(event)
            edit_docs.append({"path": path, "value": value,
                              "views": event["views"]})
            rec("GET", f"{base}/scenes", None, client.get(f"{base}/scenes"))
            rec("GET", f"{base}/frame", None, client.get(f"{base}/frame"))

    # each edit must touch a different slice of the dashboard, including one
    # proper subset, or the only-affected-views check would be vacuous
    view_sets = [tuple(e["views"]) for e in edit_docs]
    all_views = max(view_sets, key=len)
    assert len(set(view_sets)) >= 4, view_sets
    assert any(len(vs) < len(all_views) for vs in view_sets), view_sets

    scenes = client.get(f"{base}/scenes").json()
    frame = codec.decode(client.get(f"{base}/frame").content)
    scene0 = next(s for s in scenes if s["view_id"] == 0)
    scales = {s["id"]: s for s in scene0["scales"]}

    def lin(scale, v):
        d0, d1 = scale["domain"]
        r0, r1 = scale["range"]
        return r0 + (v - d0) / (d1 - d0) * (r1 - r0)

    vw = scene0["viewport"]["width"]
    vh = scene0["viewport"]["height"]
    rect = {"x0": 0.15 * vw, "y0": 0.20 * vh, "x1": 0.55 * vw, "y1": 0.65 * vh}
    xs = frame.column(scene0["channels"]["x"]["field"]).to_list()
    ys = frame.column(scene0["channels"]["y"]["field"]).to_list()
    rows = [
        i for i in range(frame.row_count)
        if rect["x0"] <= lin(scales["x"], xs[i]) <= rect["x1"]
        and rect["y0"] <= lin(scales["y"], ys[i]) <= rect["y1"]
    ]
    assert 0 < len(rows) < frame.row_count, len(rows)
    binding = next(i for i in scene0["interactions"]
                   if i["event"] == "brush" and i["source"] == 0)

    session = {
        "spec": spec,
        "pipeline_id": pid,
        "exchanges": exchanges,
        "events": events,
        "edits": edit_docs,
        "brush": {
            "view": 0,
            "targets": binding["targets"],
            "rect": rect,
            "rows": rows,
        },
    }
    outdir = FIXTURES / "eva"
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "session.json").write_text(
        json.dumps(session, ensure_ascii=False, separators=(",", ":")) + "\n")
    return len(exchanges), len(rows)


def main():
    n_frames, n_corrupt = write_frame_fixtures()
    n_exchanges, n_rows = record_session()
    print(f"frames: {n_frames} golden + {n_corrupt} corrupt under "
          f"{FIXTURES / 'frames'}")
    print(f"session: {n_exchanges} exchanges, brush selects {n_rows} rows, "
          f"under {FIXTURES / 'eva'}")


if __name__ == "__main__":
    main()
