"""Command line entry point.

    vizpipe run <spec> --out <dir> [--export NAME ...]   execute, write scenes
    vizpipe validate <spec>                              print findings
    vizpipe serve [<spec> ...] [--port P] [--static DIR] start the service

Exit codes: 0 success, 1 validation findings, 2 execution failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import uvicorn

from . import engine
from .errors import ExecutionError, SchemaError, SpecSyntaxError
from .scene import scene_bytes
from .service import DEFAULT_PORT, create_app, preload
from .speclang import parse_pipeline, validate_pipeline


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vizpipe")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a pipeline and write its outputs")
    run.add_argument("spec", type=Path)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--export", action="append", default=[], metavar="NAME",
                     help="also write this analysis/model result as JSON")

    val = sub.add_parser("validate", help="check a pipeline document")
    val.add_argument("spec", type=Path)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("specs", nargs="*", type=Path,
                       help="pipeline documents to preload")
    serve.add_argument("--port", type=int,
                       default=int(os.environ.get("P6_PORT", DEFAULT_PORT)))
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--static", type=Path, default=None,
                       help="directory of dashboard assets to serve at /")
    return parser


def _load_spec(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, 2
    try:
        return parse_pipeline(text), 0
    except (SpecSyntaxError, SchemaError) as exc:
        print(f"error {path}: {exc}", file=sys.stderr)
        return None, 1


def _print_findings(report) -> None:
    for f in report.findings:
        print(f"{f.severity} {f.path}: [{f.code}] {f.message}")


def _cmd_validate(args) -> int:
    spec, code = _load_spec(args.spec)
    if spec is None:
        return code
    report = validate_pipeline(spec)
    _print_findings(report)
    return 0 if not report.findings else 1


def _cmd_run(args) -> int:
    spec, code = _load_spec(args.spec)
    if spec is None:
        return code
    report = validate_pipeline(spec)
    _print_findings(report)
    if not report.ok:
        return 1
    graph = engine.build_graph(spec, base_dir=args.spec.parent)
    try:
        engine.execute(graph)
    except ExecutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    scenes = graph.scenes()
    body = b"[" + b",".join(scene_bytes(s) for s in scenes) + b"]"
    (args.out / "scenes.json").write_bytes(body)
    for name in args.export:
        try:
            result = engine.export_result(graph, name)
        except Exception as exc:
            print(f"error exporting {name!r}: {exc}", file=sys.stderr)
            return 2
        (args.out / f"{name}.json").write_text(
            json.dumps(result, indent=1, sort_keys=True))
    print(f"wrote {len(scenes)} scenes to {args.out / 'scenes.json'}")
    return 0


def _cmd_serve(args) -> int:
    base_dir = args.specs[0].parent if args.specs else Path.cwd()
    app = create_app(base_dir=base_dir, static_dir=args.static)
    docs = []
    for path in args.specs:
        spec, code = _load_spec(path)
        if spec is None:
            return code
        docs.append(spec)
    try:
        ids = preload(app, docs, base_dir=base_dir)
    except ExecutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path, pid in zip(args.specs, ids):
        print(f"{path}: pipeline {pid}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "validate":
        return _cmd_validate(args)
    return _cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
