"""Reactive execution engine.

A pipeline spec compiles to a dependency graph with one node per operation:
the data load, the fused data-transform chain, each analysis, each model, and
each view. Edges follow symbol production: a view binding ``Clusters`` depends
on the analysis that outputs it. Execution runs nodes in topological order and
caches each result; a parameter edit re-parses the spec, diffs every node's
parameter snapshot, and recomputes exactly the downstream closure of what
changed, so the post-edit state always equals a fresh run of the edited spec.

Two spec relationships are carried in parameter snapshots rather than edges,
because they flow from specs (not results) and edges would create cycles:
interaction targets embed their source view's fields, and facet siblings
embed each other's extent inputs (they share a y domain).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np

from .analytics import feature_matrix, fit_model, grid_search, load_model, predict, save_model, scale_features
from .analytics.features import FeatureMatrix
from .catalog import DEFAULT_CATALOG, Catalog
from .errors import (
    CycleDetected,
    ExecutionError,
    NotYetExecuted,
    SchemaError,
    ShapeMismatch,
    UnknownOperation,
    VizpipeError,
)
from .frame import FLOAT64, INT64, Column, DataFrame
from .ingest import SourceResolver, apply_selection, load_table, preprocess
from .scene import (
    PluginRegistry,
    _brush_fields,
    attach_annotations,
    compile_view,
    facet_y_domains,
    layout_views,
    view_interactions,
)
from .speclang import (
    FacetSpec,
    PipelineSpec,
    ViewSpec,
    _ser_model,
    _ser_view,
    effective_layout,
    expand_facets,
    parse_pipeline,
    serialize_step,
    set_param,
    validate_pipeline,
)
from .transforms import (
    apply_steps,
    expression_fields,
    output_columns,
    parse_expression,
    parse_predicate,
    predicate_fields,
)

DEFAULT_MEMO_BYTES = 512 * 2 ** 20


@dataclass
class Node:
    node_id: str
    kind: str  # load | transform | analysis | model | view-compile
    params: dict
    context: str  # spec path used to annotate execution errors


@dataclass
class RunReport:
    order: list[str]
    timings: dict[str, float]

    @property
    def total_seconds(self) -> float:
        return sum(self.timings.values())


@dataclass
class ChangeReport:
    path: str
    value: object
    dirty: list[str]
    recomputed: list[str]
    views: list[int]  # view ids whose scenes changed


class ResultMemo:
    """Bounded store of past results keyed by (node, params, upstream versions).

    Purely an optimization: execution is deterministic, so a hit returns the
    same value a recompute would produce. Reverting an edit restores the
    previous results without rerunning them.
    """

    def __init__(self, max_bytes: int = DEFAULT_MEMO_BYTES, max_entries: int = 256):
        self.max_bytes = max_bytes
        self.max_entries = max_entries
        self._entries: dict = {}
        self._order: list = []
        self._bytes = 0

    @staticmethod
    def _sizeof(result) -> int:
        if isinstance(result, DataFrame):
            return sum(c.values.nbytes + (c.valid.nbytes if c.valid is not None else 0)
                       for c in result.columns) + 256
        if isinstance(result, dict) and "columns" in result:
            return sum(c.values.nbytes for c in result["columns"]) + 1024
        return 4096

    def get(self, key):
        entry = self._entries.get(key)
        if entry is None:
            return None
        self._order.remove(key)
        self._order.append(key)
        return entry[0], entry[1]

    def put(self, key, result, version):
        if key in self._entries:
            return
        size = self._sizeof(result)
        self._entries[key] = (result, version, size)
        self._order.append(key)
        self._bytes += size
        while self._order and (
                self._bytes > self.max_bytes or len(self._order) > self.max_entries):
            old = self._order.pop(0)
            self._bytes -= self._entries.pop(old)[2]


class DepGraph:
    """Mutable execution state for one pipeline."""

    def __init__(self, spec: PipelineSpec, catalog: Catalog, plugins, resolver):
        self.raw_spec = spec
        self.catalog = catalog
        self.plugins = plugins
        self.resolver = resolver
        self.expanded: PipelineSpec = spec
        self.expansion_complete = False
        self.nodes: dict[str, Node] = {}
        self.up: dict[str, list[str]] = {}
        self.down: dict[str, list[str]] = {}
        self.order: list[str] = []
        self.decl_order: list[str] = []
        self.cache: dict[str, object] = {}
        self.versions: dict[str, int] = {}
        self.dirty: set[str] = set()
        self.memo = ResultMemo()
        self.lock = threading.RLock()
        self.revision = 0
        self.load_epoch = 0
        self._next_version = 1

    # -- public views of state -------------------------------------------

    def frame_node(self) -> str:
        return "transform" if "transform" in self.nodes else "load"

    def result(self, node_id: str):
        self._require_fresh(node_id)
        return self.cache[node_id]

    def frame(self) -> DataFrame:
        """Computed frame: transformed input plus every analysis output
        column and model prediction column, in declaration order."""
        self._require_fresh(self.frame_node())
        frame = self.cache[self.frame_node()]
        for nid in self.decl_order:
            self._require_fresh(nid)
            frame = _append_result_columns(frame, self.cache[nid])
        return frame

    def scenes(self) -> list[dict]:
        out = []
        for view in sorted(self.expanded.concrete_views(), key=lambda v: v.view_id):
            nid = f"view:{view.view_id}"
            self._require_fresh(nid)
            out.append(self.cache[nid])
        return out

    def models(self) -> dict[str, object]:
        out = {}
        for nid in self.decl_order:
            if nid.startswith("model:"):
                self._require_fresh(nid)
                out[nid.split(":", 1)[1]] = self.cache[nid]["model"]
        return out

    def _require_fresh(self, node_id: str):
        if node_id not in self.nodes:
            raise UnknownOperation(f"no operation {node_id!r}")
        if node_id in self.dirty or node_id not in self.cache:
            raise NotYetExecuted(f"{node_id!r} has pending recomputation")


# --- snapshot helpers ------------------------------------------------------

def _canon(value) -> str:
    import json

    return json.dumps(value, sort_keys=True, default=str)


def _view_consumed(view: ViewSpec) -> list[str]:
    """Field names a view reads from the shared frame (inclusive: names the
    view itself derives are filtered by the producer lookup, not here)."""
    consumed: list[str] = []
    local: set[str] = set()
    for step in view.transform:
        if step.kind == "match":
            try:
                consumed.extend(predicate_fields(parse_predicate(step.args["predicate"])))
            except VizpipeError:
                pass
        elif step.kind == "derive":
            try:
                consumed.extend(expression_fields(parse_expression(step.args["expr"])))
            except VizpipeError:
                pass
        elif step.kind == "aggregate":
            consumed.extend(step.args.get("group_by", []))
            if "bin" in step.args:
                consumed.append(step.args["bin"]["field"])
            consumed.extend(op["field"] for op in step.args["ops"] if op.get("field"))
        else:
            consumed.append(step.args["by"])
        local.update(output_columns(step.kind, step.args))
    for value in view.encodings.values():
        for f in (value if isinstance(value, list) else [value]):
            if isinstance(f, str):
                consumed.append(f)
    for layer in view.layers:
        consumed.extend(_view_consumed(layer))
    return [f for f in consumed if f not in local]


def _facet_sibling_summary(view: ViewSpec) -> dict:
    return {
        "view": view.view_id,
        "y": view.encodings.get("y"),
        "mark": view.mark_type,
        "transform": [serialize_step(s) for s in view.transform],
    }


# --- structure building ----------------------------------------------------

def _try_expand(spec: PipelineSpec, models: dict) -> tuple[PipelineSpec, bool]:
    facets = spec.facets()
    if not facets:
        return spec, True
    missing = [
        f for f in facets
        if isinstance(f.select, dict) and str(f.select.get("model")) not in models
    ]
    if not missing:
        return expand_facets(spec, models), True
    kept = [v for v in spec.visualizations
            if not (isinstance(v, FacetSpec) and v in missing)]
    partial = replace(spec, visualizations=kept)
    return expand_facets(partial, models), False


def _check_transform_chain(steps):
    for step in steps:
        if step.kind == "derive":
            try:
                refs = expression_fields(parse_expression(step.args["expr"]))
            except VizpipeError:
                continue
            if step.args["name"] in refs:
                raise CycleDetected(
                    f"derive {step.args['name']!r} references its own output"
                )


def _rebuild_structure(graph: DepGraph) -> None:
    spec = graph.raw_spec
    models = {nid.split(":", 1)[1]: res["model"]
              for nid, res in graph.cache.items()
              if nid.startswith("model:") and nid not in graph.dirty}
    expanded, complete = _try_expand(spec, models)
    graph.expanded = expanded
    graph.expansion_complete = complete

    nodes: dict[str, Node] = {}
    up: dict[str, list[str]] = {}
    decl: list[str] = []

    def add(node: Node, deps):
        nodes[node.node_id] = node
        seen = []
        for d in deps:
            if d is not None and d != node.node_id and d not in seen:
                seen.append(d)
        up[node.node_id] = seen

    data = expanded.data
    add(Node("load", "load", {
        "source": data.source, "format": data.format,
        "selection": data.selection, "preprocessing": data.preprocessing,
    }, "/data"), [])
    frame_node = "load"
    if data.transform:
        _check_transform_chain(data.transform)
        add(Node("transform", "transform",
                 {"steps": [serialize_step(s) for s in data.transform]},
                 "/data/transform"), ["load"])
        frame_node = "transform"

    producer: dict[str, str] = {}
    prefixed: dict[str, str] = {}
    for a in expanded.analyses:
        nid = f"analysis:{a.output_name}"
        out_name = a.output_name
        if a.algorithm == "ModelApply" and a.parameters.get("output"):
            out_name = str(a.parameters["output"])
        producer[out_name] = nid
        producer[a.output_name] = nid
        prefixed[a.output_name + "."] = nid
    for m in expanded.models:
        producer[f"{m.name}.prediction"] = f"model:{m.name}"

    def producer_of(field: str) -> str:
        hit = producer.get(field)
        if hit:
            return hit
        for prefix, nid in prefixed.items():
            if field.startswith(prefix):
                return nid
        return frame_node

    for m in expanded.models:
        nid = f"model:{m.name}"
        deps: list = []
        if m.load_from is None:
            deps.append(frame_node)
            for f in [*m.features, m.target]:
                if f:
                    deps.append(producer_of(f))
        add(Node(nid, "model", _ser_model(m), f"/models/{m.name}"), deps)
        decl.append(nid)

    for a in expanded.analyses:
        nid = f"analysis:{a.output_name}"
        deps = [frame_node]
        for f in a.features:
            deps.append(producer_of(f))
        if a.algorithm == "ModelApply":
            deps.append(f"model:{a.parameters.get('model')}")
        if nid in deps or any(d == nid for d in deps):
            raise CycleDetected(f"analysis {a.output_name!r} consumes its own output")
        add(Node(nid, "analysis", {
            "algorithm": a.algorithm, "features": list(a.features),
            "scaling": a.scaling, "range": list(a.scaling_range),
            "parameters": dict(a.parameters), "name": a.output_name,
        }, f"/analyses/{a.output_name}"), deps)
        decl.append(nid)

    layout = effective_layout(expanded)
    views = expanded.concrete_views()
    by_group: dict[int, list[ViewSpec]] = {}
    for v in views:
        if v.facet_group is not None:
            by_group.setdefault(v.facet_group[0], []).append(v)
    viewports = layout_views(layout, [v.view_id for v in views]) if views else {}
    views_by_id = {v.view_id: v for v in views}
    for v in views:
        nid = f"view:{v.view_id}"
        deps = [frame_node]
        consumed = list(_view_consumed(v))
        siblings = by_group.get(v.facet_group[0], []) if v.facet_group else []
        for sib in siblings:
            if sib.view_id != v.view_id:
                consumed.extend(_view_consumed(sib))
        for ann in expanded.annotations:
            if ann.view_id == v.view_id and ann.data_ref:
                consumed.append(ann.data_ref["name"])
        for f in consumed:
            deps.append(producer_of(f))
        incoming = []
        outgoing = []
        for inter in expanded.interactions:
            src = views_by_id.get(inter.source_view)
            entry = {
                "event": inter.event, "source": inter.source_view,
                "targets": list(inter.targets), "effect": inter.effect,
            }
            if inter.source_view == v.view_id:
                outgoing.append(entry)
            if v.view_id in inter.targets:
                # a target scene embeds only the fields the event transmits:
                # the brush's positional fields, nothing for other events
                fields = _brush_fields(src)[1] if inter.event == "brush" and src else []
                incoming.append(entry | {"source_fields": list(fields)})
        add(Node(nid, "view-compile", {
            "view": _ser_view(v),
            "viewport": viewports[v.view_id],
            "annotations": [
                {"kind": a.kind, "ref": a.data_ref, "template": a.text_template,
                 "values": a.values}
                for a in expanded.annotations if a.view_id == v.view_id
            ],
            "interactions_in": incoming,
            "interactions_out": outgoing,
            "siblings": [_facet_sibling_summary(s) for s in siblings],
        }, f"/visualizations/{v.view_id}"), deps)

    down: dict[str, list[str]] = {nid: [] for nid in nodes}
    for nid, deps in up.items():
        for d in deps:
            if d not in nodes:
                raise CycleDetected(f"{nid} depends on missing node {d!r}")
            down[d].append(nid)

    indegree = {nid: len(deps) for nid, deps in up.items()}
    order: list[str] = []
    remaining = list(nodes)
    while remaining:
        ready = [nid for nid in remaining if indegree[nid] == 0]
        if not ready:
            raise CycleDetected("pipeline dependencies form a cycle")
        nid = ready[0]
        remaining.remove(nid)
        order.append(nid)
        for child in down[nid]:
            indegree[child] -= 1

    graph.nodes = nodes
    graph.up = up
    graph.down = down
    graph.order = order
    graph.decl_order = decl
    for nid in list(graph.cache):
        if nid not in nodes:
            del graph.cache[nid]
            graph.versions.pop(nid, None)
    graph.dirty &= set(nodes)


def _closure(graph: DepGraph, seeds) -> set[str]:
    out = set()
    stack = [s for s in seeds if s in graph.nodes]
    while stack:
        nid = stack.pop()
        if nid in out:
            continue
        out.add(nid)
        stack.extend(graph.down.get(nid, []))
    return out


def _mark_stale(graph: DepGraph, old_keys: dict[str, str]) -> set[str]:
    """Nodes whose snapshot changed or who never ran, plus their closure."""
    seeds = []
    for nid, node in graph.nodes.items():
        if nid not in graph.cache:
            seeds.append(nid)
        elif old_keys.get(nid) != _canon(node.params):
            seeds.append(nid)
    closure = _closure(graph, seeds)
    graph.dirty |= closure
    return closure


def _snapshot_keys(graph: DepGraph) -> dict[str, str]:
    return {nid: _canon(node.params) for nid, node in graph.nodes.items()}


# --- node computation ------------------------------------------------------

def _append_result_columns(frame: DataFrame, result) -> DataFrame:
    if isinstance(result, dict):
        for col in result.get("columns", []):
            frame = frame.append_column(col)
        pred = result.get("prediction")
        if pred is not None:
            frame = frame.append_column(pred)
    return frame


def _input_frame(graph: DepGraph, node_id: str) -> DataFrame:
    frame = graph.cache[graph.frame_node()]
    deps = set(graph.up[node_id])
    for nid in graph.decl_order:
        if nid in deps:
            frame = _append_result_columns(frame, graph.cache[nid])
    return frame


def _used_columns(spec: PipelineSpec) -> list[str]:
    used: set[str] = set()
    for step in spec.data.transform:
        if step.kind == "match":
            try:
                used.update(predicate_fields(parse_predicate(step.args["predicate"])))
            except VizpipeError:
                pass
    for a in spec.analyses:
        used.update(a.features)
    for m in spec.models:
        used.update(m.features)
        if m.target:
            used.add(m.target)
    for v in spec.concrete_views():
        used.update(_view_consumed(v))
    return sorted(used)


def _expand_output(fm: FeatureMatrix, values: np.ndarray, dtype: str, name: str) -> Column:
    if dtype == INT64:
        per_row = np.asarray(values, dtype=np.int64)
        full, valid = fm.expand(per_row, fill=0)
        return Column(name, INT64, np.asarray(full, dtype=np.int64),
                      None if valid.all() else valid)
    per_row = np.asarray(values, dtype=np.float64)
    full, valid = fm.expand(per_row, fill=np.nan)
    return Column(name, FLOAT64, np.asarray(full, dtype=np.float64),
                  None if valid.all() else valid)


def _compute_load(graph: DepGraph) -> DataFrame:
    data = graph.expanded.data
    frame = load_table(data.source, data.format, graph.resolver)
    frame = apply_selection(frame, data.selection)
    frame = preprocess(frame, data.preprocessing, _used_columns(graph.expanded))
    return frame


def _resolve_path(graph: DepGraph, path: str) -> Path:
    p = Path(path)
    if graph.resolver.base_dir and not p.is_absolute():
        return graph.resolver.base_dir / p
    return p


def _training_matrix(frame: DataFrame, features: list[str], target: str):
    names = list(features) if features else [
        n for n in frame.numeric_names() if n != target
    ]
    fm_joint = feature_matrix(frame.project(names + [target]))
    X = FeatureMatrix(
        values=np.ascontiguousarray(fm_joint.values[:, :-1]),
        feature_names=names,
        kept_rows=fm_joint.kept_rows,
        source_rows=fm_joint.source_rows,
    )
    y = np.ascontiguousarray(fm_joint.values[:, -1])
    return X, y


def _compute_model(graph: DepGraph, m) -> dict:
    if m.load_from:
        model = load_model(_resolve_path(graph, m.load_from))
        return {"model": model, "prediction": None, "search": None}
    frame = _input_frame(graph, f"model:{m.name}")
    X, y = _training_matrix(frame, m.features, m.target)
    params = dict(m.parameters)
    cv_folds = int(params.pop("cv_folds", 5))
    seed = int(params.pop("seed", 0)) if "seed" in params else 0
    search = None
    if m.param_grid:
        search = grid_search(
            m.method, {k: list(v) for k, v in m.param_grid.items()},
            X, y, scoring=m.scoring, base_params=params,
            cv_folds=cv_folds, seed=seed,
        )
        model = search.best_model
    else:
        model = fit_model(m.method, X, y, parameters=params, seed=seed)
    if m.persistence:
        save_model(model, _resolve_path(graph, m.persistence))
    preds = predict(model, X)
    prediction = _expand_output(X, preds, FLOAT64, f"{m.name}.prediction")
    return {"model": model, "prediction": prediction, "search": search}


def _compute_analysis(graph: DepGraph, a) -> dict:
    entry = graph.catalog.algorithm(a.algorithm)
    if entry is None:
        raise UnknownOperation(f"algorithm {a.algorithm!r} is not registered")
    frame = _input_frame(graph, f"analysis:{a.output_name}")
    coerced = {}
    for key, value in a.parameters.items():
        info = entry.params.get(key)
        coerced[key] = info.coerce(value) if info else value
    if entry.fit is None:  # model application
        model_name = str(coerced.get("model"))
        model = graph.cache[f"model:{model_name}"]["model"]
        features = a.features or model.feature_names
        fm = feature_matrix(frame.project(list(features)))
        preds = predict(model, fm)
        out_name = str(coerced.get("output") or a.output_name)
        return {"columns": [_expand_output(fm, preds, FLOAT64, out_name)],
                "extras": {}}
    fm = feature_matrix(frame, list(a.features) or None)
    lo, hi = a.scaling_range
    X = scale_features(fm, a.scaling, lo, hi)
    out = entry.fit(X, coerced)
    values = np.asarray(out.values)
    if values.ndim == 1:
        columns = [_expand_output(fm, values, out.dtype, a.output_name)]
    else:
        columns = [
            _expand_output(fm, values[:, i], out.dtype, f"{a.output_name}.{i}")
            for i in range(values.shape[1])
        ]
    return {"columns": columns, "extras": dict(out.extras)}


def _compute_view(graph: DepGraph, view: ViewSpec) -> dict:
    frame = _input_frame(graph, f"view:{view.view_id}")
    layout = effective_layout(graph.expanded)
    viewport = layout_views(layout, [view.view_id])[view.view_id]
    y_dom = None
    if view.facet_group is not None:
        domains = facet_y_domains(graph.expanded, frame, group=view.facet_group[0])
        y_dom = domains.get(view.facet_group[0])
    scene = compile_view(view, frame, viewport, graph.plugins, y_dom)
    scene = attach_annotations(scene, view, frame, graph.expanded.annotations)
    known = {v.view_id for v in graph.expanded.concrete_views()}
    scene["interactions"] = view_interactions(
        graph.expanded, view.view_id,
        [s["id"] for s in scene["scales"]], known_ids=known)
    return scene


def _compute(graph: DepGraph, node_id: str):
    node = graph.nodes[node_id]
    if node.kind == "load":
        return _compute_load(graph)
    if node.kind == "transform":
        return apply_steps(graph.cache["load"], graph.expanded.data.transform)
    if node.kind == "model":
        name = node_id.split(":", 1)[1]
        return _compute_model(graph, graph.expanded.model(name))
    if node.kind == "analysis":
        name = node_id.split(":", 1)[1]
        return _compute_analysis(graph, graph.expanded.analysis(name))
    view = next(v for v in graph.expanded.concrete_views()
                if v.view_id == int(node_id.split(":", 1)[1]))
    return _compute_view(graph, view)


# --- public operations -----------------------------------------------------

def build_graph(
    spec,
    catalog: Catalog | None = None,
    plugins: PluginRegistry | None = None,
    resolver: SourceResolver | None = None,
    base_dir=None,
) -> DepGraph:
    """Dependency graph for a parsed or raw spec document; nothing executes yet."""
    if not isinstance(spec, PipelineSpec):
        spec = parse_pipeline(spec)
    graph = DepGraph(
        spec,
        catalog or DEFAULT_CATALOG,
        plugins,
        resolver or SourceResolver(base_dir=base_dir),
    )
    _rebuild_structure(graph)
    graph.dirty = set(graph.nodes)
    return graph


def _run_pass(graph: DepGraph, report_order, timings) -> None:
    for nid in graph.order:
        if nid not in graph.dirty and nid in graph.cache:
            continue
        key = (
            nid,
            graph.load_epoch if nid == "load" else 0,
            _canon(graph.nodes[nid].params),
            tuple(graph.versions[d] for d in graph.up[nid]),
        )
        started = time.perf_counter()
        hit = graph.memo.get(key)
        if hit is not None:
            result, version = hit
        else:
            try:
                result = _compute(graph, nid)
            except ExecutionError:
                raise
            except Exception as exc:
                raise ExecutionError(nid, exc, graph.nodes[nid].context) from exc
            version = graph._next_version
            graph._next_version += 1
            graph.memo.put(key, result, version)
        graph.cache[nid] = result
        graph.versions[nid] = version
        graph.dirty.discard(nid)
        timings[nid] = time.perf_counter() - started
        report_order.append(nid)


def execute(graph: DepGraph) -> RunReport:
    """Run every pending node in dependency order.

    Facets selected by model attributes expand once their model has run, so
    a first pass may grow the graph; the loop continues until no node is
    pending and expansion is complete.
    """
    with graph.lock:
        order: list[str] = []
        timings: dict[str, float] = {}
        for _ in range(4):
            _run_pass(graph, order, timings)
            if graph.expansion_complete:
                break
            old_keys = _snapshot_keys(graph)
            _rebuild_structure(graph)
            _mark_stale(graph, old_keys)
            if not graph.dirty:
                break
        graph.revision += 1
        return RunReport(order=order, timings=timings)


def set_parameter(graph: DepGraph, path: str, value, recompute: bool = True) -> ChangeReport:
    """Apply one spec edit transactionally.

    The edit re-parses the document, validates it, diffs node snapshots, and
    recomputes the downstream closure of every changed node. On any failure
    the graph is left exactly as it was. Setting a parameter to its current
    value is a no-op with an empty report.
    """
    with graph.lock:
        new_spec = set_param(graph.raw_spec, path, value)
        if new_spec == graph.raw_spec:
            return ChangeReport(path, value, [], [], [])
        _typecheck_edit(graph, path, value)
        input_columns = None
        if "load" in graph.cache and "load" not in graph.dirty:
            input_columns = graph.cache["load"].names
        findings = validate_pipeline(new_spec, graph.catalog, input_columns).errors()
        if findings:
            first = findings[0]
            if first.code == "TypeMismatch":
                raise TypeError(f"{first.path}: {first.message}")
            raise SchemaError(first.path, first.message)

        saved = (
            graph.raw_spec, graph.expanded, graph.expansion_complete,
            dict(graph.nodes), dict(graph.up), dict(graph.down),
            list(graph.order), list(graph.decl_order),
            dict(graph.cache), dict(graph.versions), set(graph.dirty),
        )
        old_keys = _snapshot_keys(graph)
        try:
            graph.raw_spec = new_spec
            _rebuild_structure(graph)
            closure = _mark_stale(graph, old_keys)
            if not recompute:
                return ChangeReport(path, value, sorted(closure), [],
                                    _view_ids(closure))
            run = execute(graph)
            return ChangeReport(path, value, sorted(closure), run.order,
                                _view_ids(run.order))
        except Exception:
            (graph.raw_spec, graph.expanded, graph.expansion_complete,
             graph.nodes, graph.up, graph.down, graph.order, graph.decl_order,
             graph.cache, graph.versions, graph.dirty) = saved
            raise


def _view_ids(node_ids) -> list[int]:
    return sorted(int(nid.split(":", 1)[1]) for nid in node_ids
                  if nid.startswith("view:"))


def _typecheck_edit(graph: DepGraph, path: str, value) -> None:
    parts = [p for p in path.split("/") if p]
    if len(parts) == 4 and parts[0] == "analyses" and parts[2] == "parameters":
        spec_analysis = graph.raw_spec.analysis(parts[1])
        if spec_analysis is None:
            return
        entry = graph.catalog.algorithm(spec_analysis.algorithm)
        if entry is None:
            return
        info = entry.params.get(parts[3])
        if info is not None:
            info.coerce(value)  # raises TypeError on mismatch


def export_result(graph: DepGraph, op_name: str) -> dict:
    """Column-oriented JSON for frame-shaped results; attributes for models.

    Accepted names: an analysis output name, a model name, "load",
    "transform", or "frame" for the fully assembled frame.
    """
    with graph.lock:
        if op_name == "frame":
            return graph.frame().to_dict()
        if op_name in ("load", "transform"):
            return graph.result(op_name).to_dict()
        nid = f"analysis:{op_name}"
        if nid in graph.nodes:
            result = graph.result(nid)
            return {col.name: col.to_list() for col in result["columns"]}
        nid = f"model:{op_name}"
        if nid in graph.nodes:
            result = graph.result(nid)
            model = result["model"]
            out = {
                "method": model.method,
                "feature_names": list(model.feature_names),
                "attributes": {k: dict(v) for k, v in model.attributes.items()},
            }
            if model.training_score is not None:
                out["training_score"] = model.training_score
            if result.get("search") is not None:
                out["best_params"] = dict(result["search"].best_params)
                out["best_score"] = result["search"].best_score
            return out
        raise UnknownOperation(f"no operation named {op_name!r}")


def reload_data(graph: DepGraph, recompute: bool = True) -> ChangeReport:
    """Re-read the data source in place and refresh everything downstream.

    Used when the backing file or endpoint changed without a spec edit."""
    with graph.lock:
        graph.load_epoch += 1
        closure = _closure(graph, ["load"])
        graph.dirty |= closure
        if not recompute:
            return ChangeReport("/data/source", graph.raw_spec.data.source,
                                sorted(closure), [], _view_ids(closure))
        run = execute(graph)
        return ChangeReport("/data/source", graph.raw_spec.data.source,
                            sorted(closure), run.order, _view_ids(run.order))


def chain_pipelines(export, downstream_spec, **build_kwargs) -> DepGraph:
    """Graph for a downstream spec whose "$chain" source reads an upstream
    export (a column-oriented JSON document or a frame)."""
    if isinstance(export, DataFrame):
        frame = export
    elif isinstance(export, dict) and export and all(
            isinstance(v, (list, tuple)) for v in export.values()):
        lengths = {len(v) for v in export.values()}
        if len(lengths) != 1:
            raise ShapeMismatch("chained columns have unequal lengths")
        frame = DataFrame.from_dict(export)
    else:
        raise ShapeMismatch("chained input is not frame-shaped")
    if not isinstance(downstream_spec, PipelineSpec):
        downstream_spec = parse_pipeline(downstream_spec)
    resolver = build_kwargs.pop("resolver", None) or SourceResolver(
        base_dir=build_kwargs.pop("base_dir", None))
    resolver.chained = frame
    return build_graph(downstream_spec, resolver=resolver, **build_kwargs)
