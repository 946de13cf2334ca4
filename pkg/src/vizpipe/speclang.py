"""Pipeline document language: parse, normalize, validate, facet expansion,
symbol resolution, and name-addressed parameter paths.

A pipeline is one JSON document with up to seven blocks, in any order::

    {
      "data":           {"source", "selection", "preprocessing", "transform"},
      "analyses":       {name: {"algorithm", "features", "scaling", params...}},
      "models":         [{"name", "method", "target", ...}],
      "view-layout":    {"rows", "cols", "padding", "width", "height"},
      "visualizations": [view or facet ...],
      "interactions":   [{"event", "source", "targets", "effect"}],
      "annotations":    [{"view", "kind", "ref", "template"}]
    }

Views may spell channels inline ({"mark": "circle", "x": "PC.0"}) or under
"encodings"; both normalize identically. Analysis bodies treat unknown keys
as algorithm parameters, matching how Fig-2-style documents inline
``n_clusters`` next to ``algorithm``. Facets use "$rows"/"$cols" with a
select list or a model-attribute selector, and the literal "$select" inside
the template is substituted per expansion.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field as dc_field

from .catalog import DEFAULT_CATALOG, Catalog
from .errors import (
    FacetOverflow,
    SchemaError,
    SpecSyntaxError,
    UnknownPath,
    UnresolvedReference,
)
from .transforms import expression_fields, output_columns, parse_expression, parse_predicate, predicate_fields

CHANNELS = ("x", "y", "size", "width", "height", "color", "opacity", "dims", "text")
MARK_TYPES = ("circle", "rect", "line", "area", "pcp-line", "text")
_MARK_ALIASES = {"bar": "rect", "point": "circle"}
_ALGORITHM_ALIASES = {"Agglomerative": "AgglomerativeClustering"}


# --- domain types ----------------------------------------------------------

@dataclass
class TransformStep:
    kind: str  # match | derive | aggregate | sort | top
    args: dict


@dataclass
class DataSpec:
    source: str
    format: str | None = None
    selection: dict | None = None  # {columns, sample_n, seed}
    preprocessing: dict | None = None  # {dropna, encodings}
    transform: list[TransformStep] = dc_field(default_factory=list)


@dataclass
class AnalysisSpec:
    output_name: str
    algorithm: str
    features: list[str] = dc_field(default_factory=list)  # [] = all numeric
    scaling: str = "none"
    scaling_range: tuple[float, float] = (0.0, 1.0)
    parameters: dict = dc_field(default_factory=dict)


@dataclass
class ModelSpec:
    name: str
    method: str
    module: str = "builtin"
    training_data: str = "$data"  # "$data" = this pipeline's own frame
    target: str = ""
    features: list[str] = dc_field(default_factory=list)  # [] = all others
    parameters: dict = dc_field(default_factory=dict)
    param_grid: dict = dc_field(default_factory=dict)
    scoring: str = "r2"
    persistence: str | None = None
    load_from: str | None = None  # use a saved model file instead of fitting


@dataclass
class ViewSpec:
    view_id: int
    mark_type: str = "circle"
    transform: list[TransformStep] = dc_field(default_factory=list)
    encodings: dict = dc_field(default_factory=dict)
    layers: list["ViewSpec"] = dc_field(default_factory=list)
    facet_group: tuple[int, int] | None = None  # (facet index, position)


@dataclass
class FacetSpec:
    axis: str  # "$rows" | "$cols"
    select: list | dict  # value list, or {model, attribute, top_k, order}
    template: ViewSpec


@dataclass
class InteractionSpec:
    event: str  # zoom | pan | click | hover | brush
    source_view: int
    targets: list[int] = dc_field(default_factory=list)
    effect: str = "filter"  # filter | highlight


@dataclass
class AnnotationSpec:
    view_id: int
    kind: str  # trendline | label | rule
    data_ref: dict | None = None  # {"name": analysis output, "filter": predicate}
    text_template: str | None = None
    values: list | None = None  # literal positions, e.g. injected change points


@dataclass
class Layout:
    rows: int
    cols: int
    padding: int = 10
    width: int = 960
    height: int = 600


@dataclass
class PipelineSpec:
    data: DataSpec
    analyses: list[AnalysisSpec] = dc_field(default_factory=list)
    models: list[ModelSpec] = dc_field(default_factory=list)
    view_layout: Layout | None = None
    visualizations: list = dc_field(default_factory=list)  # ViewSpec | FacetSpec
    interactions: list[InteractionSpec] = dc_field(default_factory=list)
    annotations: list[AnnotationSpec] = dc_field(default_factory=list)

    def concrete_views(self) -> list[ViewSpec]:
        return [v for v in self.visualizations if isinstance(v, ViewSpec)]

    def facets(self) -> list[FacetSpec]:
        return [v for v in self.visualizations if isinstance(v, FacetSpec)]

    def analysis(self, name: str) -> AnalysisSpec | None:
        for a in self.analyses:
            if a.output_name == name:
                return a
        return None

    def model(self, name: str) -> ModelSpec | None:
        for m in self.models:
            if m.name == name:
                return m
        return None


@dataclass
class Finding:
    severity: str  # error | warning
    path: str
    code: str
    message: str


@dataclass
class ValidationReport:
    findings: list[Finding] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == "error"]

    def to_json(self) -> list[dict]:
        return [vars(f) for f in self.findings]


# --- transform-step (de)normalization -------------------------------------

def normalize_step(doc, path: str) -> TransformStep:
    if not isinstance(doc, dict) or len(doc) != 1:
        raise SchemaError(path, "transform step must be a single-key object")
    kind, body = next(iter(doc.items()))
    if kind == "match":
        if not isinstance(body, str):
            raise SchemaError(path, "match takes a predicate string")
        return TransformStep("match", {"predicate": body})
    if kind == "derive":
        if isinstance(body, dict) and set(body) == {"name", "expr"}:
            return TransformStep("derive", {"name": body["name"], "expr": body["expr"]})
        if isinstance(body, dict) and len(body) == 1:
            name, expr = next(iter(body.items()))
            return TransformStep("derive", {"name": name, "expr": expr})
        raise SchemaError(path, "derive takes {name, expr}")
    if kind == "aggregate":
        if not isinstance(body, dict):
            raise SchemaError(path, "aggregate takes an object")
        args: dict = {}
        group_by = body.get("group_by")
        if isinstance(group_by, str):
            group_by = [group_by]
        if group_by is not None:
            args["group_by"] = list(group_by)
        if "bin" in body:
            binspec = body["bin"]
            if not isinstance(binspec, dict) or "field" not in binspec or \
                    not ({"bin_count", "bin_width"} & set(binspec)):
                raise SchemaError(path, "bin takes {field, bin_count | bin_width}")
            args["bin"] = dict(binspec)
        if not args:
            raise SchemaError(path, "aggregate needs group_by or bin")
        ops = body.get("ops", [{"op": "count"}])
        if isinstance(ops, dict):
            ops = [ops]
        normed = []
        for op in ops:
            op = dict(op)
            # "as" is an accepted alias for the output-name key
            if "as" in op:
                op["out"] = op.pop("as")
            normed.append(op)
        args["ops"] = normed
        return TransformStep("aggregate", args)
    if kind == "sort":
        if isinstance(body, str):
            return TransformStep("sort", {"by": body, "order": "asc"})
        if isinstance(body, dict) and "by" in body:
            args = {"by": body["by"], "order": body.get("order", "asc")}
            if body.get("limit") is not None:
                args["limit"] = int(body["limit"])
            return TransformStep("sort", args)
        raise SchemaError(path, "sort takes a field name or {by, order, limit}")
    if kind == "top":
        if not isinstance(body, dict) or "by" not in body or "limit" not in body:
            raise SchemaError(path, "top takes {by, limit}")
        return TransformStep("top", {"by": body["by"], "limit": int(body["limit"])})
    raise SchemaError(path, f"unknown transform step {kind!r}")


def serialize_step(step: TransformStep):
    if step.kind == "match":
        return {"match": step.args["predicate"]}
    if step.kind == "derive":
        return {"derive": {"name": step.args["name"], "expr": step.args["expr"]}}
    if step.kind == "aggregate":
        body = {}
        if "group_by" in step.args:
            body["group_by"] = list(step.args["group_by"])
        if "bin" in step.args:
            body["bin"] = dict(step.args["bin"])
        body["ops"] = [dict(op) for op in step.args["ops"]]
        return {"aggregate": body}
    if step.kind == "sort":
        return {"sort": dict(step.args)}
    return {"top": dict(step.args)}


def _step_list(doc, path: str) -> list[TransformStep]:
    if doc is None:
        return []
    if not isinstance(doc, list):
        raise SchemaError(path, "transform must be a list of steps")
    return [normalize_step(s, f"{path}/{i}") for i, s in enumerate(doc)]


# --- parsing ---------------------------------------------------------------

_TOP_KEYS = {
    "data", "analyses", "models", "view-layout", "view_layout",
    "visualizations", "interactions", "annotations", "$schema",
}


def parse_pipeline(document) -> PipelineSpec:
    """Parse a JSON text or already-decoded dict into a normalized spec."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecSyntaxError(str(exc), position=exc.pos) from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise SchemaError("/", "pipeline document must be an object")
    for key in doc:
        if key not in _TOP_KEYS:
            raise SchemaError(f"/{key}", "unknown top-level block")
    if "data" not in doc:
        raise SchemaError("/data", "missing")

    layout = _parse_layout(doc.get("view-layout", doc.get("view_layout")))
    spec = PipelineSpec(
        data=_parse_data(doc["data"]),
        analyses=_parse_analyses(doc.get("analyses")),
        models=_parse_models(doc.get("models")),
        view_layout=layout,
        visualizations=_parse_visualizations(doc.get("visualizations"), layout),
        interactions=_parse_interactions(doc.get("interactions"), layout),
        annotations=_parse_annotations(doc.get("annotations"), layout),
    )
    seen = set()
    for a in spec.analyses:
        if a.output_name in seen:
            raise SchemaError(f"/analyses/{a.output_name}", "duplicate analysis name")
        seen.add(a.output_name)
    seen = set()
    for m in spec.models:
        if m.name in seen:
            raise SchemaError(f"/models/{m.name}", "duplicate model name")
        seen.add(m.name)
    return spec


def _require(cond, path, message):
    if not cond:
        raise SchemaError(path, message)


def _parse_data(doc) -> DataSpec:
    _require(isinstance(doc, dict), "/data", "must be an object")
    _require("source" in doc, "/data/source", "missing")
    allowed = {"source", "format", "selection", "preprocessing", "transform"}
    for key in doc:
        if key not in allowed:
            raise SchemaError(f"/data/{key}", "unknown key")
    selection = doc.get("selection")
    if selection is not None:
        _require(isinstance(selection, dict), "/data/selection", "must be an object")
        for key in selection:
            _require(key in ("columns", "sample_n", "seed"),
                     f"/data/selection/{key}", "unknown key")
        if "sample_n" in selection and selection["sample_n"] is not None:
            _require(isinstance(selection["sample_n"], int) and selection["sample_n"] >= 1,
                     "/data/selection/sample_n", "must be a positive integer")
        selection = dict(selection)
    preprocessing = doc.get("preprocessing")
    if preprocessing is not None:
        _require(isinstance(preprocessing, dict), "/data/preprocessing", "must be an object")
        for key in preprocessing:
            _require(key in ("dropna", "encodings"),
                     f"/data/preprocessing/{key}", "unknown key")
        encodings = preprocessing.get("encodings", {})
        _require(isinstance(encodings, dict), "/data/preprocessing/encodings", "must be a map")
        for fld, enc in encodings.items():
            _require(enc in ("numerical", "onehot"),
                     f"/data/preprocessing/encodings/{fld}",
                     "encoding must be 'numerical' or 'onehot'")
        preprocessing = dict(preprocessing)
    return DataSpec(
        source=str(doc["source"]),
        format=doc.get("format"),
        selection=selection,
        preprocessing=preprocessing,
        transform=_step_list(doc.get("transform"), "/data/transform"),
    )


_ANALYSIS_KEYS = {"name", "output_name", "algorithm", "features", "scaling", "parameters"}


def _parse_one_analysis(name: str, body, path: str) -> AnalysisSpec:
    _require(isinstance(body, dict), path, "analysis must be an object")
    _require("algorithm" in body, f"{path}/algorithm", "missing")
    algorithm = _ALGORITHM_ALIASES.get(body["algorithm"], body["algorithm"])
    features = body.get("features") or []
    if isinstance(features, str):
        features = [features]
    scaling = body.get("scaling", "none")
    lo, hi = 0.0, 1.0
    if isinstance(scaling, dict):
        method = scaling.get("method")
        _require(method is not None, f"{path}/scaling", "scaling object needs a method")
        rng = scaling.get("range", [0.0, 1.0])
        _require(isinstance(rng, (list, tuple)) and len(rng) == 2,
                 f"{path}/scaling/range", "range must be [lo, hi]")
        lo, hi = float(rng[0]), float(rng[1])
        scaling = method
    parameters = dict(body.get("parameters", {}))
    for key, value in body.items():
        if key not in _ANALYSIS_KEYS:
            parameters[key] = value  # Fig-2 style inline parameters
    return AnalysisSpec(
        output_name=name,
        algorithm=str(algorithm),
        features=[str(f) for f in features],
        scaling=str(scaling),
        scaling_range=(lo, hi),
        parameters=parameters,
    )


def _parse_analyses(doc) -> list[AnalysisSpec]:
    if doc is None:
        return []
    out = []
    if isinstance(doc, dict):
        for name, body in doc.items():
            out.append(_parse_one_analysis(name, body, f"/analyses/{name}"))
        return out
    _require(isinstance(doc, list), "/analyses", "must be a map or list")
    for i, body in enumerate(doc):
        _require(isinstance(body, dict), f"/analyses/{i}", "must be an object")
        name = body.get("name", body.get("output_name"))
        _require(name, f"/analyses/{i}/name", "missing")
        out.append(_parse_one_analysis(str(name), body, f"/analyses/{name}"))
    return out


_MODEL_KEYS = {
    "name", "module", "method", "training_data", "training-data", "target",
    "features", "parameters", "param_grid", "scoring", "persistence", "load_from",
}


def _parse_models(doc) -> list[ModelSpec]:
    if doc is None:
        return []
    if isinstance(doc, dict):
        doc = [{"name": k, **v} for k, v in doc.items()]
    _require(isinstance(doc, list), "/models", "must be a map or list")
    out = []
    for i, body in enumerate(doc):
        path = f"/models/{body.get('name', i)}"
        _require(isinstance(body, dict), path, "must be an object")
        # keys outside the schema are method parameters written inline
        parameters = {k: v for k, v in body.items() if k not in _MODEL_KEYS}
        parameters.update(body.get("parameters", {}))
        _require("name" in body, f"{path}/name", "missing")
        _require("method" in body or "load_from" in body,
                 f"{path}/method", "missing (or give load_from)")
        features = body.get("features") or []
        if isinstance(features, str):
            features = [features]
        out.append(ModelSpec(
            name=str(body["name"]),
            method=str(body.get("method", "")),
            module=str(body.get("module", "builtin")),
            training_data=str(body.get("training_data", body.get("training-data", "$data"))),
            target=str(body.get("target", "")),
            features=[str(f) for f in features],
            parameters=parameters,
            param_grid=dict(body.get("param_grid", {})),
            scoring=str(body.get("scoring", "r2")),
            persistence=body.get("persistence"),
            load_from=body.get("load_from"),
        ))
    return out


def _parse_layout(doc) -> Layout | None:
    if doc is None:
        return None
    _require(isinstance(doc, dict), "/view-layout", "must be an object")
    for key in doc:
        _require(key in ("rows", "cols", "padding", "width", "height"),
                 f"/view-layout/{key}", "unknown key")
    _require("rows" in doc and "cols" in doc, "/view-layout", "needs rows and cols")
    return Layout(
        rows=int(doc["rows"]),
        cols=int(doc["cols"]),
        padding=int(doc.get("padding", 10)),
        width=int(doc.get("width", 960)),
        height=int(doc.get("height", 600)),
    )


def _view_index(value, layout: Layout | None, path: str) -> int:
    if isinstance(value, bool):
        raise SchemaError(path, "view id must be an index or [row, col]")
    if isinstance(value, int):
        return value
    if isinstance(value, (list, tuple)) and len(value) == 2:
        _require(layout is not None, path, "[row, col] addressing needs view-layout")
        r, c = int(value[0]), int(value[1])
        return r * layout.cols + c
    raise SchemaError(path, "view id must be an index or [row, col]")


_VIEW_KEYS = {"view", "view_id", "mark", "mark_type", "transform", "encodings",
              "layers", "facet_group"}


def _norm_channel(value, path: str):
    # {"field": name} and {"value": constant} are accepted idioms; the
    # canonical form binds the bare name or constant.
    if isinstance(value, dict):
        extra = set(value) - {"field", "value"}
        _require(not extra, path, "encoding takes field or value")
        if "field" in value:
            _require(isinstance(value["field"], str), path, "field must be a name")
            return value["field"]
        _require("value" in value, path, "encoding takes field or value")
        return value["value"]
    if isinstance(value, list):
        return [_norm_channel(v, path) for v in value]
    return value


def _parse_view(doc, layout, path: str, default_id: int = 0) -> ViewSpec:
    _require(isinstance(doc, dict), path, "view must be an object")
    raw_id = doc.get("view", doc.get("view_id", default_id))
    view_id = _view_index(raw_id, layout, f"{path}/view")
    mark = doc.get("mark", doc.get("mark_type", "circle"))
    mark = _MARK_ALIASES.get(mark, mark)
    encodings = dict(doc.get("encodings", {}))
    for key, value in doc.items():
        if key in _VIEW_KEYS:
            continue
        if key in CHANNELS:
            encodings[key] = value
        else:
            raise SchemaError(f"{path}/{key}", "unknown view key")
    for channel in encodings:
        _require(channel in CHANNELS, f"{path}/encodings/{channel}", "unknown channel")
    encodings = {
        ch: _norm_channel(v, f"{path}/encodings/{ch}") for ch, v in encodings.items()
    }
    layers = [
        _parse_view(layer, layout, f"{path}/layers/{i}", default_id=view_id)
        for i, layer in enumerate(doc.get("layers", []))
    ]
    facet_group = doc.get("facet_group")
    if facet_group is not None:
        facet_group = (int(facet_group[0]), int(facet_group[1]))
    return ViewSpec(
        view_id=view_id,
        mark_type=str(mark),
        transform=_step_list(doc.get("transform"), f"{path}/transform"),
        encodings=encodings,
        layers=layers,
        facet_group=facet_group,
    )


def _parse_visualizations(doc, layout) -> list:
    if doc is None:
        return []
    if isinstance(doc, dict):
        doc = [doc]
    _require(isinstance(doc, list), "/visualizations", "must be a list")
    out = []
    for i, body in enumerate(doc):
        path = f"/visualizations/{i}"
        _require(isinstance(body, dict), path, "must be an object")
        axis = None
        select = None
        if "facet" in body:
            facet = body["facet"]
            _require(isinstance(facet, dict) and "axis" in facet and "select" in facet,
                     f"{path}/facet", "facet needs axis and select")
            axis, select = facet["axis"], facet["select"]
            template_doc = facet.get("template", {k: v for k, v in body.items() if k != "facet"})
        elif "$rows" in body or "$cols" in body:
            axis = "$rows" if "$rows" in body else "$cols"
            select = body[axis]
            template_doc = body.get("template",
                                    {k: v for k, v in body.items() if k not in ("$rows", "$cols")})
        if axis is not None:
            _require(axis in ("$rows", "$cols"), f"{path}/facet/axis", "axis must be $rows or $cols")
            if isinstance(select, dict):
                _require("model" in select and "attribute" in select,
                         f"{path}/facet/select", "selector needs model and attribute")
                select = dict(select)
            else:
                _require(isinstance(select, list), f"{path}/facet/select",
                         "select must be a value list or a model-attribute selector")
                select = list(select)
            template = _parse_view(template_doc, layout, f"{path}/template")
            out.append(FacetSpec(axis=axis, select=select, template=template))
        else:
            out.append(_parse_view(body, layout, path, default_id=i))
    return out


def _parse_interactions(doc, layout) -> list[InteractionSpec]:
    if doc is None:
        return []
    _require(isinstance(doc, list), "/interactions", "must be a list")
    out = []
    for i, body in enumerate(doc):
        path = f"/interactions/{i}"
        _require(isinstance(body, dict), path, "must be an object")
        event = body.get("event")
        _require(event in ("zoom", "pan", "click", "hover", "brush"),
                 f"{path}/event", "unknown event")
        _require("source" in body or "source_view" in body, f"{path}/source", "missing")
        src = _view_index(body.get("source", body.get("source_view")), layout, f"{path}/source")
        targets = body.get("targets", [])
        out.append(InteractionSpec(
            event=event,
            source_view=src,
            targets=[_view_index(t, layout, f"{path}/targets/{j}") for j, t in enumerate(targets)],
            effect=body.get("effect", "filter"),
        ))
    return out


def _parse_annotations(doc, layout) -> list[AnnotationSpec]:
    if doc is None:
        return []
    _require(isinstance(doc, list), "/annotations", "must be a list")
    out = []
    for i, body in enumerate(doc):
        path = f"/annotations/{i}"
        _require(isinstance(body, dict), path, "must be an object")
        kind = body.get("kind")
        _require(kind in ("trendline", "label", "rule"), f"{path}/kind", "unknown kind")
        _require("view" in body or "view_id" in body, f"{path}/view", "missing")
        ref = body.get("ref", body.get("data_ref"))
        if ref is not None:
            if isinstance(ref, str):
                ref = {"name": ref}
            _require(isinstance(ref, dict) and "name" in ref, f"{path}/ref",
                     "ref must name an analysis output")
            ref = {"name": ref["name"], **({"filter": ref["filter"]} if "filter" in ref else {})}
        values = body.get("values")
        out.append(AnnotationSpec(
            view_id=_view_index(body.get("view", body.get("view_id")), layout, f"{path}/view"),
            kind=kind,
            data_ref=ref,
            text_template=body.get("template", body.get("text_template")),
            values=list(values) if values is not None else None,
        ))
    return out


# --- serialization ---------------------------------------------------------

def serialize_pipeline(spec: PipelineSpec) -> dict:
    """Canonical JSON-safe document; parse(serialize(s)) == s."""
    doc: dict = {"data": _ser_data(spec.data)}
    if spec.analyses:
        doc["analyses"] = [
            {
                "name": a.output_name,
                "algorithm": a.algorithm,
                **({"features": list(a.features)} if a.features else {}),
                **(_ser_scaling(a)),
                **({"parameters": dict(a.parameters)} if a.parameters else {}),
            }
            for a in spec.analyses
        ]
    if spec.models:
        doc["models"] = [_ser_model(m) for m in spec.models]
    if spec.view_layout:
        lay = spec.view_layout
        doc["view-layout"] = {
            "rows": lay.rows, "cols": lay.cols, "padding": lay.padding,
            "width": lay.width, "height": lay.height,
        }
    if spec.visualizations:
        doc["visualizations"] = [
            _ser_facet(v) if isinstance(v, FacetSpec) else _ser_view(v)
            for v in spec.visualizations
        ]
    if spec.interactions:
        doc["interactions"] = [
            {
                "event": i.event, "source": i.source_view,
                **({"targets": list(i.targets)} if i.targets else {}),
                "effect": i.effect,
            }
            for i in spec.interactions
        ]
    if spec.annotations:
        doc["annotations"] = [
            {
                "view": a.view_id, "kind": a.kind,
                **({"ref": dict(a.data_ref)} if a.data_ref else {}),
                **({"template": a.text_template} if a.text_template else {}),
                **({"values": list(a.values)} if a.values is not None else {}),
            }
            for a in spec.annotations
        ]
    return doc


def _ser_data(d: DataSpec) -> dict:
    return {
        "source": d.source,
        **({"format": d.format} if d.format else {}),
        **({"selection": dict(d.selection)} if d.selection else {}),
        **({"preprocessing": dict(d.preprocessing)} if d.preprocessing else {}),
        **({"transform": [serialize_step(s) for s in d.transform]} if d.transform else {}),
    }


def _ser_scaling(a: AnalysisSpec) -> dict:
    if a.scaling == "none":
        return {}
    if a.scaling == "minmax" and a.scaling_range != (0.0, 1.0):
        return {"scaling": {"method": "minmax", "range": list(a.scaling_range)}}
    return {"scaling": a.scaling}


def _ser_model(m: ModelSpec) -> dict:
    return {
        "name": m.name,
        **({"method": m.method} if m.method else {}),
        **({"module": m.module} if m.module != "builtin" else {}),
        **({"training_data": m.training_data} if m.training_data != "$data" else {}),
        **({"target": m.target} if m.target else {}),
        **({"features": list(m.features)} if m.features else {}),
        **({"parameters": dict(m.parameters)} if m.parameters else {}),
        **({"param_grid": {k: list(v) for k, v in m.param_grid.items()}} if m.param_grid else {}),
        "scoring": m.scoring,
        **({"persistence": m.persistence} if m.persistence else {}),
        **({"load_from": m.load_from} if m.load_from else {}),
    }


def _ser_view(v: ViewSpec) -> dict:
    return {
        "view": v.view_id,
        "mark": v.mark_type,
        **({"transform": [serialize_step(s) for s in v.transform]} if v.transform else {}),
        **({"encodings": dict(v.encodings)} if v.encodings else {}),
        **({"layers": [_ser_view(l) for l in v.layers]} if v.layers else {}),
        **({"facet_group": list(v.facet_group)} if v.facet_group else {}),
    }


def _ser_facet(f: FacetSpec) -> dict:
    return {
        "facet": {
            "axis": f.axis,
            "select": copy.deepcopy(f.select),
            "template": _ser_view(f.template),
        }
    }


# --- validation ------------------------------------------------------------

def _known_columns(spec: PipelineSpec, input_columns, catalog: Catalog):
    """(set of resolvable names, or None when the input schema is unknown)."""
    if input_columns is None:
        return None
    names = set(input_columns)
    for step in spec.data.transform:
        names.update(output_columns(step.kind, step.args))
    for a in spec.analyses:
        entry = catalog.algorithm(a.algorithm)
        count = entry.n_output_columns(a.parameters) if entry else 1
        names.add(a.output_name)
        if count > 1:
            names.update(f"{a.output_name}.{i}" for i in range(count))
    for m in spec.models:
        names.add(f"{m.name}.prediction")
    return names


def _fields_of_predicate(text):
    try:
        return predicate_fields(parse_predicate(text))
    except Exception:
        return []


def validate_pipeline(
    spec: PipelineSpec,
    catalog: Catalog | None = None,
    input_columns=None,
) -> ValidationReport:
    """Static checks; findings of severity=error block execution.

    Column-level reference checks run only when `input_columns` (the loaded
    frame's schema) is supplied; without it, unknowable references are skipped
    rather than guessed at.
    """
    catalog = catalog or DEFAULT_CATALOG
    findings: list[Finding] = []

    def err(path, code, message):
        findings.append(Finding("error", path, code, message))

    def warn(path, code, message):
        findings.append(Finding("warning", path, code, message))

    known = _known_columns(spec, input_columns, catalog)
    onehot_sources = {
        fld for fld, enc in ((spec.data.preprocessing or {}).get("encodings") or {}).items()
        if enc == "onehot"
    }

    def check_field(name, path):
        if known is None or name in known or name == "$select":
            return
        if any(name.startswith(f"{src}=") for src in onehot_sources):
            return  # one-hot indicator, concrete labels known only at runtime
        if "." in name and name.split(".", 1)[0] in known:
            return
        err(path, "UnresolvedReference", f"no column or output named {name!r}")

    # analyses
    if input_columns is not None:
        for a in spec.analyses:
            if a.output_name in set(input_columns):
                err(f"/analyses/{a.output_name}", "DuplicateName",
                    "analysis output collides with an input column")
    for a in spec.analyses:
        path = f"/analyses/{a.output_name}"
        entry = catalog.algorithm(a.algorithm)
        if entry is None:
            err(f"{path}/algorithm", "UnknownAlgorithm",
                f"algorithm {a.algorithm!r} is not registered")
        else:
            for key, value in a.parameters.items():
                info = entry.params.get(key)
                if info is None:
                    warn(f"{path}/parameters/{key}", "UnknownParameter",
                         f"{a.algorithm} has no parameter {key!r}")
                    continue
                try:
                    info.coerce(value)
                except TypeError as exc:
                    err(f"{path}/parameters/{key}", "TypeMismatch", str(exc))
        if a.scaling not in catalog.scaling_methods:
            err(f"{path}/scaling", "BadValue", f"unknown scaling {a.scaling!r}")
        for f in a.features:
            check_field(f, f"{path}/features")
        if a.algorithm == "ModelApply":
            model_name = a.parameters.get("model")
            if not model_name or spec.model(str(model_name)) is None:
                err(f"{path}/parameters/model", "UnresolvedReference",
                    f"ModelApply references undeclared model {model_name!r}")

    # models
    for m in spec.models:
        path = f"/models/{m.name}"
        if m.load_from is None and m.method not in catalog.model_methods:
            err(f"{path}/method", "UnknownAlgorithm", f"unknown method {m.method!r}")
        if m.scoring not in catalog.scoring_metrics:
            err(f"{path}/scoring", "BadValue", f"unknown metric {m.scoring!r}")
        if m.target and m.target in m.features:
            err(f"{path}/features", "BadValue", "target must not be a feature")
        params_schema = catalog.model_methods.get(m.method, {})
        for key in m.param_grid:
            if m.method == "RandomForestRegressor" and key not in params_schema:
                err(f"{path}/param_grid/{key}", "UnknownParameter",
                    f"{m.method} has no parameter {key!r}")
        for key, values in m.param_grid.items():
            if not isinstance(values, list) or not values:
                err(f"{path}/param_grid/{key}", "BadValue", "grid values must be a non-empty list")
        if m.training_data == "$data" and input_columns is not None and m.target:
            check_field(m.target, f"{path}/target")

    # layout and views
    layout = spec.view_layout
    slots = layout.rows * layout.cols if layout else None
    expansion = 0
    for i, item in enumerate(spec.visualizations):
        if isinstance(item, FacetSpec):
            if isinstance(item.select, list):
                expansion += len(item.select)
            else:
                expansion += int(item.select.get("top_k", 1))
                model_name = item.select.get("model")
                if model_name and spec.model(str(model_name)) is None:
                    err(f"/visualizations/{i}/facet/select/model", "UnresolvedReference",
                        f"selector references undeclared model {model_name!r}")
            views = [item.template]
        else:
            expansion += 1
            views = [item]
            if slots is not None and item.view_id >= slots:
                err(f"/visualizations/{i}/view", "LayoutOverflow",
                    f"view id {item.view_id} outside {layout.rows}x{layout.cols} layout")
        for view in views:
            vp = f"/visualizations/{i}"
            if view.mark_type not in MARK_TYPES and catalog.algorithm(view.mark_type) is None:
                # plugins may claim it at compile time; only warn here
                warn(f"{vp}/mark", "UnknownMark",
                     f"mark {view.mark_type!r} needs a registered plugin")
            local = set()
            for step in view.transform:
                local.update(output_columns(step.kind, step.args))
            for channel, fields in view.encodings.items():
                for f in (fields if isinstance(fields, list) else [fields]):
                    if isinstance(f, str) and f not in local:
                        check_field(f, f"{vp}/encodings/{channel}")
    if slots is not None and expansion > slots:
        err("/view-layout", "FacetOverflow",
            f"{expansion} views exceed {slots} layout slots")

    # interactions and annotations reference real views
    ids = {v.view_id for v in spec.concrete_views()}
    ids.update(f.template.view_id for f in spec.facets())
    for i, inter in enumerate(spec.interactions):
        for vid in [inter.source_view, *inter.targets]:
            if ids and vid not in ids and (slots is None or vid >= slots):
                err(f"/interactions/{i}", "UnknownView", f"no view {vid}")
    analysis_names = {a.output_name for a in spec.analyses}
    for i, ann in enumerate(spec.annotations):
        if ann.data_ref and ann.data_ref["name"] not in analysis_names:
            err(f"/annotations/{i}/ref", "UnresolvedReference",
                f"no analysis output {ann.data_ref['name']!r}")
    return ValidationReport(findings)


# --- facet expansion -------------------------------------------------------

def _substitute(value, replacement):
    if isinstance(value, str):
        if value == "$select":
            return replacement
        if "$select" in value:
            return value.replace("$select", str(replacement))
        return value
    if isinstance(value, list):
        return [_substitute(v, replacement) for v in value]
    if isinstance(value, dict):
        return {k: _substitute(v, replacement) for k, v in value.items()}
    return value


def expand_facets(spec: PipelineSpec, models: dict | None = None) -> PipelineSpec:
    """Replace each FacetSpec with its concrete views; idempotent."""
    from .analytics import rank_model_attributes

    if not spec.facets():
        return spec
    models = models or {}
    layout = spec.view_layout
    slots = layout.rows * layout.cols if layout else None
    out: list[ViewSpec] = list(spec.concrete_views())
    for facet_index, facet in enumerate(spec.facets()):
        if isinstance(facet.select, dict):
            sel = facet.select
            model = models.get(str(sel["model"]))
            if model is None:
                raise UnresolvedReference(str(sel["model"]), "/facet/select/model")
            ranked = rank_model_attributes(model, sel["attribute"], sel.get("top_k"))
            values = [name for name, _ in ranked]
        else:
            values = list(facet.select)
        step = 1 if facet.axis == "$cols" else (layout.cols if layout else 1)
        anchor = facet.template.view_id
        template_doc = _ser_view(facet.template)
        template_doc.pop("facet_group", None)
        for pos, value in enumerate(values):
            vid = anchor + pos * step
            if slots is not None and vid >= slots:
                raise FacetOverflow(
                    f"facet expansion to view {vid} exceeds "
                    f"{layout.rows}x{layout.cols} layout"
                )
            doc = _substitute(copy.deepcopy(template_doc), value)
            doc["view"] = vid
            doc["facet_group"] = [facet_index, pos]
            out.append(_parse_view(doc, layout, f"/facet/{facet_index}/{pos}"))
    out.sort(key=lambda v: v.view_id)
    seen = set()
    for v in out:
        if v.view_id in seen:
            raise FacetOverflow(f"facet expansion collides at view {v.view_id}")
        seen.add(v.view_id)
    return PipelineSpec(
        data=spec.data,
        analyses=spec.analyses,
        models=spec.models,
        view_layout=spec.view_layout,
        visualizations=out,
        interactions=spec.interactions,
        annotations=spec.annotations,
    )


def effective_layout(spec: PipelineSpec) -> Layout:
    """Declared layout, or a single row sized to the concrete view count."""
    if spec.view_layout is not None:
        return spec.view_layout
    n = max(1, len(spec.concrete_views()))
    return Layout(rows=1, cols=n)


# --- symbol resolution -----------------------------------------------------

def resolve_symbols(
    spec: PipelineSpec,
    input_columns,
    catalog: Catalog | None = None,
) -> dict[str, dict]:
    """Map every referenced field name to its producer.

    Producers: input columns, data-transform outputs, analysis outputs
    (multi-column ones expose ``name.0`` … components), model predictions,
    and view-local transform outputs (producer  ``view:<id>``).
    """
    catalog = catalog or DEFAULT_CATALOG
    table: dict[str, dict] = {}
    for name in input_columns:
        table[name] = {"kind": "input", "producer": "load"}
    for step in spec.data.transform:
        for name in output_columns(step.kind, step.args):
            table[name] = {"kind": "derived", "producer": "transform"}
    for a in spec.analyses:
        entry = catalog.algorithm(a.algorithm)
        count = entry.n_output_columns(a.parameters) if entry else 1
        if count == 1:
            table[a.output_name] = {"kind": "analysis", "producer": a.output_name}
        else:
            comps = [f"{a.output_name}.{i}" for i in range(count)]
            table[a.output_name] = {
                "kind": "analysis", "producer": a.output_name, "components": comps,
            }
            for comp in comps:
                table[comp] = {"kind": "analysis", "producer": a.output_name}
    for m in spec.models:
        table[f"{m.name}.prediction"] = {"kind": "model", "producer": m.name}
        table[f"{m.name}.coefficients"] = {"kind": "model-attribute", "producer": m.name}
        table[f"{m.name}.feature_importances"] = {"kind": "model-attribute", "producer": m.name}
    for view in spec.concrete_views():
        for step in view.transform:
            for name in output_columns(step.kind, step.args):
                table.setdefault(name, {"kind": "derived", "producer": f"view:{view.view_id}"})

    # verify every consumption site resolves
    def need(name, path):
        if name == "$select" or (isinstance(name, str) and "$select" in name):
            return
        if name not in table:
            raise UnresolvedReference(name, path)

    for a in spec.analyses:
        for f in a.features:
            need(f, f"/analyses/{a.output_name}/features")
    views = list(spec.concrete_views()) + [f.template for f in spec.facets()]
    for view in views:
        local = set()
        consumed = []
        for step in view.transform:
            if step.kind == "match":
                consumed.extend(_fields_of_predicate(step.args["predicate"]))
            elif step.kind == "derive":
                try:
                    consumed.extend(expression_fields(parse_expression(step.args["expr"])))
                except Exception:
                    pass
            elif step.kind == "aggregate":
                consumed.extend(step.args.get("group_by", []))
                if "bin" in step.args:
                    consumed.append(step.args["bin"]["field"])
                consumed.extend(
                    op["field"] for op in step.args["ops"] if op.get("field")
                )
            else:
                consumed.append(step.args["by"])
            local.update(output_columns(step.kind, step.args))
        for channel, fields in view.encodings.items():
            for f in (fields if isinstance(fields, list) else [fields]):
                if isinstance(f, str) and f not in local:
                    consumed.append(f)
        for name in consumed:
            if name not in local:
                need(name, f"/visualizations/{view.view_id}")
    return table


# --- parameter paths -------------------------------------------------------

def _split_path(path: str) -> list[str]:
    parts = [p for p in path.split("/") if p]
    if not parts:
        raise UnknownPath(path)
    return parts


def _named_entry(items, key_field, name, path):
    for i, item in enumerate(items):
        if str(item.get(key_field)) == name:
            return i
    raise UnknownPath(path)


# Containers that may be absent from a canonical doc because they were empty,
# yet remain addressable: setting /analyses/X/parameters/k must work even when
# the analysis currently runs on defaults.
_OPEN_CONTAINERS = {"parameters", "param_grid", "encodings", "selection", "preprocessing"}


def _navigate(doc: dict, parts: list[str], full_path: str, create: bool):
    """Walk to the parent of the addressed leaf; names index analyses/models
    by name and visualizations by view id."""
    node = doc
    i = 0
    while i < len(parts) - 1:
        part = parts[i]
        if isinstance(node, dict):
            if part in ("analyses", "models") and part in node:
                idx = _named_entry(node[part], "name", parts[i + 1], full_path)
                node = node[part][idx]
                i += 2
                continue
            if part == "visualizations" and "visualizations" in node:
                target = parts[i + 1]
                found = None
                for entry in node["visualizations"]:
                    if "facet" in entry:
                        tpl = entry["facet"]["template"]
                        if str(tpl.get("view")) == target:
                            found = tpl
                            break
                    elif str(entry.get("view")) == target:
                        found = entry
                        break
                if found is None:
                    raise UnknownPath(full_path)
                node = found
                i += 2
                continue
            if part not in node:
                if part in _OPEN_CONTAINERS:
                    if create:
                        node[part] = {}
                        node = node[part]
                    else:
                        node = {}  # detached: reads see an empty map
                    i += 1
                    continue
                raise UnknownPath(full_path)
            node = node[part]
            i += 1
        elif isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise UnknownPath(full_path) from None
            i += 1
        else:
            raise UnknownPath(full_path)
    return node, parts[-1]


def get_param(spec: PipelineSpec, path: str):
    """Read a leaf of the canonical document; defaulted parameters read None."""
    doc = serialize_pipeline(spec)
    parts = _split_path(path)
    node, leaf = _navigate(doc, parts, path, create=False)
    if isinstance(node, dict):
        if leaf in node:
            return node[leaf]
        parent = parts[-2] if len(parts) > 1 else ""
        if parent in _OPEN_CONTAINERS or leaf in _OPEN_CONTAINERS:
            return None
        raise UnknownPath(path)
    if isinstance(node, list):
        try:
            return node[int(leaf)]
        except (ValueError, IndexError):
            raise UnknownPath(path) from None
    raise UnknownPath(path)


def set_param(spec: PipelineSpec, path: str, value) -> PipelineSpec:
    """New spec with the addressed leaf replaced; the input is untouched.

    The edited document goes back through parse_pipeline, so structural
    mistakes surface as the same SchemaError a hand-written document gets.
    """
    doc = serialize_pipeline(spec)
    parts = _split_path(path)
    node, leaf = _navigate(doc, parts, path, create=True)
    if isinstance(node, dict):
        node[leaf] = value
    elif isinstance(node, list):
        try:
            node[int(leaf)] = value
        except (ValueError, IndexError):
            raise UnknownPath(path) from None
    else:
        raise UnknownPath(path)
    return parse_pipeline(doc)
