"""Scene compilation: concrete views plus computed frames become render-ready
scene documents with resolved scales, channel bindings, annotations, and
interaction bindings.

A scene carries mark *rules* and a data reference instead of per-row mark
instances: the client joins rules against columnar data it fetches (or finds
inline when a view-local transform reshaped the rows). Identical (view, frame)
inputs compile to identical scene bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicatePlugin,
    IncompatibleChannel,
    LayoutOverflow,
    MissingRequiredChannel,
    UnknownField,
    UnknownView,
    UnresolvedAnnotationRef,
)
from .frame import CATEGORICAL, INT64, DataFrame
from .speclang import (
    AnnotationSpec,
    Layout,
    PipelineSpec,
    ViewSpec,
    effective_layout,
)
from .transforms import apply_steps, evaluate_predicate, parse_predicate

SCENE_FORMAT_VERSION = 1

# Categorical color cycle: ten base colors, then ten lighter companions so up
# to twenty categories stay distinguishable before the cycle repeats.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
_PALETTE_LIGHT = (
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
    "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
)
_RAMP = ("#deebf7", "#08519c")  # sequential ramp for numeric color

_MARK_CHANNELS = {
    "circle": ("x", "y", "color", "size", "opacity"),
    "rect": ("x", "y", "color", "opacity", "width", "height"),
    "line": ("x", "y", "color", "opacity"),
    "pcp-line": ("dims", "color", "opacity"),
    "text": ("x", "y", "text", "color", "opacity"),
}


def palette_color(index: int) -> str:
    cycle = PALETTE + _PALETTE_LIGHT
    return cycle[index % len(cycle)]


# --- plugin registry -------------------------------------------------------

@dataclass(frozen=True)
class PluginEntry:
    key: str
    condition: str  # mark_type value that routes a view to this plugin
    required_channels: tuple = ()


class PluginRegistry:
    """Custom chart templates keyed by the mark-type value that selects them."""

    def __init__(self):
        self._by_key: dict[str, PluginEntry] = {}
        self._by_condition: dict[str, PluginEntry] = {}

    def register_plugin(self, key: str, condition: str, required_channels=()) -> PluginEntry:
        if key in self._by_key:
            raise DuplicatePlugin(f"plugin {key!r} already registered")
        if condition in self._by_condition:
            raise DuplicatePlugin(f"mark {condition!r} already claimed by "
                                  f"{self._by_condition[condition].key!r}")
        entry = PluginEntry(key, condition, tuple(required_channels))
        self._by_key[key] = entry
        self._by_condition[condition] = entry
        return entry

    def find(self, mark_type: str) -> PluginEntry | None:
        return self._by_condition.get(mark_type)

    def keys(self) -> list[str]:
        return sorted(self._by_key)


DEFAULT_PLUGINS = PluginRegistry()


def register_plugin(key: str, condition: str, required_channels=()) -> PluginEntry:
    """Register into the process-wide default registry."""
    return DEFAULT_PLUGINS.register_plugin(key, condition, required_channels)


# --- layout ----------------------------------------------------------------

def layout_slots(layout: Layout) -> list[dict]:
    """Viewport rectangle for every grid slot, row-major."""
    pad = layout.padding
    cell_w = (layout.width - pad * (layout.cols + 1)) / layout.cols
    cell_h = (layout.height - pad * (layout.rows + 1)) / layout.rows
    slots = []
    for r in range(layout.rows):
        for c in range(layout.cols):
            slots.append({
                "x": round(pad + c * (cell_w + pad), 6),
                "y": round(pad + r * (cell_h + pad), 6),
                "width": round(cell_w, 6),
                "height": round(cell_h, 6),
            })
    return slots


def layout_views(layout: Layout, view_ids) -> dict[int, dict]:
    """Slot viewports for the given view ids; ids must fit the grid."""
    slots = layout_slots(layout)
    out = {}
    for vid in view_ids:
        if vid < 0 or vid >= len(slots):
            raise LayoutOverflow(
                f"view {vid} does not fit a {layout.rows}x{layout.cols} layout"
            )
        out[vid] = slots[vid]
    return out


# --- scale derivation ------------------------------------------------------

def _finite(col) -> np.ndarray:
    vals = col.values.astype(np.float64, copy=False)
    mask = np.isfinite(vals)
    if col.valid is not None:
        mask &= col.valid
    return vals[mask]


def _linear_domain(vals: np.ndarray, include_zero: bool = False) -> list[float]:
    if len(vals) == 0:
        return [0.0, 1.0]
    lo, hi = float(vals.min()), float(vals.max())
    if include_zero:
        lo, hi = min(lo, 0.0), max(hi, 0.0)
    if lo == hi:
        return [lo - 0.5, hi + 0.5]  # degenerate extent widened
    return [lo, hi]


def _ordinal_domain(col) -> list:
    if col.dtype == CATEGORICAL:
        if not col.dictionary:
            return []
        present = set(_present_codes(col))
        return [label for code, label in enumerate(col.dictionary) if code in present]
    vals = _finite(col)
    return [int(v) for v in np.unique(vals)] if len(vals) else []


def _present_codes(col):
    if col.valid is None:
        return np.unique(col.values)
    return np.unique(col.values[col.valid])


def _is_ordinal(col) -> bool:
    return col.dtype in (CATEGORICAL, INT64)


class _ScaleSet:
    def __init__(self):
        self.scales: list[dict] = []

    def add(self, scale_id, kind, domain, rng, nice=False):
        self.scales.append({
            "id": scale_id, "kind": kind, "domain": domain,
            "range": list(rng), "nice": bool(nice),
        })

    def domain_of(self, scale_id):
        for s in self.scales:
            if s["id"] == scale_id:
                return s["domain"]
        return None


def _positional_scale(scales, scale_id, cols, viewport, mark_type, axis):
    """One linear or band scale for an x/y channel over 1+ columns (layers)."""
    rng = [0.0, viewport["width"]] if axis == "x" else [viewport["height"], 0.0]
    if any(c.dtype == CATEGORICAL for c in cols) or (
            mark_type == "rect" and axis == "x" and all(_is_ordinal(c) for c in cols)):
        domain: list = []
        seen = set()
        for col in cols:
            for v in _ordinal_domain(col):
                if v not in seen:
                    seen.add(v)
                    domain.append(v)
        domain = sorted(domain, key=lambda v: (isinstance(v, str), v))
        scales.add(scale_id, "band", domain, [0.0, viewport["width"]] if axis == "x"
                   else [0.0, viewport["height"]])
        return
    vals = np.concatenate([_finite(c) for c in cols]) if cols else np.empty(0)
    include_zero = mark_type == "rect" and axis == "y"  # bars grow from zero
    scales.add(scale_id, "linear", _linear_domain(vals, include_zero), rng)


def _color_scale(scales, col, viewport):
    if _is_ordinal(col):
        domain = _ordinal_domain(col)
        scales.add("color", "ordinal-color", domain,
                   [palette_color(i) for i in range(len(domain))])
    else:
        scales.add("color", "linear", _linear_domain(_finite(col)), _RAMP)


# --- view compilation ------------------------------------------------------

def apply_view_transforms(view: ViewSpec, frame: DataFrame) -> DataFrame:
    return apply_steps(frame, view.transform) if view.transform else frame


def _channel_field(view: ViewSpec, channel: str):
    value = view.encodings.get(channel)
    if isinstance(value, bool):
        return None
    return value


def _check_channels(view: ViewSpec, frame: DataFrame):
    allowed = _MARK_CHANNELS.get(view.mark_type)
    if allowed is None:
        raise IncompatibleChannel(
            f"mark {view.mark_type!r} has no builtin renderer and no registered "
            f"plugin claims it"
        )
    for channel, value in view.encodings.items():
        if channel not in allowed:
            raise IncompatibleChannel(
                f"channel {channel!r} is not valid on mark {view.mark_type!r}"
            )
        fields = value if isinstance(value, list) else [value]
        for f in fields:
            if isinstance(f, str) and f not in frame:
                raise UnknownField(f, view.view_id)


def compile_view(
    view: ViewSpec,
    frame: DataFrame,
    viewport: dict,
    plugins: PluginRegistry | None = None,
    y_domain: list | None = None,
) -> dict:
    """Compile one concrete view against the computed frame.

    `y_domain` overrides the derived linear y domain; facet siblings pass the
    union of their extents so side-by-side views stay comparable.
    """
    plugins = plugins if plugins is not None else DEFAULT_PLUGINS
    local = apply_view_transforms(view, frame)

    plugin = plugins.find(view.mark_type)
    if plugin is not None:
        for channel in plugin.required_channels:
            if channel not in view.encodings:
                raise MissingRequiredChannel(
                    f"plugin {plugin.key!r} requires channel {channel!r}"
                )
        for channel, value in view.encodings.items():
            fields = value if isinstance(value, list) else [value]
            for f in fields:
                if isinstance(f, str) and f not in local:
                    raise UnknownField(f, view.view_id)
        needed = _bound_fields(view, local)
        return {
            "p6scene_version": SCENE_FORMAT_VERSION,
            "view_id": view.view_id,
            "viewport": dict(viewport),
            "mark_type": view.mark_type,
            "plugin": {
                "key": plugin.key,
                "data": {name: local.column(name).to_list() for name in needed}
                if needed else local.to_dict(),
                "view": {"viewport": dict(viewport), "encodings": dict(view.encodings)},
            },
            "channels": {},
            "scales": [],
            "data_ref": {"source": "inline", "columns": needed or local.names},
            "annotations": [],
            "interactions": [],
        }

    if view.mark_type not in _MARK_CHANNELS:
        raise IncompatibleChannel(
            f"mark {view.mark_type!r} has no builtin renderer and no registered "
            f"plugin claims it"
        )
    _check_channels(view, local)
    layer_frames = [(view, local)]
    for layer in view.layers:
        lf = apply_view_transforms(layer, frame)
        _check_channels(layer, lf)
        layer_frames.append((layer, lf))

    scales = _ScaleSet()
    channels: dict = {}
    for axis in ("x", "y"):
        cols = [
            lf.column(_channel_field(v, axis))
            for v, lf in layer_frames
            if isinstance(_channel_field(v, axis), str)
        ]
        if cols:
            _positional_scale(scales, axis, cols, viewport, view.mark_type, axis)
            if y_domain is not None and axis == "y":
                for s in scales.scales:
                    if s["id"] == "y" and s["kind"] == "linear":
                        s["domain"] = list(y_domain)
    for channel in _MARK_CHANNELS[view.mark_type]:
        value = view.encodings.get(channel)
        if value is None:
            continue
        if channel == "dims":
            fields = list(value)
            ids = []
            for f in fields:
                sid = f"dim:{f}"
                col = local.column(f)
                if col.dtype == CATEGORICAL:
                    domain = _ordinal_domain(col)
                    scales.add(sid, "band", domain, [viewport["height"], 0.0])
                else:
                    scales.add(sid, "linear", _linear_domain(_finite(col)),
                               [viewport["height"], 0.0])
                ids.append(sid)
            channels["dims"] = {"fields": fields, "scale_ids": ids}
            continue
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            channels[channel] = {"value": value}
            continue
        field = str(value)
        if channel in ("x", "y"):
            channels[channel] = {"field": field, "scale_id": channel}
        elif channel == "color":
            _color_scale(scales, local.column(field), viewport)
            channels["color"] = {"field": field, "scale_id": "color"}
        elif channel in ("size", "opacity", "width", "height"):
            col = local.column(field)
            if col.dtype == CATEGORICAL:
                raise IncompatibleChannel(f"channel {channel!r} needs a numeric field")
            rng = [16.0, 400.0] if channel == "size" else [0.2, 1.0]
            if channel in ("width", "height"):
                rng = [0.0, viewport[channel]]
            scales.add(channel, "linear", _linear_domain(_finite(col)), rng)
            channels[channel] = {"field": field, "scale_id": channel}
        else:  # text
            channels[channel] = {"field": field}

    layers_out = []
    for layer, lf in layer_frames[1:]:
        layer_channels = {}
        for channel, value in layer.encodings.items():
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                layer_channels[channel] = {"value": value}
            elif channel in ("x", "y"):
                layer_channels[channel] = {"field": str(value), "scale_id": channel}
            else:
                layer_channels[channel] = {"field": str(value)}
        layers_out.append({"mark_type": layer.mark_type, "channels": layer_channels})

    needed = _bound_fields(view, local)
    for layer, lf in layer_frames[1:]:
        for f in _bound_fields(layer, lf):
            if f not in needed:
                needed.append(f)
    inline = bool(view.transform) or any(v.transform for v in view.layers)
    data_ref: dict = {"source": "inline" if inline else "frame", "columns": needed}
    if inline:
        data_ref["data"] = {name: local.column(name).to_list() for name in needed
                            if name in local}
    scene = {
        "p6scene_version": SCENE_FORMAT_VERSION,
        "view_id": view.view_id,
        "viewport": dict(viewport),
        "mark_type": view.mark_type,
        "channels": channels,
        "scales": scales.scales,
        "data_ref": data_ref,
        "annotations": [],
        "interactions": [],
    }
    if layers_out:
        scene["layers"] = layers_out
    return scene


def _bound_fields(view: ViewSpec, frame: DataFrame) -> list[str]:
    out: list[str] = []
    for value in view.encodings.values():
        fields = value if isinstance(value, list) else [value]
        for f in fields:
            if isinstance(f, str) and f in frame and f not in out:
                out.append(f)
    return out


# --- annotations -----------------------------------------------------------

def _matched_rows(ann: AnnotationSpec, frame: DataFrame) -> np.ndarray:
    ref = ann.data_ref or {}
    name = ref.get("name")
    if name is not None and name not in frame:
        raise UnresolvedAnnotationRef(
            f"annotation references {name!r} which is not in the computed frame"
        )
    if ref.get("filter"):
        mask = evaluate_predicate(frame, parse_predicate(ref["filter"]))
    elif name is not None:
        col = frame.column(name)
        vals = col.values.astype(np.float64, copy=False)
        mask = vals != 0
        if col.valid is not None:
            mask &= col.valid
    else:
        mask = np.zeros(frame.row_count, dtype=bool)
    return np.flatnonzero(mask)


def _fill_template(template: str, frame: DataFrame, row: int) -> str:
    text = template
    for name in frame.names:
        token = "{" + name + "}"
        if token in text:
            value = frame.column(name).to_list()[row]
            text = text.replace(token, "" if value is None else str(value))
    return text


def attach_annotations(
    scene: dict,
    view: ViewSpec,
    frame: DataFrame,
    annotations: list[AnnotationSpec],
) -> dict:
    """Resolve this view's annotations against its post-transform frame."""
    ours = [a for a in annotations if a.view_id == view.view_id]
    if not ours:
        return scene
    local = apply_view_transforms(view, frame)
    x_field = _channel_field(view, "x")
    y_field = _channel_field(view, "y")
    resolved = []
    for ann in ours:
        if ann.kind == "trendline":
            if not (isinstance(x_field, str) and isinstance(y_field, str)):
                raise UnresolvedAnnotationRef("trendline needs x and y channels")
            xcol, ycol = local.column(x_field), local.column(y_field)
            xv = xcol.values.astype(np.float64, copy=False)
            yv = ycol.values.astype(np.float64, copy=False)
            ok = np.isfinite(xv) & np.isfinite(yv)
            if xcol.valid is not None:
                ok &= xcol.valid
            if ycol.valid is not None:
                ok &= ycol.valid
            if ok.sum() < 2:
                raise UnresolvedAnnotationRef("trendline needs at least 2 points")
            design = np.column_stack([xv[ok], np.ones(int(ok.sum()))])
            coef, *_ = np.linalg.lstsq(design, yv[ok], rcond=None)
            resolved.append({
                "kind": "trendline",
                "slope": float(coef[0]),
                "intercept": float(coef[1]),
            })
            continue
        if ann.values is not None:
            positions = list(ann.values)
        else:
            rows = _matched_rows(ann, local)
            if isinstance(x_field, str) and x_field in local:
                xs = local.column(x_field).to_list()
                positions = [xs[r] for r in rows]
            else:
                positions = [int(r) for r in rows]
        if ann.kind == "rule":
            resolved.append({"kind": "rule", "axis": "x", "positions": positions})
        else:  # label
            if ann.values is not None or ann.text_template is None:
                texts = [str(p) for p in positions]
            else:
                rows = _matched_rows(ann, local)
                texts = [_fill_template(ann.text_template, local, int(r)) for r in rows]
            resolved.append({"kind": "label", "positions": positions, "texts": texts})
    out = dict(scene)
    out["annotations"] = list(scene.get("annotations", [])) + resolved
    return out


# --- interactions ----------------------------------------------------------

def _brush_fields(src_view: ViewSpec) -> tuple[str, list]:
    if src_view.mark_type == "pcp-line":
        return "per-axis", list(src_view.encodings.get("dims", []))
    fields = [f for f in (_channel_field(src_view, "x"), _channel_field(src_view, "y"))
              if isinstance(f, str)]
    return "rect", fields


def _source_binding(inter, src_view: ViewSpec, src_scale_ids) -> dict:
    if inter.event == "brush":
        mode, fields = _brush_fields(src_view)
        return {"event": "brush", "mode": mode, "fields": fields,
                "source": inter.source_view, "targets": list(inter.targets),
                "effect": inter.effect}
    if inter.event in ("zoom", "pan"):
        return {"event": inter.event, "mode": "scale-domain",
                "scales": [sid for sid in src_scale_ids if sid in ("x", "y")],
                "source": inter.source_view, "targets": list(inter.targets),
                "effect": inter.effect}
    return {"event": inter.event, "mode": "highlight", "by": "row-id",
            "source": inter.source_view, "targets": list(inter.targets),
            "effect": inter.effect}


def view_interactions(spec: PipelineSpec, view_id: int, own_scale_ids,
                      known_ids=None) -> list[dict]:
    """Interaction bindings one view carries, derived from specs alone.

    Brushing declares a client-evaluable filter over the source's positional
    fields (per-axis ranges for parallel coordinates, a rectangle otherwise);
    zoom/pan declare scale-domain mutations; click/hover highlight by row id.
    Target views carry an "apply" binding naming the source's fields.
    """
    views = {v.view_id: v for v in spec.concrete_views()}
    out = []
    for inter in spec.interactions:
        if view_id not in (inter.source_view, *inter.targets):
            continue
        if known_ids is not None:
            for vid in [inter.source_view, *inter.targets]:
                if vid not in known_ids:
                    raise UnknownView(f"interaction references view {vid} with no scene")
        src_view = views[inter.source_view]
        if inter.source_view == view_id:
            out.append(_source_binding(inter, src_view, own_scale_ids))
        if view_id in inter.targets and view_id != inter.source_view:
            fields = _brush_fields(src_view)[1] if inter.event == "brush" else []
            out.append({"event": inter.event, "mode": "apply", "fields": fields,
                        "from": inter.source_view, "effect": inter.effect})
    return out


def compile_interactions(spec: PipelineSpec, scenes: dict[int, dict]) -> list[dict]:
    """Binding table over a full scene set; also embeds bindings per scene."""
    views = {v.view_id: v for v in spec.concrete_views()}
    table = []
    for inter in spec.interactions:
        for vid in [inter.source_view, *inter.targets]:
            if vid not in scenes:
                raise UnknownView(f"interaction references view {vid} with no scene")
        src_scale_ids = [s["id"] for s in scenes[inter.source_view]["scales"]]
        table.append(_source_binding(inter, views[inter.source_view], src_scale_ids))
    for vid, scene in scenes.items():
        scene["interactions"] = view_interactions(
            spec, vid, [s["id"] for s in scene["scales"]])
    return table


# --- orchestration ---------------------------------------------------------

def facet_y_domains(spec: PipelineSpec, frame: DataFrame,
                    group: int | None = None) -> dict[int, list[float]]:
    """Union linear-y domain per facet group, so siblings stay comparable."""
    groups: dict[int, list] = {}
    for view in spec.concrete_views():
        if view.facet_group is None:
            continue
        if group is not None and view.facet_group[0] != group:
            continue
        y_field = _channel_field(view, "y")
        if not isinstance(y_field, str):
            continue
        local = apply_view_transforms(view, frame)
        if y_field not in local:
            continue
        col = local.column(y_field)
        if _is_ordinal(col) and col.dtype == CATEGORICAL:
            continue
        include_zero = view.mark_type == "rect"
        dom = _linear_domain(_finite(col), include_zero)
        groups.setdefault(view.facet_group[0], []).append(dom)
    return {
        g: [min(d[0] for d in doms), max(d[1] for d in doms)]
        for g, doms in groups.items()
    }


def compile_scenes(
    spec: PipelineSpec,
    frame: DataFrame,
    plugins: PluginRegistry | None = None,
) -> list[dict]:
    """All scenes for an expanded spec, positioned, annotated, and wired."""
    views = spec.concrete_views()
    layout = effective_layout(spec)
    viewports = layout_views(layout, [v.view_id for v in views])
    shared = facet_y_domains(spec, frame)
    scenes: dict[int, dict] = {}
    for view in views:
        y_dom = shared.get(view.facet_group[0]) if view.facet_group else None
        scene = compile_view(view, frame, viewports[view.view_id], plugins, y_dom)
        scene = attach_annotations(scene, view, frame, spec.annotations)
        scenes[view.view_id] = scene
    compile_interactions(spec, scenes)
    return [scenes[v.view_id] for v in views]


def scene_bytes(scene: dict) -> bytes:
    """Canonical byte serialization; equality of scenes = equality of bytes."""
    return json.dumps(scene, sort_keys=True, separators=(",", ":"),
                      allow_nan=False).encode("utf-8")
