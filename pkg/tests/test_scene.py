"""Scene compilation: scales, layout, annotations, interactions, plugins."""

import numpy as np
import pytest

from vizpipe.errors import (
    DuplicatePlugin,
    IncompatibleChannel,
    LayoutOverflow,
    MissingRequiredChannel,
    UnknownField,
    UnknownView,
    UnresolvedAnnotationRef,
)
from vizpipe.frame import DataFrame, categorical_column, float_column, int_column
from vizpipe.scene import (
    PALETTE,
    PluginRegistry,
    compile_interactions,
    compile_scenes,
    compile_view,
    layout_slots,
    layout_views,
    palette_color,
    scene_bytes,
)
from vizpipe.speclang import expand_facets, parse_pipeline

VIEWPORT = {"x": 0.0, "y": 0.0, "width": 400.0, "height": 300.0}


def scatter_frame():
    return DataFrame([
        float_column("PC.0", [0.0, 1.0, 2.0, 3.0]),
        float_column("PC.1", [10.0, 30.0, 20.0, 40.0]),
        int_column("Clusters", [0, 0, 1, 1]),
        categorical_column("Kind", ["news", "tech", "news", "tech"]),
    ])


def view_of(doc):
    spec = parse_pipeline({"data": {"source": "x.csv"}, "visualizations": [doc]})
    return spec.concrete_views()[0]


def scale_by_id(scene, scale_id):
    for s in scene["scales"]:
        if s["id"] == scale_id:
            return s
    raise AssertionError(f"no scale {scale_id}")


class TestScales:
    def test_scatter_linear_extents_and_ordinal_color(self):
        view = view_of({"view": 0, "mark": "circle",
                        "x": "PC.0", "y": "PC.1", "color": "Clusters"})
        scene = compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        x, y, color = (scale_by_id(scene, s) for s in ("x", "y", "color"))
        assert x["kind"] == "linear" and x["domain"] == [0.0, 3.0]
        assert x["range"] == [0.0, 400.0]
        assert y["domain"] == [10.0, 40.0]
        assert y["range"] == [300.0, 0.0]
        assert color["kind"] == "ordinal-color"
        assert color["domain"] == [0, 1]
        assert color["range"] == [PALETTE[0], PALETTE[1]]

    def test_bar_after_count_aggregate(self):
        view = view_of({
            "view": 0, "mark": "bar", "x": "Clusters", "y": "$count",
            "transform": [{"aggregate": {"group_by": "Clusters",
                                         "ops": [{"op": "count"}]}}],
        })
        scene = compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        x, y = scale_by_id(scene, "x"), scale_by_id(scene, "y")
        assert x["kind"] == "band" and x["domain"] == [0, 1]
        assert y["kind"] == "linear" and y["domain"][0] == 0.0
        assert scene["data_ref"]["source"] == "inline"
        assert scene["data_ref"]["data"]["$count"] == [2, 2]

    def test_empty_frame_compiles_with_unit_domains(self):
        view = view_of({"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1",
                        "transform": [{"match": "PC.0 > 100"}]})
        scene = compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        assert scale_by_id(scene, "x")["domain"] == [0.0, 1.0]
        assert scene["data_ref"]["data"]["PC.0"] == []

    def test_constant_column_widens_domain(self):
        frame = DataFrame([float_column("A", [7.0, 7.0]), float_column("B", [1.0, 2.0])])
        view = view_of({"view": 0, "mark": "circle", "x": "A", "y": "B"})
        scene = compile_view(view, frame, VIEWPORT, PluginRegistry())
        assert scale_by_id(scene, "x")["domain"] == [6.5, 7.5]

    def test_categorical_axis_becomes_band(self):
        view = view_of({"view": 0, "mark": "circle", "x": "Kind", "y": "PC.0"})
        scene = compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        assert scale_by_id(scene, "x")["kind"] == "band"
        assert scale_by_id(scene, "x")["domain"] == ["news", "tech"]

    def test_numeric_color_uses_linear_ramp(self):
        view = view_of({"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1",
                        "color": "PC.1"})
        scene = compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        color = scale_by_id(scene, "color")
        assert color["kind"] == "linear" and len(color["range"]) == 2

    def test_twenty_categories_get_distinct_colors(self):
        frame = DataFrame([
            categorical_column("K", [f"c{i:02d}" for i in range(20)]),
            float_column("V", [float(i) for i in range(20)]),
        ])
        view = view_of({"view": 0, "mark": "circle", "x": "V", "y": "V", "color": "K"})
        scene = compile_view(view, frame, VIEWPORT, PluginRegistry())
        rng = scale_by_id(scene, "color")["range"]
        assert len(set(rng)) == 20
        assert palette_color(20) == palette_color(0)

    def test_size_channel_gets_linear_scale(self):
        view = view_of({"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1",
                        "size": "PC.1"})
        scene = compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        assert scale_by_id(scene, "size")["range"] == [16.0, 400.0]

    def test_constant_channel_value_has_no_scale(self):
        view = view_of({"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1",
                        "size": 25})
        scene = compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        assert scene["channels"]["size"] == {"value": 25}
        assert all(s["id"] != "size" for s in scene["scales"])

    def test_pcp_view_gets_one_scale_per_dim(self):
        view = view_of({"view": 0, "mark": "pcp-line",
                        "dims": ["PC.0", "PC.1", "Clusters"], "color": "Kind"})
        scene = compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        assert scene["channels"]["dims"]["scale_ids"] == \
            ["dim:PC.0", "dim:PC.1", "dim:Clusters"]
        assert scale_by_id(scene, "dim:PC.0")["kind"] == "linear"

    def test_scaled_positions_stay_inside_viewport(self):
        frame = scatter_frame()
        view = view_of({"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1"})
        scene = compile_view(view, frame, VIEWPORT, PluginRegistry())
        x = scale_by_id(scene, "x")
        (d0, d1), (r0, r1) = x["domain"], x["range"]
        for v in frame.column("PC.0").values:
            px = r0 + (v - d0) / (d1 - d0) * (r1 - r0)
            assert min(r0, r1) - 1e-9 <= px <= max(r0, r1) + 1e-9

    def test_bound_fields_all_inside_data_ref(self):
        view = view_of({"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1",
                        "color": "Clusters", "size": "PC.1"})
        scene = compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        cols = set(scene["data_ref"]["columns"])
        for binding in scene["channels"].values():
            if "field" in binding:
                assert binding["field"] in cols


class TestChannelErrors:
    def test_unknown_field_names_view(self):
        view = view_of({"view": 3, "mark": "circle", "x": "Nope", "y": "PC.1"})
        with pytest.raises(UnknownField) as exc:
            compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        assert exc.value.name == "Nope"

    def test_height_on_line_mark_rejected(self):
        view = view_of({"view": 0, "mark": "line", "x": "PC.0", "y": "PC.1",
                        "height": "PC.1"})
        with pytest.raises(IncompatibleChannel):
            compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())

    def test_categorical_size_rejected(self):
        view = view_of({"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1",
                        "size": "Kind"})
        with pytest.raises(IncompatibleChannel):
            compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())

    def test_unclaimed_custom_mark_mentions_plugin(self):
        view = view_of({"view": 0, "mark": "area", "x": "PC.0", "y": "PC.1"})
        with pytest.raises(IncompatibleChannel) as exc:
            compile_view(view, scatter_frame(), VIEWPORT, PluginRegistry())
        assert "plugin" in str(exc.value)


class TestLayout:
    def test_two_rows_stack_vertically(self):
        from vizpipe.speclang import Layout
        slots = layout_slots(Layout(rows=2, cols=1, padding=10, width=400, height=620))
        assert slots[0]["x"] == slots[1]["x"] == 10
        assert slots[0]["y"] == 10
        assert slots[1]["y"] == pytest.approx(10 + 295 + 10)
        assert slots[0]["height"] == pytest.approx(295)

    def test_row_of_four_runs_left_to_right(self):
        from vizpipe.speclang import Layout
        slots = layout_slots(Layout(rows=1, cols=4, padding=0, width=400, height=100))
        assert [s["x"] for s in slots] == [0, 100, 200, 300]
        assert all(s["y"] == 0 for s in slots)

    def test_single_slot_fills_frame_inside_padding(self):
        from vizpipe.speclang import Layout
        [slot] = layout_slots(Layout(rows=1, cols=1, padding=10, width=960, height=600))
        assert slot == {"x": 10, "y": 10, "width": 940, "height": 580}

    def test_view_outside_grid_overflows(self):
        from vizpipe.speclang import Layout
        with pytest.raises(LayoutOverflow):
            layout_views(Layout(rows=1, cols=2), [0, 2])


class TestLayers:
    def test_layers_share_positional_scales(self):
        frame = DataFrame([
            float_column("T", [0.0, 1.0, 2.0, 3.0]),
            float_column("Low", [5.0, 6.0, 4.0, 5.0]),
            float_column("High", [50.0, 60.0, 40.0, 55.0]),
        ])
        view = view_of({
            "view": 0, "mark": "line", "x": "T", "y": "Low",
            "layers": [{"mark": "line", "x": "T", "y": "High"}],
        })
        scene = compile_view(view, frame, VIEWPORT, PluginRegistry())
        assert scale_by_id(scene, "y")["domain"] == [4.0, 60.0]
        assert scene["layers"][0]["channels"]["y"] == {"field": "High", "scale_id": "y"}
        assert "High" in scene["data_ref"]["columns"]


class TestDeterminism:
    def test_identical_inputs_identical_bytes(self):
        frame = scatter_frame()
        view = view_of({"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1",
                        "color": "Kind"})
        a = compile_view(view, frame, VIEWPORT, PluginRegistry())
        b = compile_view(view, frame, VIEWPORT, PluginRegistry())
        assert scene_bytes(a) == scene_bytes(b)

    def test_scene_bytes_reject_non_finite(self):
        with pytest.raises(ValueError):
            scene_bytes({"v": float("nan")})


class TestAnnotations:
    def indicator_frame(self):
        return DataFrame([
            float_column("T", [float(i) for i in range(8)]),
            float_column("V", [1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0]),
            int_column("Seg", [0, 0, 0, 0, 1, 0, 0, 0]),
        ])

    def annotated(self, ann):
        doc = {"data": {"source": "x.csv"},
               "visualizations": [{"view": 0, "mark": "line", "x": "T", "y": "V"}],
               "annotations": [ann]}
        spec = parse_pipeline(doc)
        return compile_scenes(spec, self.indicator_frame(), PluginRegistry())[0]

    def test_rule_lands_on_nonzero_indicator_rows(self):
        scene = self.annotated({"view": 0, "kind": "rule", "ref": "Seg"})
        [rule] = scene["annotations"]
        assert rule == {"kind": "rule", "axis": "x", "positions": [4.0]}

    def test_rule_filter_overrides_default_mask(self):
        scene = self.annotated({"view": 0, "kind": "rule",
                                "ref": {"name": "Seg", "filter": "V > 5"}})
        [rule] = scene["annotations"]
        assert rule["positions"] == [4.0, 5.0, 6.0, 7.0]

    def test_literal_values_pass_through(self):
        scene = self.annotated({"view": 0, "kind": "rule", "values": [2.5, 6.0]})
        [rule] = scene["annotations"]
        assert rule["positions"] == [2.5, 6.0]

    def test_label_template_substitutes_fields(self):
        scene = self.annotated({"view": 0, "kind": "label", "ref": "Seg",
                                "template": "jump at {T}"})
        [label] = scene["annotations"]
        assert label["texts"] == ["jump at 4.0"]
        assert label["positions"] == [4.0]

    def test_trendline_recovers_line(self):
        frame = DataFrame([
            float_column("X", [0.0, 1.0, 2.0, 3.0]),
            float_column("Y", [1.0, 3.0, 5.0, 7.0]),
        ])
        doc = {"data": {"source": "x.csv"},
               "visualizations": [{"view": 0, "mark": "circle", "x": "X", "y": "Y"}],
               "annotations": [{"view": 0, "kind": "trendline"}]}
        scene = compile_scenes(parse_pipeline(doc), frame, PluginRegistry())[0]
        [tl] = scene["annotations"]
        assert tl["slope"] == pytest.approx(2.0, abs=1e-9)
        assert tl["intercept"] == pytest.approx(1.0, abs=1e-9)

    def test_missing_reference_raises(self):
        with pytest.raises(UnresolvedAnnotationRef):
            self.annotated({"view": 0, "kind": "rule", "ref": "Ghost"})


class TestInteractions:
    def two_view_spec(self, event="brush", mark0="circle"):
        doc = {
            "data": {"source": "x.csv"},
            "view-layout": {"rows": 1, "cols": 2},
            "visualizations": [
                {"view": 0, "mark": mark0, "x": "PC.0", "y": "PC.1"}
                if mark0 != "pcp-line" else
                {"view": 0, "mark": "pcp-line", "dims": ["PC.0", "PC.1", "Clusters"]},
                {"view": 1, "mark": "circle", "x": "PC.0", "y": "PC.1"},
            ],
            "interactions": [{"event": event, "source": 0, "targets": [1],
                              "effect": "filter"}],
        }
        return parse_pipeline(doc)

    def test_brush_binds_positional_fields(self):
        scenes = compile_scenes(self.two_view_spec(), scatter_frame(), PluginRegistry())
        [binding] = scenes[0]["interactions"]
        assert binding["mode"] == "rect"
        assert binding["fields"] == ["PC.0", "PC.1"]
        [received] = scenes[1]["interactions"]
        assert received["mode"] == "apply" and received["from"] == 0

    def test_pcp_brush_is_per_axis(self):
        scenes = compile_scenes(self.two_view_spec(mark0="pcp-line"),
                                scatter_frame(), PluginRegistry())
        [binding] = scenes[0]["interactions"]
        assert binding["mode"] == "per-axis"
        assert binding["fields"] == ["PC.0", "PC.1", "Clusters"]

    def test_zoom_targets_scale_domains(self):
        scenes = compile_scenes(self.two_view_spec(event="zoom"),
                                scatter_frame(), PluginRegistry())
        [binding] = scenes[0]["interactions"]
        assert binding["mode"] == "scale-domain"
        assert binding["scales"] == ["x", "y"]

    def test_hover_without_targets_highlights_source(self):
        doc = {"data": {"source": "x.csv"},
               "visualizations": [{"view": 0, "mark": "circle",
                                   "x": "PC.0", "y": "PC.1"}],
               "interactions": [{"event": "hover", "source": 0,
                                 "effect": "highlight"}]}
        scenes = compile_scenes(parse_pipeline(doc), scatter_frame(), PluginRegistry())
        [binding] = scenes[0]["interactions"]
        assert binding["mode"] == "highlight" and binding["targets"] == []

    def test_binding_to_missing_view_fails(self):
        spec = self.two_view_spec()
        scenes = {0: compile_view(spec.concrete_views()[0], scatter_frame(),
                                  VIEWPORT, PluginRegistry())}
        with pytest.raises(UnknownView):
            compile_interactions(spec, scenes)


class TestPlugins:
    def test_plugin_payload_carries_post_transform_rows(self):
        plugins = PluginRegistry()
        plugins.register_plugin("area-chart", condition="area",
                                required_channels=("x", "y"))
        view = view_of({
            "view": 0, "mark": "area", "x": "Clusters", "y": "$count",
            "transform": [{"aggregate": {"group_by": "Clusters",
                                         "ops": [{"op": "count"}]}}],
        })
        scene = compile_view(view, scatter_frame(), VIEWPORT, plugins)
        assert scene["plugin"]["key"] == "area-chart"
        assert scene["plugin"]["data"]["$count"] == [2, 2]
        assert scene["plugin"]["view"]["viewport"]["width"] == 400.0
        assert scene["scales"] == []

    def test_duplicate_key_rejected(self):
        plugins = PluginRegistry()
        plugins.register_plugin("a", condition="area")
        with pytest.raises(DuplicatePlugin):
            plugins.register_plugin("a", condition="other")
        with pytest.raises(DuplicatePlugin):
            plugins.register_plugin("b", condition="area")

    def test_missing_required_channel_rejected(self):
        plugins = PluginRegistry()
        plugins.register_plugin("area-chart", condition="area",
                                required_channels=("x", "y"))
        view = view_of({"view": 0, "mark": "area", "x": "PC.0"})
        with pytest.raises(MissingRequiredChannel):
            compile_view(view, scatter_frame(), VIEWPORT, plugins)


class TestFacetSharing:
    def test_siblings_share_y_domain(self):
        doc = {
            "data": {"source": "x.csv"},
            "view-layout": {"rows": 1, "cols": 2},
            "visualizations": [{"facet": {
                "axis": "$cols", "select": ["news", "tech"],
                "template": {"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1",
                             "transform": [{"match": 'Kind == "$select"'}]},
            }}],
        }
        spec = expand_facets(parse_pipeline(doc))
        scenes = compile_scenes(spec, scatter_frame(), PluginRegistry())
        doms = [scale_by_id(s, "y")["domain"] for s in scenes]
        assert doms[0] == doms[1] == [10.0, 40.0]

    def test_unrelated_views_keep_own_domains(self):
        doc = {
            "data": {"source": "x.csv"},
            "view-layout": {"rows": 1, "cols": 2},
            "visualizations": [
                {"view": 0, "mark": "circle", "x": "PC.0", "y": "PC.1",
                 "transform": [{"match": 'Kind == "news"'}]},
                {"view": 1, "mark": "circle", "x": "PC.0", "y": "PC.1",
                 "transform": [{"match": 'Kind == "tech"'}]},
            ],
        }
        scenes = compile_scenes(parse_pipeline(doc), scatter_frame(), PluginRegistry())
        assert scale_by_id(scenes[0], "y")["domain"] == [10.0, 20.0]
        assert scale_by_id(scenes[1], "y")["domain"] == [30.0, 40.0]
