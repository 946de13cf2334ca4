"""Declarative visual-analytics pipelines.

One JSON document declares data, transforms, ML analyses, models, views,
and interactions; the engine compiles it into a reactive dependency graph
and emits render-ready scenes. The usual entry points:

    from vizpipe import build_graph, execute, set_parameter

    graph = build_graph(document, base_dir="specs/")
    execute(graph)
    scenes = graph.scenes()
    set_parameter(graph, "/analyses/Clusters/parameters/n_clusters", 4)

`serve` (or the `vizpipe` CLI) exposes the same pipelines over HTTP and
WebSocket; `register_algorithm` and `register_plugin` extend the analysis
catalog and the mark set.
"""

from .catalog import Catalog, DEFAULT_CATALOG, ParamInfo, register_algorithm
from .codec import decode, encode
from .engine import (
    ChangeReport,
    DepGraph,
    RunReport,
    build_graph,
    chain_pipelines,
    execute,
    export_result,
    reload_data,
    set_parameter,
)
from .frame import (
    CATEGORICAL,
    FLOAT64,
    INT64,
    Column,
    DataFrame,
    categorical_column,
    column_from_values,
    float_column,
    int_column,
)
from .scene import compile_scenes, register_plugin, scene_bytes
from .service import create_app, preload
from .speclang import (
    PipelineSpec,
    expand_facets,
    parse_pipeline,
    serialize_pipeline,
    set_param,
    validate_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "CATEGORICAL",
    "Catalog",
    "ChangeReport",
    "Column",
    "DEFAULT_CATALOG",
    "DataFrame",
    "DepGraph",
    "FLOAT64",
    "INT64",
    "ParamInfo",
    "PipelineSpec",
    "RunReport",
    "__version__",
    "build_graph",
    "categorical_column",
    "chain_pipelines",
    "column_from_values",
    "compile_scenes",
    "create_app",
    "decode",
    "encode",
    "execute",
    "expand_facets",
    "export_result",
    "float_column",
    "int_column",
    "parse_pipeline",
    "preload",
    "register_algorithm",
    "register_plugin",
    "reload_data",
    "scene_bytes",
    "serialize_pipeline",
    "set_param",
    "set_parameter",
    "validate_pipeline",
]
