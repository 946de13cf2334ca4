"""Extend the runtime with a custom embedding and a custom mark, then serve.

Registers SpreadMap, a distance-preserving embedding computed from the
double-centered Gram matrix, alongside the builtin algorithms, and an "area"
mark handled by a named plugin. The dashboard starts on PCA; swapping the
algorithm to SpreadMap is a single parameter patch, exactly what a dropdown
control would send.

Run:  python3 demos/extension_dashboard.py            (print a summary)
      python3 demos/extension_dashboard.py --serve    (start the service)
"""

import sys
from pathlib import Path

import numpy as np

from vizpipe import engine
from vizpipe.catalog import AnalysisOutput, ParamInfo, register_algorithm
from vizpipe.frame import FLOAT64
from vizpipe.scene import register_plugin

HERE = Path(__file__).parent


def fit_spreadmap(X, params) -> AnalysisOutput:
    k = int(params.get("n_components", 2))
    V = X.values
    sq = (V * V).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * V @ V.T, 0.0)
    centered = d2 - d2.mean(axis=0) - d2.mean(axis=1)[:, None] + d2.mean()
    eigvals, eigvecs = np.linalg.eigh(-0.5 * centered)
    order = np.argsort(eigvals)[::-1][:k]
    coords = eigvecs[:, order] * np.sqrt(np.maximum(eigvals[order], 0.0))
    for j in range(coords.shape[1]):  # fixed sign for deterministic output
        lead = np.argmax(np.abs(coords[:, j]))
        if coords[lead, j] < 0:
            coords[:, j] = -coords[:, j]
    return AnalysisOutput(values=coords, dtype=FLOAT64,
                          extras={"eigenvalues": eigvals[order].tolist()})


def install_extensions() -> None:
    register_algorithm(
        "SpreadMap", fit_spreadmap,
        params=[ParamInfo("n_components", "int", default=2, lo=1)],
        n_output_columns=lambda p: int(p.get("n_components", 2)),
        description="pairwise-distance preserving embedding",
    )
    register_plugin("area-chart", condition="area", required_channels=("x", "y"))


FEATURES = ["MotherAge", "MotherWeightGain", "GestationWeeks", "BabyWeight"]

PIPELINE = {
    "data": {"source": "data/birth_records.csv"},
    "analyses": {
        "Groups": {"algorithm": "KMeans", "features": FEATURES,
                   "n_clusters": 3, "seed": 4, "scaling": "standardize"},
        "Embed": {"algorithm": "PCA", "features": FEATURES,
                  "n_components": 2, "scaling": "standardize"},
    },
    "view-layout": {"rows": 1, "cols": 3, "width": 1380, "height": 420},
    "visualizations": [
        {"view": 0, "encodings": {"x": "Embed.0", "y": "Embed.1",
                                  "color": "Groups"}},
        {"view": 1, "mark": "pcp-line",
         "encodings": {"dims": FEATURES, "color": "Groups"}},
        {"view": 2, "mark": "area",
         "transform": [{"aggregate": {"bin": {"field": "BabyWeight",
                                              "bin_count": 12},
                                      "ops": [{"op": "count",
                                               "as": "$count"}]}}],
         "encodings": {"x": "BabyWeight_bin", "y": "$count"}},
    ],
    "interactions": [{"event": "brush", "source": 0, "targets": [1]}],
}


def main() -> None:
    install_extensions()
    if "--serve" in sys.argv:
        import uvicorn

        from vizpipe.service import DEFAULT_PORT, create_app, preload

        app = create_app(base_dir=HERE)
        pid = preload(app, [PIPELINE], base_dir=HERE)[0]
        print(f"pipeline {pid} at http://127.0.0.1:{DEFAULT_PORT}/api/pipelines")
        uvicorn.run(app, host="127.0.0.1", port=DEFAULT_PORT,
                    log_level="warning")
        return

    graph = engine.build_graph(PIPELINE, base_dir=HERE)
    engine.execute(graph)
    marks = [s["mark_type"] for s in graph.scenes()]
    print(f"scenes: {marks} (area handled by plugin "
          f"{graph.scenes()[2]['plugin']['key']!r})")

    change = engine.set_parameter(graph, "/analyses/Embed/algorithm", "SpreadMap")
    print(f"algorithm swap recomputed {change.recomputed}")
    xs = graph.frame().column("Embed.0").to_list()
    print(f"SpreadMap first axis spans [{min(xs):.2f}, {max(xs):.2f}]")


if __name__ == "__main__":
    main()
