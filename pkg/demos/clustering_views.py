"""Cluster newborn records, project them, and steer the result reactively.

Builds the classic two-view arrangement: a scatter plot of the first two
principal components colored by K-Means cluster, next to a bar chart of
cluster sizes. Then edits n_clusters through the engine and shows how little
gets recomputed.

Run:  python3 demos/clustering_views.py
"""

from pathlib import Path

from vizpipe import engine

HERE = Path(__file__).parent

PIPELINE = {
    "data": {"source": "data/birth_records.csv"},
    "analyses": {
        "Clusters": {
            "algorithm": "KMeans",
            "features": ["MotherAge", "MotherWeightGain", "GestationWeeks",
                         "BabyWeight"],
            "n_clusters": 3, "seed": 4, "scaling": "standardize",
        },
        "PC": {
            "algorithm": "PCA",
            "features": ["MotherAge", "MotherWeightGain", "GestationWeeks",
                         "BabyWeight"],
            "n_components": 2, "scaling": "standardize",
        },
    },
    "view-layout": {"rows": 1, "cols": 2, "width": 960, "height": 420},
    "visualizations": [
        {"view": 0, "encodings": {"x": "PC.0", "y": "PC.1", "color": "Clusters"}},
        {"view": 1, "mark": "bar",
         "transform": [{"aggregate": {"group_by": "Clusters",
                                      "ops": [{"op": "count", "as": "$count"}]}}],
         "encodings": {"x": "Clusters", "y": "$count"}},
    ],
    "interactions": [{"event": "brush", "source": 0, "targets": [1]}],
}


def main() -> None:
    graph = engine.build_graph(PIPELINE, base_dir=HERE)
    report = engine.execute(graph)
    frame = graph.frame()
    print(f"executed {len(report.order)} nodes in "
          f"{report.total_seconds * 1000:.1f} ms")
    print(f"frame: {frame.row_count} rows, columns {frame.names}")

    bar = graph.scenes()[1]
    counts = bar["data_ref"]["data"]["$count"]
    print(f"cluster sizes: {counts} (sum {sum(counts)})")

    for k in (4, 5, 3):
        change = engine.set_parameter(
            graph, "/analyses/Clusters/parameters/n_clusters", k)
        print(f"n_clusters={k}: recomputed {change.recomputed} "
              f"(projection untouched)")

    change = engine.set_parameter(
        graph, "/visualizations/0/encodings/color", "MotherRace")
    print(f"recolor scatter: recomputed {change.recomputed}")


if __name__ == "__main__":
    main()
