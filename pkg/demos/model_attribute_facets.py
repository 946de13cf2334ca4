"""Fit a birth-weight model, tune it, and facet views by what it learned.

A linear regression predicts BabyWeight; a grid-searched random forest is
fit beside it for comparison. The faceted row expands automatically into one
scatter per top-weighted regression feature, so the layout follows the model
rather than a hand-written list.

Run:  python3 demos/model_attribute_facets.py
"""

from pathlib import Path

from vizpipe import engine

HERE = Path(__file__).parent

FEATURES = ["MotherAge", "MotherWeightGain", "GestationWeeks"]

PIPELINE = {
    "data": {"source": "data/birth_records.csv"},
    "models": {
        "weight-line": {
            "method": "LinearRegression",
            "target": "BabyWeight", "features": FEATURES,
        },
        "weight-forest": {
            "method": "RandomForestRegressor",
            "target": "BabyWeight", "features": FEATURES,
            "seed": 11, "scoring": "r2",
            "param_grid": {"n_estimators": [8, 16], "max_depth": [3, 5]},
        },
    },
    "analyses": {
        "Fitted": {"algorithm": "ModelApply", "model": "weight-line",
                   "features": FEATURES},
    },
    "view-layout": {"rows": 2, "cols": 3, "width": 1080, "height": 640},
    "visualizations": [
        {"view": 0, "encodings": {"x": "BabyWeight", "y": "Fitted"}},
        {"view": 1, "encodings": {"x": "BabyWeight",
                                  "y": "weight-forest.prediction"}},
        {"$cols": {"model": "weight-line", "attribute": "coefficients",
                   "top_k": 3, "order": "abs_desc"},
         "view": 3,
         "encodings": {"x": "$select", "y": "BabyWeight"}},
    ],
    "annotations": [
        {"view": 0, "kind": "trendline"},
        {"view": 1, "kind": "trendline"},
    ],
}


def main() -> None:
    graph = engine.build_graph(PIPELINE, base_dir=HERE)
    engine.execute(graph)

    line = engine.export_result(graph, "weight-line")
    print("regression coefficients:")
    for name, coef in sorted(line["attributes"]["coefficients"].items(),
                             key=lambda kv: -abs(kv[1])):
        print(f"  {name:>18}: {coef:+.4f}")

    forest = engine.export_result(graph, "weight-forest")
    print(f"forest grid search: best {forest['best_params']} "
          f"scoring {forest['best_score']:.4f}")

    facets = [v for v in graph.expanded.concrete_views() if v.facet_group]
    print("faceted scatters follow the coefficient ranking:",
          [v.encodings["x"] for v in facets])
    print(f"{len(graph.scenes())} scenes total")


if __name__ == "__main__":
    main()
