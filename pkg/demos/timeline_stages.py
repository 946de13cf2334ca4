"""Stage a time series with change-point detection, then fan out snapshots.

Pipeline 1 aggregates daily case counts across regions, detects four change
points in the total, and annotates them as rules on a line chart. Its input
frame is then exported and chained into pipeline 2, which facets one bar
chart per detected date showing the per-region breakdown at that moment.

Run:  python3 demos/timeline_stages.py
"""

import json
from pathlib import Path

from vizpipe import engine

HERE = Path(__file__).parent

TIMELINE = {
    "data": {
        "source": "data/case_series.csv",
        "transform": [
            {"aggregate": {"group_by": "Date",
                           "ops": [{"op": "sum", "field": "Confirmed",
                                    "as": "Total"}]}},
        ],
    },
    "analyses": {
        "ChangePoints": {"algorithm": "ChangePoint", "features": ["Total"],
                         "n_bkps": 4},
    },
    "view-layout": {"rows": 1, "cols": 1, "width": 1200, "height": 360},
    "visualizations": [
        {"view": 0, "mark": "line", "encodings": {"x": "Date", "y": "Total"}},
    ],
    "annotations": [{"view": 0, "kind": "rule", "ref": "ChangePoints"}],
}


def snapshot_pipeline(dates: list[str]) -> dict:
    return {
        "data": {"source": "$chain"},
        "view-layout": {"rows": 1, "cols": len(dates),
                        "width": 1200, "height": 300},
        "visualizations": [
            {"$cols": dates,
             "transform": [{"match": "Date == '$select'"}],
             "mark": "bar",
             "encodings": {"x": "Region", "y": "Confirmed"}},
        ],
    }


def main() -> None:
    timeline = engine.build_graph(TIMELINE, base_dir=HERE)
    engine.execute(timeline)

    frame = timeline.frame()
    dates = [d for d, flag in zip(frame.column("Date").to_list(),
                                  frame.column("ChangePoints").to_list()) if flag]
    print(f"change points at {dates}")

    rule = [a for a in timeline.scenes()[0]["annotations"]
            if a["kind"] == "rule"][0]
    assert rule["positions"] == dates

    per_region = engine.export_result(timeline, "load")
    snapshots = engine.chain_pipelines(per_region, snapshot_pipeline(dates),
                                       base_dir=HERE)
    engine.execute(snapshots)
    scenes = snapshots.scenes()
    print(f"{len(scenes)} snapshot views, one per change point")

    out = HERE / "out"
    out.mkdir(exist_ok=True)
    (out / "timeline_scenes.json").write_text(
        json.dumps(timeline.scenes() + scenes, indent=1))
    print(f"wrote {out / 'timeline_scenes.json'}")


if __name__ == "__main__":
    main()
