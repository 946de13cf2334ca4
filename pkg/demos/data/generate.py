"""Regenerates the bundled demo datasets. Both files are frozen in the repo;
rerun this only to change their shape, then commit the new CSVs."""

from pathlib import Path

import numpy as np

HERE = Path(__file__).parent


def birth_records(path: Path, rows: int = 300, seed: int = 20) -> None:
    """Newborn records with three latent groups so clustering has structure:
    preterm births, full-term with typical weight gain, full-term with high
    weight gain. Birth weight follows gestation and weight gain linearly."""
    rng = np.random.default_rng(seed)
    group = rng.choice(3, size=rows, p=[0.2, 0.55, 0.25])
    gestation = np.where(
        group == 0,
        rng.normal(34.0, 1.2, rows),
        rng.normal(39.3, 1.1, rows),
    ).clip(28, 43)
    gain = np.select(
        [group == 0, group == 1, group == 2],
        [rng.normal(22, 5, rows), rng.normal(30, 5, rows), rng.normal(48, 6, rows)],
    ).clip(5, 80)
    age = rng.normal(29, 5.5, rows).clip(16, 47)
    weight = (
        7.25
        + 0.42 * (gestation - 39.0)
        + 0.018 * (gain - 30.0)
        + 0.012 * (age - 29.0)
        + rng.normal(0.0, 0.35, rows)
    ).clip(1.5, 12.0)
    gender = rng.choice(["Female", "Male"], rows)
    race = rng.choice(["Asian", "Black", "Hispanic", "White", "Other"],
                      rows, p=[0.15, 0.2, 0.25, 0.3, 0.1])
    lines = ["MotherAge,MotherWeightGain,GestationWeeks,BabyGender,MotherRace,BabyWeight"]
    for i in range(rows):
        lines.append(
            f"{age[i]:.1f},{gain[i]:.1f},{gestation[i]:.1f},"
            f"{gender[i]},{race[i]},{weight[i]:.2f}"
        )
    path.write_text("\n".join(lines) + "\n")


def case_series(path: Path, days: int = 120, seed: int = 21) -> None:
    """Daily confirmed-case counts for six fictional regions. The regional
    onsets are staggered so the global total shows four clear level shifts
    (around days 30, 55, 80, and 100) for change-point detection."""
    rng = np.random.default_rng(seed)
    regions = ["Arcadia", "Borealia", "Cordova", "Delphi", "Eastmark", "Fjordland"]
    onset = {"Arcadia": 0, "Borealia": 30, "Cordova": 30, "Delphi": 55,
             "Eastmark": 80, "Fjordland": 100}
    scale = {"Arcadia": 300, "Borealia": 900, "Cordova": 700, "Delphi": 1600,
             "Eastmark": 2500, "Fjordland": 1800}
    start = np.datetime64("2020-01-22")
    lines = ["Date,Region,Confirmed"]
    for day in range(days):
        date = start + np.timedelta64(day, "D")
        for region in regions:
            active = day >= onset[region]
            level = scale[region] if active else 0
            noise = rng.integers(-30, 31) if active else 0
            drift = int(0.8 * max(day - onset[region], 0)) if active else 0
            count = max(level + drift + int(noise), 0)
            lines.append(f"{date},{region},{count}")
    path.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    birth_records(HERE / "birth_records.csv")
    case_series(HERE / "case_series.csv")
    print("wrote", HERE / "birth_records.csv")
    print("wrote", HERE / "case_series.csv")
