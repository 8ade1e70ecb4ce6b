################################################################################################
# Trains the plain PPO agent on the empty-room point-goal task and evaluates it on the test     #
# split. The training loop is considered sane when at least 90% of the test episodes succeed.  #
# Expect several hours on a desktop CPU with 8 workers and 2M steps.                           #
################################################################################################

import csv
import subprocess
from pathlib import Path

settings_file = Path(__file__).parents[1] / "pointnav_sanity_settings.toml"
run_dir = Path("runs/pointnav_sanity")
report = run_dir.parent / "pointnav_sanity_report.csv"
min_success_rate = 90.0


if __name__ == "__main__":

    assert settings_file.suffix == ".toml", "The settings file does not have the correct file extension. Must be .toml"

    subprocess.run(["nie-pipeline", "gen-data", "-c", str(settings_file)], check=True)
    subprocess.run(["nie-pipeline", "train", "-c", str(settings_file), "--run-dir", str(run_dir)], check=True)
    subprocess.run(["nie-pipeline", "eval", str(run_dir), "--split", "test", "--report", str(report)], check=True)

    with open(report, newline="") as f:
        row = next(csv.DictReader(f))
    success_rate = float(row["SR"])
    print(f"Point-goal SR {success_rate:.1f}% after {row['steps']} steps (must be at least {min_success_rate}%)")
    if success_rate < min_success_rate:
        raise SystemExit(1)
