################################################################################################
# Trains every model variant with several seeds on one task and evaluates all of them on the    #
# test split. The engine variant should beat the plain PPO agent on both tasks, by at least    #
# 5 percentage points of SR on ObsNav, and training the engine without its own loss should     #
# not beat training it with the loss.                                                          #
# Expect up to 12 hours of CPU time per task with the default settings.                        #
################################################################################################

import csv
import subprocess
from pathlib import Path

from nie_nav_pipeline.settings import Settings, write_settings_to_toml

#  Task to compare on: "obsnav" or "objplace".
task = "obsnav"
seeds = (1, 2, 3)
variants = ("nie", "ppo", "rgbdk")
output_dir = Path("runs") / f"compare_{task}"
dataset_dir = Path("datasets")
min_margin = 5.0 if task == "obsnav" else 0.0


def variant_settings(variant: str, seed: int) -> Settings:
    return Settings.model_validate({
        "run": {"task": task, "variant": variant, "seed": seed, "dataset_dir": str(dataset_dir),
                "run_dir": str(output_dir / f"{variant}_seed{seed}")},
        "train": {"alpha": 3.0 if variant == "nie" else 0.0},
    })


if __name__ == "__main__":

    output_dir.mkdir(parents=True, exist_ok=True)
    data_settings = output_dir / "dataset.toml"
    write_settings_to_toml(data_settings, variant_settings("nie", seeds[0]))
    subprocess.run(["nie-pipeline", "gen-data", "-c", str(data_settings)], check=True)

    run_dirs = []
    for variant in variants:
        for seed in seeds:
            settings = variant_settings(variant, seed)
            settings_file = output_dir / f"{variant}_seed{seed}.toml"
            write_settings_to_toml(settings_file, settings)
            subprocess.run(["nie-pipeline", "train", "-c", str(settings_file)], check=True)
            run_dirs.append(settings.run.run_dir)

    report = output_dir / "report.csv"
    subprocess.run(["nie-pipeline", "eval", *run_dirs, "--split", "test", "--report", str(report)], check=True)

    with open(report, newline="") as f:
        success_rate = {row["variant"]: float(row["SR"]) for row in csv.DictReader(f)}
    for variant, value in success_rate.items():
        print(f"{task} {variant:>6}: SR {value:.1f}%")

    passed = success_rate["nie"] - success_rate["ppo"] >= min_margin and success_rate["nie"] > success_rate["ppo"]
    passed = passed and success_rate["rgbdk"] <= success_rate["nie"]
    print("Ordering reproduced" if passed else "Ordering NOT reproduced")
    if not passed:
        raise SystemExit(1)
