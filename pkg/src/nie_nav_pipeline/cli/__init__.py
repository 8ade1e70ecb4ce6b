import functools
import logging
import sys
from pathlib import Path

import click
import numpy as np
import toml

from nie_nav_pipeline import __version__
from nie_nav_pipeline.keypoints import write_observation_images
from nie_nav_pipeline.nie import SupervisedNie, collect_transitions, train_nie_supervised
from nie_nav_pipeline.policy import InteractiveNavAgent
from nie_nav_pipeline.settings import Settings, load_settings_from_toml, resolve_settings, write_settings_to_toml
from nie_nav_pipeline.tasks import (
    SPLITS,
    EpisodeGenerationError,
    InteractiveNavEnv,
    compute_metrics,
    dataset_path,
    generate_dataset,
    read_dataset,
    write_dataset,
    write_metrics_report,
)
from nie_nav_pipeline.tensor_core import CheckpointMismatchError, LrSchedule, load_checkpoint, save_checkpoint
from nie_nav_pipeline.trainer import (
    DivergenceError,
    evaluate_policy,
    read_trajectory,
    replay_trajectory,
    train_loop,
    trained_steps,
)

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_DIVERGED = 3


def exit_on_error(command):
    """
    Turns domain errors into a logged message and a nonzero exit status.
    """

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except DivergenceError as e:
            logger.error(str(e))
            sys.exit(EXIT_DIVERGED)
        except (FileNotFoundError, CheckpointMismatchError, EpisodeGenerationError, ValueError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            sys.exit(EXIT_FAILURE)

    return wrapper


def config_option(command):
    return click.option(
        "-c", "--config",
        type=click.Path(exists=True, file_okay=True, dir_okay=False, readable=True, resolve_path=True,
                        path_type=Path),
        default=None,
        help="Settings file (.toml). Only values that differ from the defaults need to be listed.",
    )(command)


def seed_option(command):
    return click.option(
        "-s", "--seed",
        type=int,
        default=None,
        help="Run seed; overrides the NIE_NAV_SEED environment variable and the settings file.",
    )(command)


@click.group(
    context_settings={"help_option_names": ["-h", "--help"]},
    invoke_without_command=False,
)
@click.version_option(
    version=__version__,
    prog_name="nie_nav_pipeline",
)
def cli_main():
    click.echo("NIE navigation pipeline")
    click.echo(f"version = {__version__}")


@cli_main.command("gen-data")
@config_option
@seed_option
@click.option("--task", type=click.Choice(["obsnav", "objplace", "pointnav"]), default=None,
              help="Task to generate; defaults to run.task of the settings.")
@click.option("--split", "splits", type=click.Choice(SPLITS), multiple=True,
              help="Split(s) to generate; all splits if omitted.")
@click.option("--count", type=click.IntRange(min=1), default=None,
              help="Episodes per split; defaults to dataset.<split>_count of the settings.")
@click.option("-o", "--output-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Dataset directory; defaults to run.dataset_dir of the settings.")
@exit_on_error
def gen_data(config: Path | None, seed: int | None, task: str | None, splits: tuple[str, ...], count: int | None,
             output_dir: Path | None):
    """
    Generates episode datasets, one <task>_<split>.json file per split.

    Generation only depends on the seed and the settings: running it twice gives byte-identical files.
    """
    settings = resolve_settings(config, seed)
    task = task or settings.run.task
    output_dir = output_dir or Path(settings.run.dataset_dir)
    for split in splits or SPLITS:
        n = count if count is not None else getattr(settings.dataset, f"{split}_count")
        episodes = generate_dataset(task, split, n, settings.run.seed, settings)
        write_dataset(dataset_path(output_dir, task, split), episodes, task, split, settings.run.seed)


@cli_main.command()
@config_option
@seed_option
@click.option("--run-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Run directory; defaults to run.run_dir of the settings.")
@exit_on_error
def train(config: Path | None, seed: int | None, run_dir: Path | None):
    """
    Trains the configured model variant on the task's train split.

    The run directory receives a copy of all settings (config.toml), CSV logs of every update and evaluation,
    checkpoints and the trajectory logs of the validation episodes. Exits with status 3 if the loss diverges.
    """
    settings = resolve_settings(config, seed)
    if run_dir is not None:
        settings = settings.model_copy(update={"run": settings.run.model_copy(update={"run_dir": str(run_dir)})})
    result = train_loop(settings)
    if result.evaluations:
        step, metrics = result.evaluations[-1]
        click.echo(f"Finished after {step} steps: SR {metrics.sr:.1f}%, FDT {metrics.fdt:.3f} m, "
                   f"SPL {metrics.spl:.3f}")


def _load_run(run_dir: Path, checkpoint: str) -> tuple[Settings, InteractiveNavAgent, LrSchedule]:
    settings = load_settings_from_toml(run_dir / "config.toml")
    agent = InteractiveNavAgent(settings, len(settings.dataset.categories), np.random.default_rng(settings.run.seed))
    schedule = LrSchedule()
    checkpoint_path = run_dir / "checkpoints" / checkpoint
    if not checkpoint_path.exists():
        raise FileNotFoundError(f"Checkpoint {checkpoint_path} does not exist")
    load_checkpoint(checkpoint_path, agent.store, schedule)
    return settings, agent, schedule


@cli_main.command("eval")
@click.argument(
    "run_dirs",
    nargs=-1,
    required=True,
    type=click.Path(exists=True, file_okay=False, dir_okay=True, readable=True, resolve_path=True, path_type=Path),
)
@click.option("--checkpoint", default="latest.npz", show_default=True,
              help="Checkpoint file name inside each run's checkpoints directory.")
@click.option("--split", type=click.Choice(SPLITS), default="test", show_default=True)
@click.option("--episodes", type=click.IntRange(min=1), default=None, help="Evaluate only the first N episodes.")
@click.option("--dataset-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Dataset directory; defaults to run.dataset_dir of each run.")
@click.option("--report", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the SR / FDT / SPL report to this .csv file.")
@click.option("--trajectory-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Write one JSON trajectory log per episode below this directory.")
@click.option("--greedy", is_flag=True, help="Take the most likely action instead of sampling.")
@exit_on_error
def evaluate(run_dirs: tuple[Path, ...], checkpoint: str, split: str, episodes: int | None, dataset_dir: Path | None,
             report: Path | None, trajectory_dir: Path | None, greedy: bool):
    """
    Evaluates trained runs on a split and reports SR, FDT and SPL.

    Each run directory is evaluated with its own config.toml and checkpoint. Runs sharing task and variant (for
    example the same configuration trained with different seeds) are pooled into one report row.
    """
    groups: dict[tuple[str, str], list] = {}
    for run_dir in run_dirs:
        settings, agent, schedule = _load_run(run_dir, checkpoint)
        directory = dataset_dir or Path(settings.run.dataset_dir)
        split_episodes = read_dataset(dataset_path(directory, settings.run.task, split))[:episodes]
        evaluation = evaluate_policy(
            agent, agent.store.snapshot(), split_episodes, settings, seed=settings.run.seed, greedy=greedy,
            trajectory_dir=None if trajectory_dir is None else trajectory_dir / run_dir.name)
        metrics = evaluation.metrics
        click.echo(f"{run_dir.name}: SR {metrics.sr:.1f}%, FDT {metrics.fdt:.3f} m, SPL {metrics.spl:.3f} "
                   f"({metrics.episodes} {split} episodes)")
        key = (settings.run.task, settings.run.variant)
        groups.setdefault(key, []).append((settings.run.seed, trained_steps(settings.train, schedule), evaluation))

    rows = []
    for (task, variant), runs in groups.items():
        per_run = [compute_metrics(e.results) for _, _, e in runs]
        rows.append({
            "task": task,
            "variant": variant,
            "SR": float(np.mean([m.sr for m in per_run])),
            "FDT": float(np.mean([m.fdt for m in per_run])),
            "SPL": float(np.mean([m.spl for m in per_run])),
            "seeds": " ".join(str(s) for s, _, _ in runs),
            "steps": min(steps for _, steps, _ in runs),
        })
    if report is not None:
        write_metrics_report(report, rows)


@cli_main.command()
@click.argument(
    "trajectory",
    nargs=1,
    type=click.Path(exists=True, file_okay=True, dir_okay=False, readable=True, resolve_path=True, path_type=Path),
)
@config_option
@click.option("-o", "--output-dir", type=click.Path(file_okay=False, path_type=Path), required=True,
              help="Directory receiving the frames and rewards.csv.")
@exit_on_error
def replay(trajectory: Path, config: Path | None, output_dir: Path):
    """
    Re-simulates a JSON trajectory log.

    Writes colour, depth, segmentation and keypoint-overlay frames (.ppm) for every step and rewards.csv with the
    reward and the shaping distance per step. Without --config the config.toml of the run the trajectory belongs
    to is used. Exits with status 1 if the re-simulated rewards differ from the logged ones.
    """
    run_dir = next((p for p in trajectory.parents if (p / "config.toml").is_file()), None)
    if run_dir is not None and output_dir.resolve().is_relative_to(run_dir):
        raise ValueError(f"Replay output must not be written into the run directory {run_dir}")
    settings = resolve_settings(config or (run_dir and run_dir / "config.toml"))
    document = read_trajectory(trajectory)
    rewards = replay_trajectory(document, settings, output_dir)
    if rewards != document.rewards:
        raise ValueError(f"Replayed rewards of {trajectory.name} differ from the logged rewards")
    click.echo(f"Replayed {len(rewards)} steps, rewards match the log")


@cli_main.command("dump-config")
@click.argument(
    "filepath",
    nargs=1,
    required=False,
    type=click.Path(exists=False, file_okay=True, dir_okay=False, resolve_path=True, path_type=Path),
)
@config_option
@seed_option
@exit_on_error
def dump_config(filepath: Path | None, config: Path | None, seed: int | None):
    """ Prints (or writes to FILEPATH) every setting with its effective value.

    Without --config all defaults are dumped. Changing values can be done by editing the written .toml file.
    """
    settings = resolve_settings(config, seed)
    if filepath is None:
        click.echo(toml.dumps(settings.model_dump()))
    else:
        write_settings_to_toml(filepath=filepath, settings=settings)


@cli_main.command("train-nie")
@config_option
@seed_option
@click.option("--transitions", type=click.IntRange(min=2), default=None,
              help="Transitions to collect; defaults to supervised.transitions of the settings.")
@click.option("-o", "--output-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Where the engine checkpoint and report go; defaults to run.run_dir of the settings.")
@exit_on_error
def train_nie(config: Path | None, seed: int | None, transitions: int | None, output_dir: Path | None):
    """
    Trains the interaction engine alone on random-policy transitions of the task's train split and compares its
    held-out keypoint error with the identity-prediction baseline.
    """
    settings = resolve_settings(config, seed)
    output_dir = output_dir or Path(settings.run.run_dir)
    episodes = read_dataset(dataset_path(Path(settings.run.dataset_dir), settings.run.task, "train"))
    data = collect_transitions(episodes, settings, count=transitions)
    rng = np.random.default_rng(settings.run.seed)
    model = SupervisedNie(settings, len(settings.dataset.categories), rng)
    model, result = train_nie_supervised(data, settings, rng, model)

    output_dir.mkdir(parents=True, exist_ok=True)
    write_settings_to_toml(output_dir / "nie_config.toml", settings)
    save_checkpoint(output_dir / "nie_supervised.npz", model.store)
    with open(output_dir / "nie_supervised_report.toml", "w") as f:
        toml.dump({"train_losses": result.train_losses, "heldout_l1": result.heldout_l1,
                   "identity_l1": result.identity_l1, "ratio": result.ratio}, f)
    click.echo(f"Held-out keypoint L1 {result.heldout_l1:.4f}, identity baseline {result.identity_l1:.4f} "
               f"(ratio {result.ratio:.3f})")


@cli_main.command()
@config_option
@click.option("--split", type=click.Choice(SPLITS), default="train", show_default=True)
@click.option("--count", type=click.IntRange(min=1), default=5, show_default=True)
@click.option("-o", "--output-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@exit_on_error
def keypoints(config: Path | None, split: str, count: int, output_dir: Path):
    """
    Renders the spawn view of the first episodes of a split and writes colour, depth, segmentation and corner
    overlay images (.ppm).
    """
    settings = resolve_settings(config)
    episodes = read_dataset(dataset_path(Path(settings.run.dataset_dir), settings.run.task, split))[:count]
    for index, episode in enumerate(episodes):
        env = InteractiveNavEnv([episode], settings)
        env.reset(seed=episode.seed)
        write_observation_images(output_dir, f"episode_{index:04d}", env.observation, env.keypoints)
        found = int(env.keypoints.presence.sum())
        logger.info(f"Episode {index}: keypoints for {found} categories")
