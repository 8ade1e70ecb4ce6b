import pytest
from click.testing import CliRunner

from nie_nav_pipeline.cli import cli_main
from nie_nav_pipeline.settings import Settings, load_settings_from_toml, write_settings_to_toml


@pytest.fixture
def config_file(small_settings, tmp_path):
    run = small_settings.run.model_copy(update={"run_dir": str(tmp_path / "run"),
                                                "dataset_dir": str(tmp_path / "data")})
    filepath = tmp_path / "small.toml"
    write_settings_to_toml(filepath, small_settings.model_copy(update={"run": run}))
    return filepath


def test_dump_config_writes_the_defaults(tmp_path):
    result = CliRunner().invoke(cli_main, ["dump-config", str(tmp_path / "all.toml")])
    assert result.exit_code == 0, result.output
    assert load_settings_from_toml(tmp_path / "all.toml") == Settings()


def test_seed_flag_and_environment_variable(tmp_path, config_file):
    runner = CliRunner()
    result = runner.invoke(cli_main, ["dump-config", str(tmp_path / "flag.toml"), "-c", str(config_file), "-s", "42"])
    assert result.exit_code == 0, result.output
    assert load_settings_from_toml(tmp_path / "flag.toml").run.seed == 42

    result = runner.invoke(cli_main, ["dump-config", str(tmp_path / "env.toml")], env={"NIE_NAV_SEED": "7"})
    assert result.exit_code == 0, result.output
    assert load_settings_from_toml(tmp_path / "env.toml").run.seed == 7


def test_gen_data_is_byte_reproducible(tmp_path, config_file):
    runner = CliRunner()
    for name in ("first", "second"):
        result = runner.invoke(cli_main, ["gen-data", "-c", str(config_file), "-o", str(tmp_path / name)])
        assert result.exit_code == 0, result.output
    files = sorted(p.name for p in (tmp_path / "first").iterdir())
    assert files == ["obsnav_test.json", "obsnav_train.json", "obsnav_val.json"]
    for name in files:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()


def test_gen_data_of_a_single_split(tmp_path, config_file):
    result = CliRunner().invoke(cli_main, ["gen-data", "-c", str(config_file), "--task", "pointnav", "--split", "val",
                                           "--count", "3", "-o", str(tmp_path / "data")])
    assert result.exit_code == 0, result.output
    assert [p.name for p in (tmp_path / "data").iterdir()] == ["pointnav_val.json"]


def test_train_without_a_dataset_fails(tmp_path, config_file):
    result = CliRunner().invoke(cli_main, ["train", "-c", str(config_file)])
    assert result.exit_code == 1
    assert not (tmp_path / "run").exists()


def test_eval_of_a_missing_run_is_a_usage_error(tmp_path):
    result = CliRunner().invoke(cli_main, ["eval", str(tmp_path / "nothing")])
    assert result.exit_code == 2


def test_train_then_eval_writes_a_report(tmp_path, config_file):
    runner = CliRunner()
    assert runner.invoke(cli_main, ["gen-data", "-c", str(config_file)]).exit_code == 0
    result = runner.invoke(cli_main, ["train", "-c", str(config_file)])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "run" / "config.toml").exists()

    report = tmp_path / "report.csv"
    result = runner.invoke(cli_main, ["eval", str(tmp_path / "run"), "--split", "val", "--episodes", "1",
                                      "--report", str(report), "--greedy"])
    assert result.exit_code == 0, result.output
    header, row = report.read_text().splitlines()
    assert header == "task,variant,SR,FDT,SPL,seeds,steps"
    assert row.startswith("obsnav,nie,")
    assert row.endswith(",3,16")


def test_keypoints_writes_images(tmp_path, config_file):
    runner = CliRunner()
    assert runner.invoke(cli_main, ["gen-data", "-c", str(config_file), "--split", "train"]).exit_code == 0
    result = runner.invoke(cli_main, ["keypoints", "-c", str(config_file), "--count", "2", "-o", str(tmp_path / "img")])
    assert result.exit_code == 0, result.output
    written = sorted(p.name for p in (tmp_path / "img").iterdir())
    assert len(written) == 8
    assert written[0] == "episode_0000_color.ppm"
