"""End-to-end runs on a small synthetic turbine with a reduced search budget."""

import re

import numpy as np
import pytest

from scadafs.cli import main
from scadafs.config import Settings
from scadafs.mlp import read_model
from scadafs.pipeline import HEURISTIC_FEATURES, inner_split, run_comparison, run_heuristic, run_pipeline
from scadafs.sbfs import cap_normal_rows
from scadafs.scada import ORIGINAL_CHANNELS, ingest_csv, read_status_csv, write_csv, write_status_csv
from scadafs.synthgen import generate

SMALL = {
    "seed": "5",
    "synth.n_rows": "3000",
    "synth.fault_count": "8",
    "filter.k_per_method": "4",
    "filter.relief_samples": "60",
    "wrapper.max_epochs": "80",
    "final.hidden_sizes": "2-3",
    "final.activations": "tanh",
    "final.restarts": "1",
    "final.max_epochs": "100",
}
ARTIFACTS = ("catalog.txt", "rankings.tsv", "candidates.txt", "subset.txt", "trace.tsv", "model.txt", "scan.tsv", "report.tsv")
FIGURES = ("rankings.png", "trace.png", "metrics.png")


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    table, events = generate(Settings.resolve(SMALL).synth())
    write_csv(table, root / "scada.csv")
    write_status_csv(events, root / "status.csv")
    return root


def settings_for(data, out, **extra):
    return Settings.resolve(SMALL, {"data": str(data / "scada.csv"), "status": str(data / "status.csv"), "output_dir": str(out)}, extra)


def cli_args(data, out, *extra):
    args = [f"--{k}={v}" for k, v in SMALL.items()]
    return [*args, "--data", str(data / "scada.csv"), "--status", str(data / "status.csv"), "--output_dir", str(out), *extra]


@pytest.fixture(scope="module")
def first_run(data, tmp_path_factory):
    out = tmp_path_factory.mktemp("run1")
    return run_pipeline(settings_for(data, out)), out


def test_pipeline_smoke(first_run):
    result, out = first_run
    for name in ARTIFACTS + FIGURES:
        assert (out / name).exists(), name
    assert result.subset
    for v in (result.report.recall, result.report.precision, result.report.f_score):
        assert v is not None
    stamp = f"# {settings_for(out, out).stamp()}"  # digest ignores paths
    for name in ARTIFACTS:
        if name != "model.txt":
            assert (out / name).read_text().splitlines()[0] == stamp, name
    assert (out / "model.txt").read_text().startswith(stamp)


def test_byte_identical_rerun(first_run, data, tmp_path):
    _, out = first_run
    run_pipeline(settings_for(data, tmp_path))
    for name in ARTIFACTS + FIGURES:
        assert (out / name).read_bytes() == (tmp_path / name).read_bytes(), name


def test_standalone_stages_reproduce_pipeline(first_run, data, tmp_path, capsys):
    _, out = first_run
    for cmd in ("construct", "rank", "select", "train", "evaluate"):
        assert main([cmd, *cli_args(data, tmp_path)]) == 0, cmd
    assert "total=377" in capsys.readouterr().out
    for name in ARTIFACTS + FIGURES:
        assert (out / name).read_bytes() == (tmp_path / name).read_bytes(), name


def test_stage_needs_its_inputs(data, tmp_path, capsys):
    assert main(["select", *cli_args(data, tmp_path)]) == 3
    assert "run 'rank' first" in capsys.readouterr().err


def test_no_test_leakage(first_run, data, tmp_path):
    """Shifting every test-period value must not move anything fitted on training rows."""
    result, out = first_run
    table = ingest_csv(data / "scada.csv", ORIGINAL_CHANNELS)
    n_train = len(result.train)
    values = table.values.copy()
    values[n_train:] = values[n_train:] * 3.0 + 500.0
    shifted = tmp_path / "data"
    shifted.mkdir()
    write_csv(type(table)(table.start_time, table.channel_ids, values), shifted / "scada.csv")
    write_status_csv(read_status_csv(data / "status.csv"), shifted / "status.csv")
    run_pipeline(settings_for(shifted, tmp_path / "out"))
    for name in ("rankings.tsv", "candidates.txt", "subset.txt", "trace.tsv", "model.txt", "scan.tsv"):
        assert (out / name).read_bytes() == (tmp_path / "out" / name).read_bytes(), name
    # standardization parameters equal a recomputation from training rows alone
    settings = settings_for(data, out)
    (Xf, yf), _ = inner_split(result.train, settings["wrapper.validation_fraction"], result.best.subset)
    Xf = Xf[cap_normal_rows(yf, settings["final.max_normal_rows"], settings.seed)]
    model = read_model(out / "model.txt")
    np.testing.assert_allclose(model.mean, Xf.mean(axis=0), rtol=1e-12)
    np.testing.assert_allclose(model.std, Xf.std(axis=0), rtol=1e-12)


def test_missing_data_path_names_ingest(tmp_path, capsys):
    code = main(["pipeline", "--output_dir", str(tmp_path / "o"), "--data", str(tmp_path / "nope.csv"), "--status", str(tmp_path / "s.csv")])
    assert code == 4
    assert "stage 'ingest' failed" in capsys.readouterr().err


def test_failed_stage_marks_partial_artifacts(data, tmp_path, capsys):
    # no fault events at all: ranking cannot proceed
    quiet = tmp_path / "quiet"
    quiet.mkdir()
    (quiet / "status.csv").write_text("timestamp,code,is_heating_fault\n")
    code = main(["pipeline", *cli_args(data, tmp_path / "o"), "--status", str(quiet / "status.csv")])
    assert code == 4
    assert "stage 'rank' failed: degenerate labels" in capsys.readouterr().err
    assert (tmp_path / "o" / "catalog.txt.failed").exists()
    assert not (tmp_path / "o" / "catalog.txt").exists()


def test_heuristic_search_never_loses_to_its_start(data, tmp_path):
    result = run_heuristic(settings_for(data, tmp_path))
    assert result.candidates == list(HEURISTIC_FEATURES) and len(HEURISTIC_FEATURES) == 10
    assert result.trace.steps[0].subset == HEURISTIC_FEATURES
    assert result.best.criterion >= result.trace.steps[0].criterion
    off = run_heuristic(settings_for(data, tmp_path / "plain"), floating=False)
    assert off.trace.steps[0].criterion == result.trace.steps[0].criterion
    assert not any(s.action == "conditional_include" for s in off.trace.steps)


def test_comparison_table(data, tmp_path):
    cmp = run_comparison(settings_for(data, tmp_path))
    lines = (tmp_path / "comparison.tsv").read_text().splitlines()
    assert lines[0].startswith("# master_seed=5")
    assert lines[1] == "method\trecall\tprecision\tf_score\tfalse_alarm_minutes"
    assert [ln.split("\t")[0] for ln in lines[2:]] == ["proposed", "heuristic"]
    assert all(len(ln.split("\t")) == 5 for ln in lines[1:])
    assert cmp.table() == "\n".join(lines[1:]) + "\n"
    assert (tmp_path / "comparison.png").exists()
    assert (tmp_path / "proposed" / "report.tsv").exists() and (tmp_path / "heuristic" / "report.tsv").exists()


class TestCli:
    def test_generate(self, tmp_path, capsys):
        assert main(["generate", "--output_dir", str(tmp_path), "--synth.n_rows", "200", "--synth.fault_count", "2", "--seed", "3"]) == 0
        assert re.search(r"wrote 200 rows .* \(2 faults\)", capsys.readouterr().out)
        first = (tmp_path / "scada.csv").read_bytes()
        assert first.startswith(b"# master_seed=3")
        assert main(["generate", "--output_dir", str(tmp_path), "--synth.n_rows", "200", "--synth.fault_count", "2", "--seed", "3"]) == 0
        assert (tmp_path / "scada.csv").read_bytes() == first

    def test_config_file_and_flag_precedence(self, tmp_path):
        conf = tmp_path / "gen.conf"
        conf.write_text(f"output_dir = {tmp_path / 'a'}\nsynth.n_rows = 100\nsynth.fault_count = 2\nseed = 1\n")
        assert main(["generate", "--config", str(conf), "--synth.n_rows", "150"]) == 0
        assert len(read_status_csv(tmp_path / "a" / "status.csv")) >= 1
        assert ingest_csv(tmp_path / "a" / "scada.csv").row_count == 150

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["explode"],
            ["pipeline", "--no.such.key", "1"],
            ["pipeline", "--seed", "abc"],
            ["pipeline", "--split.train_fraction", "0"],
        ],
    )
    def test_argument_errors_exit_2(self, argv, capsys):
        assert main(argv) == 2
        assert "error" in capsys.readouterr().err

    def test_bad_config_file_exit_2(self, tmp_path):
        conf = tmp_path / "bad.conf"
        conf.write_text("not a pair\n")
        assert main(["generate", "--config", str(conf)]) == 2

    def test_data_error_exit_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("timestamp," + ",".join(ORIGINAL_CHANNELS) + "\nyesterday" + ",1" * len(ORIGINAL_CHANNELS) + "\n")
        (tmp_path / "s.csv").write_text("timestamp,code,is_heating_fault\n")
        code = main(["construct", "--data", str(bad), "--status", str(tmp_path / "s.csv"), "--output_dir", str(tmp_path / "o")])
        assert code == 3
        assert "line 2" in capsys.readouterr().err

    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit) as exit_info:
            main(["--help"])
        assert exit_info.value.code == 0
        out = capsys.readouterr().out
        for cmd in ("generate", "construct", "rank", "select", "train", "evaluate", "pipeline", "compare"):
            assert cmd in out
