import os

import pandas as pd
import pytest
import yaml

from gtvr.src.engine import MetricsTrace, epochs_to_threshold
from gtvr.src.run_experiment import EXIT_CONFIG, EXIT_DIVERGED, EXIT_OK, main


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "dsgd.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "graph": {"topology": "exponential", "n": 5},
                "data": {"objective": "quadratic", "samples_per_node": 6, "p": 3},
                "algorithm": {"kind": "dsgd", "alpha": 0.05},
                "run": {"iterations": 40, "cadence": 10},
                "output": {"name": "dsgd"},
            }
        )
    )
    return str(path)


def test_run_writes_outputs(config_file, tmp_path):
    out = str(tmp_path / "out")
    assert main(["run", "--config", config_file, "--out", out]) == EXIT_OK
    assert os.path.exists(os.path.join(out, "dsgd.csv"))
    assert os.path.exists(os.path.join(out, "dsgd.json"))
    assert os.path.exists(os.path.join(out, "logs", "dsgd.log"))


def test_reruns_are_bit_identical(config_file, tmp_path):
    for name in ("a", "b"):
        main(["run", "--config", config_file, "--out", str(tmp_path / name), "--seed", "3"])
    with open(tmp_path / "a" / "dsgd.csv") as a, open(tmp_path / "b" / "dsgd.csv") as b:
        assert a.read() == b.read()


def test_invalid_step_size_exits_before_running(config_file, tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--config", config_file, "--out", str(out), "--set", "algorithm.alpha=0"])
    assert code == EXIT_CONFIG
    assert not (out / "dsgd.csv").exists()


def test_unknown_option_is_a_config_error(config_file):
    assert main(["run", "--config", config_file, "--bogus"]) == EXIT_CONFIG
    assert main(["--help"]) == EXIT_OK


def test_divergence_exit_code(config_file, tmp_path):
    out = tmp_path / "out"
    code = main(
        ["run", "--config", config_file, "--out", str(out), "--set", "alpha=5.0", "--set", "iterations=2000"]
    )
    assert code == EXIT_DIVERGED
    assert (out / "dsgd.csv").exists()


def test_sweep_isolates_failures(config_file, tmp_path):
    out = tmp_path / "sweep"
    code = main(
        ["sweep", "--config", config_file, "--out", str(out), "--axis", "alpha", "--values", "0.05", "5.0",
         "--set", "iterations=2000", "--set", "cadence=100"]
    )
    assert code == EXIT_OK
    summary = pd.read_csv(out / "dsgd_sweep.csv")
    assert summary["status"].tolist()[0] == "ok"
    assert summary["status"].tolist()[1].startswith("error (2)")
    assert summary["diverged"].tolist() == [False, True]
    assert (out / "dsgd_0_0.05.csv").exists()


def test_sweep_validates_every_member_first(config_file, tmp_path):
    out = tmp_path / "sweep"
    code = main(
        ["sweep", "--config", config_file, "--out", str(out), "--axis", "alpha", "--values", "0.05", "0"]
    )
    assert code == EXIT_CONFIG
    assert not (out / "dsgd_0_0.05.csv").exists()


def test_method_sweep_runs_every_kind(config_file, tmp_path):
    out = tmp_path / "sweep"
    kinds = ["gt_saga", "gt_svrg", "dsgd", "gt_dsgd", "dsa", "davrg"]
    code = main(
        ["sweep", "--config", config_file, "--out", str(out), "--axis", "kind", "--values", *kinds,
         "--set", "topology=complete", "--set", "svrg_T=6"]
    )
    assert code == EXIT_OK
    summary = pd.read_csv(out / "dsgd_sweep.csv")
    assert summary["value"].tolist() == kinds
    assert summary["status"].tolist() == ["ok"] * len(kinds)


def test_method_sweep_reports_directed_graph_for_corrected_kinds(config_file, tmp_path):
    out = tmp_path / "sweep"
    code = main(
        ["sweep", "--config", config_file, "--out", str(out), "--axis", "kind", "--values", "gt_saga", "dsa"]
    )
    assert code == EXIT_OK
    status = pd.read_csv(out / "dsgd_sweep.csv")["status"].tolist()
    assert status[0] == "ok"
    assert status[1].startswith("error (1)")
    assert "symmetric" in status[1]


def test_plot_command(config_file, tmp_path):
    out = str(tmp_path / "out")
    main(["run", "--config", config_file, "--out", out])
    figures = tmp_path / "figures"
    assert main(["plot", os.path.join(out, "dsgd.csv"), "--out", str(figures)]) == EXIT_OK
    assert (figures / "gap.svg").exists()
    assert not (figures / "tracking_err.svg").exists()
    assert main(["plot", str(tmp_path / "missing.csv"), "--out", str(figures)]) == EXIT_CONFIG


def test_worker_count_does_not_change_traces(config_file, tmp_path):
    for jobs in ("1", "8"):
        out = str(tmp_path / jobs)
        main(
            ["run", "--config", config_file, "--out", out, "--jobs", jobs, "--set", "kind=gt_saga"]
        )
    with open(tmp_path / "1" / "dsgd.csv") as a, open(tmp_path / "8" / "dsgd.csv") as b:
        assert a.read() == b.read()


def test_topology_sweep_summary(config_file, tmp_path):
    out = tmp_path / "sweep"
    code = main(
        ["sweep", "--config", config_file, "--out", str(out), "--axis", "topology",
         "--values", "ring", "exponential", "complete", "--threshold", "1e-6",
         "--set", "n=10", "--set", "kind=gt_saga", "--set", "iterations=400"]
    )
    assert code == EXIT_OK
    summary = pd.read_csv(out / "dsgd_sweep.csv")
    assert summary["sigma"].to_numpy() == pytest.approx([0.951057, 0.6, 0.0], abs=1e-6)
    for _, row in summary.iterrows():
        trace = MetricsTrace.from_csv(row["trace"])
        expected = epochs_to_threshold(trace, 1e-6)
        if expected is None:
            assert pd.isna(row["epochs_to_threshold"])
        else:
            assert row["epochs_to_threshold"] == pytest.approx(expected)


def test_verify_command(tmp_path):
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "logs" / "verify.log").exists()


def test_speedup_command(config_file, tmp_path):
    out = tmp_path / "speedup"
    code = main(
        ["speedup", "--config", config_file, "--out", str(out), "--nodes", "1", "2",
         "--threshold", "1e-4", "--set", "kind=gt_saga", "--set", "iterations=300"]
    )
    assert code == EXIT_OK
    table = pd.read_csv(out / "dsgd_speedup.csv")
    assert table["n"].tolist() == [1, 2]
