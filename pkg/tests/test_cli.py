"""End-to-end command tests; everything runs in-process through main()."""

import os
import shutil

import numpy as np
import pytest

from qgshear.cli import main
from qgshear.ordering import mincom_order, read_ordering
from qgshear.grid import build_grid, build_operators
from qgshear.arakawa import build_template
from qgshear.ordering import commutation_weights

SHORT = [
    "N=8",
    "tau=0.1",
    "T0=1",
    "T_end=5",
    "diag_every=10",
    "checkpoint_every=20",
    "seed=0",
]


def run_cli(*args):
    return main(list(args))


def sets(dirpath, overrides):
    out = []
    for item in overrides + [f"output_dir={dirpath}"]:
        out += ["--set", item]
    return out


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def diag_times(path):
    ts = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("t,"):
                continue
            ts.append(float(line.split(",")[0]))
    return ts


def test_run_writes_expected_artifacts(tmp_path):
    d = tmp_path / "run"
    assert run_cli("run", *sets(d, SHORT)) == 0
    assert (d / "config_resolved.txt").exists()
    assert (d / "ordering_N8_MinCom_i1.txt").exists()
    assert (d / "state_20.csv").exists()
    assert (d / "state_40.csv").exists()
    assert (d / "state_50.csv").exists()
    # completed run: summary holds the single end-of-run statistics row
    summary = (d / "summary.txt").read_text()
    assert summary.splitlines()[-1].startswith("5 ")
    text = (d / "diagnostics.csv").read_text()
    assert text.startswith("# generator=numpy.default_rng(PCG64) seed=0\n")
    assert diag_times(d / "diagnostics.csv") == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("run", *sets(a, SHORT)) == 0
    assert run_cli("run", *sets(b, SHORT)) == 0
    assert read(a / "diagnostics.csv") == read(b / "diagnostics.csv")
    assert read(a / "state_50.csv") == read(b / "state_50.csv")


def test_seed_changes_trajectory(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("run", *sets(a, SHORT)) == 0
    assert run_cli("run", *sets(b, SHORT[:-1] + ["seed=1"])) == 0
    assert read(a / "diagnostics.csv") != read(b / "diagnostics.csv")


def test_capped_run_plus_resume_matches_straight_run(tmp_path):
    straight, capped = tmp_path / "s", tmp_path / "c"
    assert run_cli("run", *sets(straight, SHORT)) == 0
    assert run_cli("run", *sets(capped, SHORT + ["max_steps=30"])) == 0
    assert (capped / "state_30.csv").exists()
    assert not (capped / "summary.txt").exists()  # stopped before T_end
    assert (
        run_cli("resume", str(capped / "state_30.csv"), "--set", "max_steps=none")
        == 0
    )
    for name in ("diagnostics.csv", "marks.csv", "state_50.csv", "summary.txt"):
        assert read(capped / name) == read(straight / name), name


def test_resume_from_mid_checkpoint_is_idempotent(tmp_path):
    d = tmp_path / "run"
    assert run_cli("run", *sets(d, SHORT)) == 0
    before = {n: read(d / n) for n in ("diagnostics.csv", "state_50.csv", "summary.txt")}
    # re-running the tail from step 20 must truncate and reproduce everything
    assert run_cli("resume", str(d / "state_20.csv")) == 0
    for name, blob in before.items():
        assert read(d / name) == blob, name
    # resuming from the final state is a no-op apart from rewritten artifacts
    assert run_cli("resume", str(d / "state_50.csv")) == 0
    assert read(d / "summary.txt") == before["summary.txt"]


def test_resume_rejects_foreign_checkpoint(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("run", *sets(a, SHORT)) == 0
    assert run_cli("run", *sets(b, SHORT[:-1] + ["seed=1"])) == 0
    shutil.copy(b / "state_50.csv", a / "foreign.csv")
    assert run_cli("resume", str(a / "foreign.csv")) == 2


def test_resume_missing_checkpoint(tmp_path):
    assert run_cli("resume", str(tmp_path / "state_10.csv")) == 2


def test_bad_config_exits_with_config_error(tmp_path):
    assert run_cli("run", "--set", f"output_dir={tmp_path}", "--set", "N=7") == 2
    assert run_cli("run", "--set", f"output_dir={tmp_path}", "--set", "bogus=1") == 2
    assert run_cli("run", "--set", f"output_dir={tmp_path}", "--set", "N=64") == 2


def test_unreachable_initial_targets_exit_nonconvergence(tmp_path):
    code = run_cli("run", *sets(tmp_path / "r", SHORT + ["E_target=50"]))
    assert code == 4


def test_blowup_detected_and_reported(tmp_path):
    d = tmp_path / "blow"
    over = [
        "N=8",
        "scheme=J0",
        "ordering_tag=Plain",
        "tau=5",
        "T0=5",
        "T_end=5000",
        "diag_every=1",
        "checkpoint_every=1000000",
        "seed=0",
    ]
    assert run_cli("run", *sets(d, over)) == 3
    text = (d / "diagnostics.csv").read_text()
    assert "# blowup t=" in text
    assert "BLOWUP" in (d / "summary.txt").read_text()


def test_ordering_file_is_reused(tmp_path):
    d = tmp_path / "run"
    assert run_cli("run", *sets(d, SHORT)) == 0
    path = d / "ordering_N8_MinCom_i1.txt"
    os.utime(path, (1, 1))
    assert run_cli("resume", str(d / "state_50.csv")) == 0
    assert path.stat().st_mtime == 1  # untouched, so it was read not rebuilt


def test_predict_command(tmp_path, capsys):
    out = tmp_path / "table.txt"
    assert run_cli("predict", "--sizes", "6,8", "--out", str(out)) == 0
    text = capsys.readouterr().out
    assert "6 -0.3995" in text
    assert "8 -0.5646" in text
    assert out.read_text() == text
    assert run_cli("predict", "--sizes", "six") == 2
    assert run_cli("predict", "--sizes", "8", "--energy", "-1") == 2


def test_order_command_writes_readable_file(tmp_path):
    out = tmp_path / "ord.txt"
    assert run_cli("order", "--N", "8", "--tag", "MinCom", "--i1", "1", "--out", str(out)) == 0
    n, ordv = read_ordering(out)
    weights = commutation_weights(build_template("JEZ", build_operators(build_grid(8))))
    assert n == 8
    assert ordv.tag == "MinCom"
    assert np.array_equal(ordv.perm, mincom_order(weights, 0).perm)
    assert run_cli("order", "--N", "7", "--out", str(out)) == 2


def test_verify_command_passes(capsys):
    assert run_cli("verify") == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5
    assert "FAIL" not in out
