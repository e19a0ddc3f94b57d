"""End-to-end tests of the command-line interface via subprocess.

Each test spawns `python -m mbsched ...` exactly as a user would, then
inspects exit codes and the files written to the output directory. The
two-user reference scenario (heuristic objective 10, optimal 17) keeps the
expected numbers exact.
"""

import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

from conftest import (
    REFERENCE_BACKLOG,
    REFERENCE_CHANNEL_CSV,
    REFERENCE_RATES,
    REFERENCE_TRAFFIC_CSV,
)

REFERENCE_RATIO = 10 / 17

REFERENCE_TOML = """\
[scenario]
num_users = 2
num_bands = 2
num_ttis = 1
rate_table = [0, 1, 8, 9, 10, 10, 10, 10, 10, 10, 10, 10, 10, 10, 10, 10]

[scenario.cqi]
model = "trace-file"
path = "channel.csv"

[scenario.traffic]
model = "trace-file"
path = "traffic.csv"
"""

SEEDED_TOML = """\
[scenario]
num_users = 3
num_bands = 4
num_ttis = 12
seed = 7
initial_backlog = 300

[scenario.traffic]
model = "bernoulli-burst"
bits = 500
prob = 0.5
"""


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "mbsched", *args],
                          capture_output=True, text=True)


def write_reference_setup(dir_path, extra=""):
    (dir_path / "channel.csv").write_text(REFERENCE_CHANNEL_CSV)
    (dir_path / "traffic.csv").write_text(REFERENCE_TRAFFIC_CSV)
    path = dir_path / "run.toml"
    path.write_text(REFERENCE_TOML + extra)
    return str(path)


def write_seeded_setup(dir_path, extra=""):
    path = dir_path / "run.toml"
    path.write_text(SEEDED_TOML + extra)
    return str(path)


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


def read_summary(out_dir):
    with open(out_dir / "summary.json") as handle:
        return json.load(handle)


def non_timing_columns(rows):
    """Strip the per-phase timing columns from a metrics CSV table."""
    header = rows[0]
    keep = [i for i, name in enumerate(header) if not name.endswith("_us")]
    return [[row[i] for i in keep] for row in rows]


# ----------------------------------------------------------------------- twin


def test_twin_reference_run(tmp_path):
    config = write_reference_setup(tmp_path)
    out = tmp_path / "out"
    proc = run_cli("twin", "--config", config, "--out", str(out))
    assert proc.returncode == 0, proc.stderr

    rows = read_csv(out / "twin.csv")
    assert rows[0] == ["tti", "heur_obj", "opt_obj", "ratio"]
    assert rows[1][:3] == ["0", "10", "17"]
    assert abs(float(rows[1][3]) - REFERENCE_RATIO) < 1e-12

    heur = read_csv(out / "metrics_maxci.csv")
    opt = read_csv(out / "metrics_optimal.csv")
    assert heur[1][1] == "10" and opt[1][1] == "17"

    summary = read_summary(out)
    assert summary["command"] == "twin"
    assert summary["replications"] == 1
    assert len(summary["cumulative_ratios"]) == 1
    assert abs(summary["mean_cumulative_ratio"] - REFERENCE_RATIO) < 1e-12
    assert abs(summary["min_cumulative_ratio"] - REFERENCE_RATIO) < 1e-12
    assert "twin: 1 replication(s)" in proc.stdout


def test_twin_missing_config_exits_2(tmp_path):
    proc = run_cli("twin", "--config", str(tmp_path / "absent.toml"),
                   "--out", str(tmp_path / "out"))
    assert proc.returncode == 2
    assert "error:" in proc.stderr


def test_twin_malformed_toml_exits_2(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text("[scenario\nnum_users = 2\n")
    proc = run_cli("twin", "--config", str(config), "--out", str(tmp_path / "out"))
    assert proc.returncode == 2
    assert "error:" in proc.stderr


def test_twin_unwritable_output_dir_exits_2(tmp_path):
    config = write_reference_setup(tmp_path)
    blocker = tmp_path / "blocker"
    blocker.write_text("a regular file, not a directory\n")
    proc = run_cli("twin", "--config", config, "--out", str(blocker / "out"))
    assert proc.returncode == 2
    assert "error:" in proc.stderr


def test_twin_failing_external_backend_exits_3(tmp_path):
    extra = '\n[backend]\nkind = "external"\ncommand = "false {lp} {sol}"\n'
    config = write_reference_setup(tmp_path, extra)
    proc = run_cli("twin", "--config", config, "--out", str(tmp_path / "out"))
    assert proc.returncode == 3
    assert "solver error:" in proc.stderr


def test_twin_outputs_are_deterministic(tmp_path):
    config = write_seeded_setup(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli("twin", "--config", config, "--out", str(out1)).returncode == 0
    assert run_cli("twin", "--config", config, "--out", str(out2)).returncode == 0

    assert (out1 / "twin.csv").read_bytes() == (out2 / "twin.csv").read_bytes()
    for name in ("metrics_maxci.csv", "metrics_optimal.csv"):
        a = non_timing_columns(read_csv(out1 / name))
        b = non_timing_columns(read_csv(out2 / name))
        assert a == b


def test_twin_replications_write_subdirectories(tmp_path):
    config = write_reference_setup(tmp_path, "\n[run]\nreplications = 2\n")
    out = tmp_path / "out"
    proc = run_cli("twin", "--config", config, "--out", str(out))
    assert proc.returncode == 0, proc.stderr
    assert (out / "rep0" / "twin.csv").is_file()
    assert (out / "rep1" / "twin.csv").is_file()
    assert not (out / "twin.csv").exists()
    summary = read_summary(out)
    assert len(summary["cumulative_ratios"]) == 2
    # The reference scenario is fully trace-driven, so the seed stride
    # cannot change anything between replications.
    assert summary["cumulative_ratios"][0] == summary["cumulative_ratios"][1]


def test_twin_seed_override_controls_the_draws(tmp_path):
    config = write_seeded_setup(tmp_path)
    outs = [tmp_path / name for name in ("s7a", "s7b", "s8")]
    for out, seed in zip(outs, ("7", "7", "8")):
        proc = run_cli("twin", "--config", config, "--out", str(out), "--seed", seed)
        assert proc.returncode == 0, proc.stderr
    same_a = (outs[0] / "twin.csv").read_bytes()
    same_b = (outs[1] / "twin.csv").read_bytes()
    other = (outs[2] / "twin.csv").read_bytes()
    assert same_a == same_b
    assert same_a != other


def test_twin_parallel_jobs_match_serial(tmp_path):
    config = write_seeded_setup(tmp_path, "\n[run]\nreplications = 2\nseed_stride = 3\n")
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    assert run_cli("twin", "--config", config, "--out", str(serial),
                   "--jobs", "1").returncode == 0
    assert run_cli("twin", "--config", config, "--out", str(parallel),
                   "--jobs", "2").returncode == 0
    for rep in ("rep0", "rep1"):
        assert ((serial / rep / "twin.csv").read_bytes()
                == (parallel / rep / "twin.csv").read_bytes())
    assert (read_summary(serial)["cumulative_ratios"]
            == read_summary(parallel)["cumulative_ratios"])


def test_twin_rejects_zero_jobs(tmp_path):
    config = write_reference_setup(tmp_path)
    proc = run_cli("twin", "--config", config, "--out", str(tmp_path / "out"),
                   "--jobs", "0")
    assert proc.returncode == 2
    assert "--jobs" in proc.stderr


# ------------------------------------------------------------------ snapshots


def test_snapshots_reference_run(tmp_path):
    config = write_reference_setup(tmp_path)
    out = tmp_path / "out"
    proc = run_cli("snapshots", "--config", config, "--out", str(out))
    assert proc.returncode == 0, proc.stderr

    assert (out / "snapshots" / "snap_0.json").is_file()
    rows = read_csv(out / "snapshot_report.csv")
    assert rows[0] == ["tti", "heur_obj", "opt_obj", "ratio", "status"]
    assert rows[1][:3] == ["0", "10", "17"]
    assert abs(float(rows[1][3]) - REFERENCE_RATIO) < 1e-12
    assert rows[1][4] == "solved"

    summary = read_summary(out)
    assert summary["command"] == "snapshots"
    assert abs(summary["mean_cumulative_ratio"] - REFERENCE_RATIO) < 1e-12


def test_snapshots_failing_backend_marks_rows_unsolved(tmp_path):
    extra = '\n[backend]\nkind = "external"\ncommand = "false {lp} {sol}"\n'
    config = write_reference_setup(tmp_path, extra)
    out = tmp_path / "out"
    proc = run_cli("snapshots", "--config", config, "--out", str(out))
    assert proc.returncode == 0, proc.stderr

    rows = read_csv(out / "snapshot_report.csv")
    assert rows[1][4] == "unsolved"
    assert rows[1][2] == "" and rows[1][3] == ""
    # With no solved snapshot the heuristic is compared only against itself.
    assert read_summary(out)["mean_cumulative_ratio"] == 1.0
    # The snapshot itself is still exported for later offline solving.
    assert (out / "snapshots" / "snap_0.json").is_file()


# ---------------------------------------------------------------------- bench


BENCH_TOML = """\
[scenario]
num_users = 3
num_bands = 4
num_ttis = 5
seed = 11
initial_backlog = 400

[scenario.traffic]
bits = 200
"""


def test_bench_in_process_only(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text(BENCH_TOML)
    out = tmp_path / "out"
    proc = run_cli("bench", "--config", str(config), "--out", str(out))
    assert proc.returncode == 0, proc.stderr

    assert (out / "metrics_inprocess.csv").is_file()
    assert not (out / "metrics_external.csv").exists()
    rows = read_csv(out / "timing_report.csv")
    assert rows[0] == ["method", "phase", "mean_us", "total_us", "count"]
    assert len(rows) == 1 + 3
    assert [r[1] for r in rows[1:]] == ["creation", "solving", "reading"]
    assert all(r[0] == "in-process" for r in rows[1:])
    assert all(int(r[4]) == 5 for r in rows[1:])
    assert "bench rep0 in-process:" in proc.stdout


def test_bench_self_exec_compares_both_pathways(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text(BENCH_TOML + '\n[backend]\nkind = "self-exec"\n')
    out = tmp_path / "out"
    proc = run_cli("bench", "--config", str(config), "--out", str(out))
    assert proc.returncode == 0, proc.stderr

    inproc = read_csv(out / "metrics_inprocess.csv")
    external = read_csv(out / "metrics_external.csv")
    # Both pathways solve the same instances, so the objective columns match.
    assert [r[1] for r in inproc[1:]] == [r[1] for r in external[1:]]

    rows = read_csv(out / "timing_report.csv")
    assert len(rows) == 1 + 6
    assert {r[0] for r in rows[1:]} == {"in-process", "external"}

    summary = read_summary(out)
    objectives = summary["replications"][0]["objectives"]
    assert objectives["in-process"] == objectives["external"]
    assert "external" in proc.stdout


# ---------------------------------------------------------------------- solve


def build_lp_text(rates, backlog):
    from mbsched.lpformat import write_lp
    from mbsched.mbs import SnapshotInstance, build_ilp

    inst = SnapshotInstance(tti=0, rates=[list(r) for r in rates], backlog=list(backlog))
    return write_lp(build_ilp(inst))


def test_solve_minimal_unbounded_instance(tmp_path):
    from mbsched.scenario import UNBOUNDED

    lp_path = tmp_path / "problem.lp"
    lp_path.write_text(build_lp_text([[5]], [UNBOUNDED]))
    sol_path = tmp_path / "solution.sol"
    proc = run_cli("solve", "--lp", str(lp_path), "--out", str(sol_path))
    assert proc.returncode == 0, proc.stderr

    root = ET.parse(sol_path).getroot()
    assert root.tag == "CPLEXSolution"
    header = root.find("header")
    assert header.get("solutionStatusString") == "optimal"
    assert header.get("objectiveValue") == "5"
    values = {v.get("name"): v.get("value") for v in root.find("variables")}
    assert values == {"x_0_0": "1", "s_0": "5"}


def test_solve_reference_instance(tmp_path):
    lp_path = tmp_path / "problem.lp"
    lp_path.write_text(build_lp_text(REFERENCE_RATES, REFERENCE_BACKLOG))
    sol_path = tmp_path / "solution.sol"
    proc = run_cli("solve", "--lp", str(lp_path), "--out", str(sol_path))
    assert proc.returncode == 0, proc.stderr
    header = ET.parse(sol_path).getroot().find("header")
    assert header.get("objectiveValue") == "17"


def test_solve_malformed_lp_exits_2(tmp_path):
    lp_path = tmp_path / "problem.lp"
    lp_path.write_text("this is not an lp file\n")
    proc = run_cli("solve", "--lp", str(lp_path), "--out", str(tmp_path / "s.sol"))
    assert proc.returncode == 2
    assert "error:" in proc.stderr


def test_solve_missing_lp_exits_2(tmp_path):
    proc = run_cli("solve", "--lp", str(tmp_path / "absent.lp"),
                   "--out", str(tmp_path / "s.sol"))
    assert proc.returncode == 2
    assert "error:" in proc.stderr
