"""End-to-end tests for the command line pipeline driver."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mechrom import __version__
from mechrom.cli import (
    DEFAULT_LAMBDA_GRID,
    UsageError,
    load_config,
    main,
)
from mechrom.model import build_mass_spring_chain, save_matrix
from mechrom.snapshots import load_csv

# A deliberately tiny experiment so full pipeline runs stay fast: a four
# mass chain driven at the first node, ten training columns, twenty one
# test snapshots.
BASE = {
    "system": {
        "kind": "chain",
        "n": "4",
        "masses": "1.0",
        "stiffnesses": "10.0",
        "alpha_r": "0.02",
        "beta_r": "0.005",
    },
    "integrator": {"dt": "0.02"},
    "input": {"waveform": "sine", "frequency": "1.0"},
    "training": {"t_end": "0.2"},
    "testing": {"t_end": "0.4"},
    "basis": {"rank": "2"},
}


def merged(updates=None, drop=None):
    sections = {name: dict(keys) for name, keys in BASE.items()}
    for name, keys in (updates or {}).items():
        sections.setdefault(name, {}).update(keys)
    for name, key in drop or []:
        del sections[name][key]
    return sections


def write_config(directory, sections, name="exp.ini"):
    lines = []
    for section, keys in sections.items():
        lines.append(f"[{section}]")
        for key, value in keys.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    path = directory / name
    path.write_text("\n".join(lines), encoding="ascii")
    return str(path)


def config_file(directory, updates=None, drop=None, name="exp.ini"):
    return write_config(directory, merged(updates, drop), name=name)


def tree_bytes(root, skip=()):
    """Relative path -> raw bytes for every file under root."""
    out = {}
    for dirpath, _, files in os.walk(root):
        for fname in files:
            if fname in skip:
                continue
            full = os.path.join(dirpath, fname)
            with open(full, "rb") as fh:
                out[os.path.relpath(full, root)] = fh.read()
    return out


def read_lines(path):
    with open(path, "r", encoding="ascii") as fh:
        return fh.read().splitlines()


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """One completed pipeline run on the tiny chain experiment."""
    root = tmp_path_factory.mktemp("small_run")
    cfg = config_file(root)
    out = root / "artifacts"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    return cfg, out


class TestLoadConfig:
    def test_chain_defaults_resolved(self, tmp_path):
        cfg = load_config(config_file(tmp_path))
        assert cfg.kind == "chain"
        assert cfg.n == 4
        assert cfg.masses == [1.0] * 4
        assert cfg.stiffnesses == [10.0] * 5
        assert cfg.input_nodes == [0]
        assert cfg.dt == 0.02
        assert cfg.gamma is None and cfg.beta is None and cfg.alpha == 0.0
        assert cfg.waveform == "sine"
        assert cfg.frequency == 1.0 and cfg.angular_frequency is None
        assert cfg.train_t_end == 0.2 and cfg.test_t_end == 0.4
        assert cfg.rank == 2 and cfg.tol is None and cfg.energy is None
        assert cfg.methods == ["pod", "opinf", "copinf"]
        assert cfg.lambda_grid == DEFAULT_LAMBDA_GRID
        assert cfg.omega == 1e-8
        assert cfg.directory == "" and cfg.seed == 0

    def test_explicit_lists_kept(self, tmp_path):
        cfg = load_config(config_file(tmp_path, {
            "system": {"masses": "1.0, 2.0, 3.0, 4.0",
                       "stiffnesses": "1, 2, 3, 4, 5",
                       "input_nodes": "1, 3"},
        }))
        assert cfg.masses == [1.0, 2.0, 3.0, 4.0]
        assert cfg.stiffnesses == [1.0, 2.0, 3.0, 4.0, 5.0]
        assert cfg.input_nodes == [1, 3]

    def test_unknown_section_rejected(self, tmp_path):
        path = config_file(tmp_path, {"turbulence": {"model": "none"}})
        with pytest.raises(UsageError, match=r"unknown config section \[turbulence\]"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = config_file(tmp_path, {"system": {"springiness": "1"}})
        with pytest.raises(UsageError,
                           match=r"unknown key 'springiness' in section \[system\]"):
            load_config(path)

    def test_text_without_section_is_malformed(self, tmp_path):
        path = tmp_path / "broken.ini"
        path.write_text("dt = 0.1\n", encoding="ascii")
        with pytest.raises(UsageError, match="malformed config"):
            load_config(str(path))

    def test_missing_file_reports_path(self, tmp_path):
        missing = str(tmp_path / "nope.ini")
        with pytest.raises(UsageError, match="cannot read config"):
            load_config(missing)

    def test_kind_validated(self, tmp_path):
        path = config_file(tmp_path, {"system": {"kind": "beam"}})
        with pytest.raises(UsageError, match="kind must be chain or files"):
            load_config(path)

    def test_chain_requires_dimension(self, tmp_path):
        path = config_file(tmp_path, drop=[("system", "n")])
        with pytest.raises(UsageError, match="n is required for kind = chain"):
            load_config(path)

    def test_dimension_must_be_positive(self, tmp_path):
        path = config_file(tmp_path, {"system": {"n": "0"}})
        with pytest.raises(UsageError, match="n must be >= 1"):
            load_config(path)

    def test_files_kind_requires_all_paths(self, tmp_path):
        path = config_file(tmp_path, {
            "system": {"kind": "files", "mass_path": "M.mtx"},
        })
        with pytest.raises(UsageError,
                           match="damping_path is required for kind = files"):
            load_config(path)

    def test_dt_required(self, tmp_path):
        path = config_file(tmp_path, drop=[("integrator", "dt")])
        with pytest.raises(UsageError, match=r"\[integrator\] dt is required"):
            load_config(path)

    def test_dt_positive(self, tmp_path):
        path = config_file(tmp_path, {"integrator": {"dt": "-0.1"}})
        with pytest.raises(UsageError, match="dt must be positive"):
            load_config(path)

    def test_non_numeric_value_rejected(self, tmp_path):
        path = config_file(tmp_path, {"integrator": {"dt": "fast"}})
        with pytest.raises(UsageError, match="dt must be a number, got 'fast'"):
            load_config(path)

    def test_rank_must_be_integer(self, tmp_path):
        path = config_file(tmp_path, {"basis": {"rank": "2.5"}})
        with pytest.raises(UsageError, match="rank must be an integer"):
            load_config(path)

    def test_sine_needs_exactly_one_frequency_form(self, tmp_path):
        both = config_file(tmp_path, {"input": {"angular_frequency": "2.0"}})
        with pytest.raises(UsageError, match="exactly one of frequency"):
            load_config(both)
        neither = config_file(tmp_path, drop=[("input", "frequency")])
        with pytest.raises(UsageError, match="exactly one of frequency"):
            load_config(neither)

    def test_waveform_catalog(self, tmp_path):
        path = config_file(tmp_path, {"input": {"waveform": "square"}})
        with pytest.raises(UsageError,
                           match="waveform must be one of sine, constant, chirp"):
            load_config(path)

    def test_constant_waveform_needs_no_frequency(self, tmp_path):
        path = config_file(
            tmp_path,
            {"input": {"waveform": "constant", "value": "2.5"}},
            drop=[("input", "frequency")],
        )
        cfg = load_config(path)
        assert cfg.waveform == "constant"
        assert cfg.value == 2.5

    def test_chirp_needs_sweep_parameters(self, tmp_path):
        path = config_file(
            tmp_path,
            {"input": {"waveform": "chirp", "f0": "1.0", "f1": "5.0"}},
            drop=[("input", "frequency")],
        )
        with pytest.raises(UsageError, match="chirp needs f0, f1, and sweep_time"):
            load_config(path)
        ok = config_file(
            tmp_path,
            {"input": {"waveform": "chirp", "f0": "1.0", "f1": "5.0",
                       "sweep_time": "-1.0"}},
            drop=[("input", "frequency")],
        )
        with pytest.raises(UsageError, match="sweep_time must be positive"):
            load_config(ok)

    def test_horizons_required(self, tmp_path):
        no_train = config_file(tmp_path, drop=[("training", "t_end")])
        with pytest.raises(UsageError, match=r"\[training\] t_end is required"):
            load_config(no_train)
        no_test = config_file(tmp_path, drop=[("testing", "t_end")])
        with pytest.raises(UsageError, match=r"\[testing\] t_end is required"):
            load_config(no_test)

    def test_training_window_covers_a_step(self, tmp_path):
        path = config_file(tmp_path, {"training": {"t_end": "0.001"}})
        with pytest.raises(UsageError, match="must cover at least one step"):
            load_config(path)

    def test_testing_window_not_shorter_than_training(self, tmp_path):
        path = config_file(tmp_path, {"testing": {"t_end": "0.1"}})
        with pytest.raises(UsageError, match=r"t_end \(0.1\) must be >= .*\(0.2\)"):
            load_config(path)

    def test_basis_selector_exclusive(self, tmp_path):
        both = config_file(tmp_path, {"basis": {"tol": "1e-2"}})
        with pytest.raises(UsageError, match="exactly one of rank, tol, energy"):
            load_config(both)
        none = config_file(tmp_path, drop=[("basis", "rank")])
        with pytest.raises(UsageError, match="exactly one of rank, tol, energy"):
            load_config(none)

    def test_selector_ranges(self, tmp_path):
        bad_rank = config_file(tmp_path, {"basis": {"rank": "0"}})
        with pytest.raises(UsageError, match="rank must be >= 1"):
            load_config(bad_rank)
        bad_tol = config_file(tmp_path, {"basis": {"tol": "1.5"}},
                              drop=[("basis", "rank")])
        with pytest.raises(UsageError, match=r"tol must lie in \(0, 1\)"):
            load_config(bad_tol)
        bad_energy = config_file(tmp_path, {"basis": {"energy": "1.0"}},
                                 drop=[("basis", "rank")])
        with pytest.raises(UsageError, match=r"energy must lie in \(0, 1\)"):
            load_config(bad_energy)

    def test_methods_parsed_and_validated(self, tmp_path):
        subset = config_file(tmp_path, {"inference": {"methods": "pod, copinf"}})
        assert load_config(subset).methods == ["pod", "copinf"]
        unknown = config_file(tmp_path, {"inference": {"methods": "pod, galerkin"}})
        with pytest.raises(UsageError, match="unknown method 'galerkin'"):
            load_config(unknown)
        empty = config_file(tmp_path, {"inference": {"methods": ""}})
        with pytest.raises(UsageError, match="methods must not be empty"):
            load_config(empty)

    def test_lambda_grid_keyword_and_list(self, tmp_path):
        keyword = config_file(tmp_path, {"inference": {"lambda_grid": "default"}})
        assert load_config(keyword).lambda_grid == DEFAULT_LAMBDA_GRID
        explicit = config_file(
            tmp_path, {"inference": {"lambda_grid": "0.0, 1e-6, 1e-2"}}
        )
        assert load_config(explicit).lambda_grid == [0.0, 1e-6, 1e-2]
        negative = config_file(tmp_path, {"inference": {"lambda_grid": "-1.0"}})
        with pytest.raises(UsageError, match="lambda_grid values must be >= 0"):
            load_config(negative)

    def test_omega_positive(self, tmp_path):
        path = config_file(tmp_path, {"inference": {"omega": "0.0"}})
        with pytest.raises(UsageError, match="omega must be positive"):
            load_config(path)

    def test_input_nodes_must_be_ints(self, tmp_path):
        path = config_file(tmp_path, {"system": {"input_nodes": "0, x"}})
        with pytest.raises(UsageError, match="input_nodes must be a comma list"):
            load_config(path)

    def test_output_section_parsed(self, tmp_path):
        path = config_file(tmp_path, {
            "output": {"directory": "artifacts", "seed": "7"},
        })
        cfg = load_config(path)
        assert cfg.directory == "artifacts"
        assert cfg.seed == 7


class TestInvocationErrors:
    def test_missing_output_directory(self, tmp_path, capsys):
        cfg = config_file(tmp_path)
        assert main(["run", "--config", cfg]) == 1
        err = capsys.readouterr().err
        assert "no output directory: set [output] directory or --out" in err
        assert "stage 'configure'" in err

    def test_unknown_method_override(self, tmp_path, capsys):
        cfg = config_file(tmp_path)
        code = main(["run", "--config", cfg, "--out", str(tmp_path / "o"),
                     "--method", "bogus"])
        assert code == 1
        assert "unknown method 'bogus'" in capsys.readouterr().err

    def test_negative_lambda_override(self, tmp_path, capsys):
        cfg = config_file(tmp_path)
        code = main(["run", "--config", cfg, "--out", str(tmp_path / "o"),
                     "--lambda", "-1.0"])
        assert code == 1
        assert "--lambda must be >= 0" in capsys.readouterr().err

    def test_nonpositive_omega_override(self, tmp_path, capsys):
        cfg = config_file(tmp_path)
        code = main(["run", "--config", cfg, "--out", str(tmp_path / "o"),
                     "--omega", "0.0"])
        assert code == 1
        assert "--omega must be positive" in capsys.readouterr().err

    def test_unknown_flag_exits_with_usage_code(self, tmp_path):
        cfg = config_file(tmp_path)
        with pytest.raises(SystemExit) as excinfo:
            main(["run", "--config", cfg, "--frobnicate"])
        assert excinfo.value.code == 1

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert capsys.readouterr().out.strip() == __version__

    def test_unreadable_config_is_usage_error(self, tmp_path, capsys):
        code = main(["run", "--config", str(tmp_path / "absent.ini")])
        assert code == 1
        assert "cannot read config" in capsys.readouterr().err

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "mechrom", "--version"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.strip() == __version__


class TestPipeline:
    def test_run_reports_each_stage(self, tmp_path, capsys):
        cfg = config_file(tmp_path)
        out = tmp_path / "artifacts"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "simulate: 10 training and 20 test snapshots" in stdout
        assert "basis: selected rank r = 2" in stdout
        assert "infer: selected lambda = " in stdout
        assert "infer-constrained: objective " in stdout
        for method in ("pod", "opinf", "copinf"):
            assert f"evaluate: {method} max relative error " in stdout

    def test_run_writes_expected_tree(self, small_run):
        _, out = small_run
        tree = tree_bytes(out)
        fom = {f"fom/{split}/{block}.csv"
               for split in ("train", "test")
               for block in ("displacement", "velocity", "acceleration",
                             "input", "force")}
        expected = fom | {
            "basis/modes.mtx", "basis/singular_values.csv", "basis/decay.csv",
            "opinf/damping.mtx", "opinf/stiffness.mtx", "opinf/input.mtx",
            "opinf/lambda_table.csv",
            "copinf/mass.mtx", "copinf/damping.mtx", "copinf/stiffness.mtx",
            "copinf/trace.csv",
            "pod/mass.mtx", "pod/damping.mtx", "pod/stiffness.mtx",
            "pod/input.mtx",
            "rom_pod/displacement.csv", "rom_opinf/displacement.csv",
            "rom_copinf/displacement.csv",
            "errors_pod.csv", "errors_opinf.csv", "errors_copinf.csv",
            "manifest.json", "timings.csv",
        }
        assert {path.replace(os.sep, "/") for path in tree} == expected

    def test_snapshot_counts_match_config(self, small_run):
        _, out = small_run
        train = load_csv(os.path.join(out, "fom", "train"))
        test = load_csv(os.path.join(out, "fom", "test"))
        assert train.num_snapshots == 10
        assert test.num_snapshots == 20
        assert train.n == 4
        # the training block is a prefix of the test block
        np.testing.assert_array_equal(
            train.displacement, test.displacement[:, :10]
        )

    def test_manifest_records_resolved_defaults(self, small_run):
        _, out = small_run
        with open(os.path.join(out, "manifest.json"), encoding="ascii") as fh:
            manifest = json.load(fh)
        assert manifest["tool"] == "mechrom"
        assert manifest["version"] == __version__
        cfg = manifest["config"]
        assert set(cfg) == {"system", "integrator", "input", "training",
                            "testing", "basis", "inference", "output"}
        # defaults the config file never mentioned are spelled out
        assert cfg["integrator"]["gamma"] == 0.5
        assert cfg["integrator"]["beta"] == 0.25
        assert cfg["integrator"]["alpha"] == 0.0
        assert cfg["system"]["masses"] == [1.0] * 4
        assert cfg["system"]["input_nodes"] == [0]
        assert cfg["input"]["amplitude"] == 1.0
        assert cfg["inference"]["lambda_grid"] == DEFAULT_LAMBDA_GRID
        assert cfg["inference"]["omega"] == 1e-8
        assert cfg["output"]["seed"] == 0
        assert cfg["basis"] == {"rank": 2, "tol": None, "energy": None}

    def test_timings_cover_every_stage(self, small_run):
        _, out = small_run
        lines = read_lines(os.path.join(out, "timings.csv"))
        assert lines[0] == "stage,seconds"
        stages = [ln.split(",")[0] for ln in lines[1:]]
        assert stages == ["simulate", "basis", "infer", "infer_constrained",
                          "evaluate"]
        assert all(float(ln.split(",")[1]) >= 0.0 for ln in lines[1:])

    def test_lambda_table_covers_grid(self, small_run):
        _, out = small_run
        lines = read_lines(os.path.join(out, "opinf", "lambda_table.csv"))
        assert lines[0] == "lambda,train_residual,validation_error,operator_norm"
        grid = [float(ln.split(",")[0]) for ln in lines[1:]]
        assert grid == pytest.approx(DEFAULT_LAMBDA_GRID)

    def test_error_series_split_train_and_test(self, small_run):
        _, out = small_run
        lines = read_lines(os.path.join(out, "errors_pod.csv"))
        assert lines[0] == "t,eps,phase"
        phases = [ln.split(",")[2] for ln in lines[1:]]
        assert len(phases) == 20
        # snapshots start at t = dt, so exactly ten fall inside [0, 0.2]
        assert phases == ["train"] * 10 + ["test"] * 10

    def test_methods_pod_only_skips_inference(self, tmp_path):
        cfg = config_file(tmp_path, {"inference": {"methods": "pod"}})
        out = tmp_path / "artifacts"
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "pod" / "mass.mtx").exists()
        assert (out / "rom_pod" / "displacement.csv").exists()
        assert (out / "errors_pod.csv").exists()
        assert not (out / "opinf").exists()
        assert not (out / "copinf").exists()
        assert not (out / "errors_opinf.csv").exists()

    def test_override_flags_reach_manifest(self, tmp_path):
        cfg = config_file(tmp_path, {"basis": {"tol": "1e-2"}},
                          drop=[("basis", "rank")])
        out = tmp_path / "artifacts"
        code = main([
            "run", "--config", cfg, "--out", str(out),
            "--rank", "2", "--method", "pod,opinf",
            "--lambda", "0.001", "--omega", "1e-6", "--seed", "9",
        ])
        assert code == 0
        with open(out / "manifest.json", encoding="ascii") as fh:
            config = json.load(fh)["config"]
        assert config["basis"] == {"rank": 2, "tol": None, "energy": None}
        assert config["inference"]["methods"] == ["pod", "opinf"]
        assert config["inference"]["lambda_grid"] == [0.001]
        assert config["inference"]["omega"] == 1e-6
        assert config["output"]["seed"] == 9
        assert not (out / "copinf").exists()

    def test_repeat_run_is_byte_identical(self, tmp_path):
        cfg = config_file(tmp_path, {"output": {"seed": "3"}})
        out = tmp_path / "artifacts"
        argv = ["run", "--config", cfg, "--out", str(out)]
        assert main(argv) == 0
        first = tree_bytes(out, skip={"timings.csv"})
        assert main(argv) == 0
        second = tree_bytes(out, skip={"timings.csv"})
        assert first == second

    def test_staged_invocation_matches_run(self, tmp_path):
        cfg = config_file(tmp_path)
        staged = tmp_path / "staged"
        whole = tmp_path / "whole"
        for command in ("simulate", "basis", "infer", "infer-constrained",
                        "evaluate"):
            assert main([command, "--config", cfg, "--out", str(staged)]) == 0
        assert main(["run", "--config", cfg, "--out", str(whole)]) == 0

        staged_tree = tree_bytes(staged)
        whole_tree = tree_bytes(whole, skip={"manifest.json", "timings.csv"})
        assert staged_tree == whole_tree
        # the bookkeeping files belong to run alone
        assert not (staged / "manifest.json").exists()
        assert not (staged / "timings.csv").exists()
        assert (whole / "manifest.json").exists()


@pytest.fixture(scope="module")
def station_run(tmp_path_factory):
    """Run mirroring the orbital-structure test protocol: 0.01 s steps, a
    1 rad/s sinusoid, training on [0, 7] s, testing on [0, 21] s, rank 4."""
    root = tmp_path_factory.mktemp("station")
    cfg = write_config(root, {
        "system": {"kind": "chain", "n": "8", "stiffnesses": "5.0",
                   "alpha_r": "0.02", "beta_r": "0.01"},
        "integrator": {"dt": "0.01"},
        "input": {"waveform": "sine", "angular_frequency": "1.0"},
        "training": {"t_end": "7.0"},
        "testing": {"t_end": "21.0"},
        "basis": {"rank": "4"},
    })
    out = root / "artifacts"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    return cfg, out


class TestStationProtocol:
    def test_emits_all_artifacts(self, station_run):
        _, out = station_run
        train = load_csv(os.path.join(out, "fom", "train"))
        test = load_csv(os.path.join(out, "fom", "test"))
        assert train.num_snapshots == 700
        assert test.num_snapshots == 2100
        for method in ("pod", "opinf", "copinf"):
            assert (out / f"errors_{method}.csv").exists()
            assert (out / f"rom_{method}" / "displacement.csv").exists()
        assert (out / "manifest.json").exists()

    def test_basis_tolerance_override_prints_rank(self, station_run, capsys):
        # rerun just the basis stage with a tolerance selector on the
        # 700 column training matrix
        cfg, out = station_run
        code = main(["basis", "--config", cfg, "--out", str(out),
                     "--tol", "1e-2"])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "basis: selected rank r = " in stdout
        rank = int(stdout.rsplit("=", 1)[1])
        assert rank >= 1
        lines = read_lines(os.path.join(out, "basis", "decay.csv"))
        assert lines[0] == "index,ratio"
        assert len(lines) - 1 >= rank


class TestStageFailures:
    def test_missing_system_matrix_names_load_stage(self, tmp_path, capsys):
        cfg = write_config(tmp_path, merged({
            "system": {
                "kind": "files",
                "mass_path": str(tmp_path / "M.mtx"),
                "damping_path": str(tmp_path / "E.mtx"),
                "stiffness_path": str(tmp_path / "K.mtx"),
                "input_path": str(tmp_path / "B.mtx"),
            },
        }, drop=[("system", "n")]))
        code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 2
        assert "error in stage 'load_system'" in capsys.readouterr().err

    def test_files_kind_loads_saved_matrices(self, tmp_path):
        chain = build_mass_spring_chain(3, [1.0] * 3, [4.0] * 4,
                                        alpha_r=0.05, beta_r=0.01,
                                        input_nodes=[0])
        save_matrix(tmp_path / "M.mtx", chain.mass, symmetry="symmetric")
        save_matrix(tmp_path / "E.mtx", chain.damping, symmetry="symmetric")
        save_matrix(tmp_path / "K.mtx", chain.stiffness, symmetry="symmetric")
        save_matrix(tmp_path / "B.mtx", chain.input_map, symmetry="general")
        cfg = write_config(tmp_path, merged({
            "system": {
                "kind": "files",
                "mass_path": str(tmp_path / "M.mtx"),
                "damping_path": str(tmp_path / "E.mtx"),
                "stiffness_path": str(tmp_path / "K.mtx"),
                "input_path": str(tmp_path / "B.mtx"),
            },
        }, drop=[("system", "n")]))
        out = tmp_path / "artifacts"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        data = load_csv(os.path.join(out, "fom", "test"))
        assert data.n == 3

    def test_evaluate_before_pipeline_is_data_error(self, tmp_path, capsys):
        cfg = config_file(tmp_path)
        code = main(["evaluate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 2
        err = capsys.readouterr().err
        assert "error in stage 'evaluate'" in err
        assert "run the basis stage first" in err

    def test_infer_before_simulate_is_data_error(self, tmp_path, capsys):
        cfg = config_file(tmp_path)
        code = main(["infer", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 2
        assert "error in stage 'infer'" in capsys.readouterr().err

    def test_evaluate_missing_inferred_operators(self, tmp_path, capsys):
        cfg = config_file(tmp_path, {"inference": {"methods": "opinf"}})
        out = tmp_path / "artifacts"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert main(["basis", "--config", cfg, "--out", str(out)]) == 0
        code = main(["evaluate", "--config", cfg, "--out", str(out)])
        assert code == 2
        err = capsys.readouterr().err
        assert "run the infer stage first" in err

    def test_zero_motion_data_is_numerical_error(self, tmp_path, capsys):
        cfg = config_file(tmp_path, {"input": {"amplitude": "0.0"}})
        code = main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 3
        err = capsys.readouterr().err
        assert "error in stage 'basis'" in err
        assert "identically zero" in err

    def test_initial_condition_length_mismatch(self, tmp_path, capsys):
        cfg = config_file(tmp_path, {"system": {"x0": "0.1, 0.2"}})
        code = main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert code == 2
        err = capsys.readouterr().err
        assert "x0 has 2 entries for dimension 4" in err
        assert "error in stage 'simulate'" in err

    def test_evaluate_mismatched_lengths_names_both(self, small_run, tmp_path,
                                                    capsys):
        # reuse the finished artifacts but ask evaluate for a longer test
        # window than the stored snapshots cover
        _, out = small_run
        cfg = config_file(tmp_path, {"testing": {"t_end": "0.6"}})
        code = main(["evaluate", "--config", cfg, "--out", str(out)])
        assert code == 2
        err = capsys.readouterr().err
        assert "replay produced 30 snapshots, test data has 20" in err
