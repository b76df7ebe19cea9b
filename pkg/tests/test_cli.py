"""End-to-end tests of the command-line interface and its exit codes."""

import json

import pytest

import relaymatch as rm
from relaymatch.cli import main


def make_topology_file(tmp_path, name="topo.json", **params):
    defaults = dict(num_sources=3, num_relays=2, radios_per_relay=1,
                    source_radios=(1, 2), path_loss=rm.AIR_TO_AIR)
    defaults.update(params)
    topology = rm.generate_topology(rm.TopologyParams(**defaults), 17)
    path = tmp_path / name
    rm.save_topology(path, topology)
    return path


class TestGen:
    def test_writes_topology(self, tmp_path, capsys):
        out = tmp_path / "topo.json"
        code = main(["gen", "--sources", "3", "--relays", "2", "--seed", "42",
                     "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert len(doc["sources"]) == 3
        assert "3 sources" in capsys.readouterr().out

    def test_same_seed_identical_files(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert main(["gen", "--seed", "42", "--out", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_config_file_and_preset_flag(self, tmp_path):
        cfg = tmp_path / "params.json"
        cfg.write_text(json.dumps({"num_sources": 2, "num_relays": 2}))
        out = tmp_path / "topo.json"
        code = main(["gen", "--config", str(cfg), "--path-loss", "air-to-air",
                     "--seed", "1", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["path_loss"]["intercept_db"] == 103.0

    def test_bad_flag_exits_one(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["gen", "--path-loss", "underwater", "--out",
                  str(tmp_path / "t.json")])
        assert err.value.code == 1


class TestRun:
    def test_trace_on_stdout_lambda_on_stderr(self, tmp_path, capsys):
        topo = make_topology_file(tmp_path)
        out = tmp_path / "matching.json"
        code = main(["run", "--topology", str(topo), "--solver", "pma",
                     "--seed", "3", "--out", str(out)])
        captured = capsys.readouterr()
        assert code == 0
        assert captured.out.startswith("iteration,lambda,actor,accepted")
        assert captured.err.startswith("final_lambda,")
        assert out.exists()

    def test_missing_topology_exits_one(self, tmp_path, capsys):
        code = main(["run", "--topology", str(tmp_path / "absent.json")])
        assert code == 1

    def test_generated_instance_without_file(self, capsys):
        code = main(["run", "--sources", "2", "--relays", "2",
                     "--solver", "substitutable", "--seed", "1"])
        assert code == 0


class TestEnsembleCommand:
    def test_config_file_run(self, tmp_path, capsys):
        config = rm.ExperimentConfig(
            topology=rm.TopologyParams(num_sources=3, num_relays=2,
                                       radios_per_relay=1,
                                       source_radios=(1, 2),
                                       path_loss=rm.AIR_TO_AIR),
            solvers=[rm.SolverConfig(kind="pma")],
            replications=2, master_seed=5, metrics=("runs",),
            store_traces=False)
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(config.to_dict()))
        out = tmp_path / "results"
        code = main(["ensemble", "--config", str(path), "--out", str(out)])
        assert code == 0
        assert (out / "runs.csv").exists()

    def test_solver_filter_must_match(self, tmp_path, capsys):
        config = rm.ExperimentConfig(
            topology=rm.TopologyParams(num_sources=2, num_relays=2),
            solvers=[rm.SolverConfig(kind="pma")],
            replications=1, metrics=("runs",), store_traces=False)
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(config.to_dict()))
        code = main(["ensemble", "--config", str(path),
                     "--solver", "best_response"])
        assert code == 1

    def test_unknown_config_exits_one(self, capsys):
        assert main(["ensemble", "--config", "no-such-preset"]) == 1

    def test_presets_parse(self):
        from relaymatch.cli import _resolve_config
        for name in ("fig2", "fig3", "fig4"):
            config = _resolve_config(name)
            assert config.replications >= 100


class TestVerify:
    def test_oracle_output_verifies_stable(self, tmp_path, capsys):
        topo_path = make_topology_file(tmp_path)
        matching_path = tmp_path / "matching.json"
        assert main(["oracle", "--topology", str(topo_path),
                     "--out", str(matching_path)]) == 0
        code = main(["verify", "--topology", str(topo_path),
                     "--matching", str(matching_path), "--samples", "50"])
        captured = capsys.readouterr()
        assert code == 0
        assert "stable" in captured.out
        assert "potential-identity" in captured.out

    def test_unstable_matching_exits_two_unless_allowed(self, tmp_path, capsys):
        topo_path = make_topology_file(tmp_path, name="t2.json", num_sources=2,
                                       num_relays=2, source_radios=1)
        topology, _ = rm.load_topology(topo_path)
        caps = rm.build_capacity_table(topology)
        profiles = rm.default_profiles(topology)
        crowded = None
        import numpy as np
        for l in range(topology.num_radios):
            m = rm.Matching([(l,), (l,)], topology.num_radios)
            if not rm.is_stable(m, topology, profiles, caps).stable:
                crowded = m
                break
        assert crowded is not None, "expected a crowded unstable matching"
        matching_path = tmp_path / "crowded.json"
        matching_path.write_text(json.dumps(crowded.to_dict()))
        args = ["verify", "--topology", str(topo_path),
                "--matching", str(matching_path)]
        assert main(args) == 2
        capsys.readouterr()
        assert main(args + ["--allow-unstable"]) == 0
        assert "unstable" in capsys.readouterr().out

    def test_infeasible_matching_exits_two(self, tmp_path, capsys):
        topo_path = make_topology_file(tmp_path, name="t3.json", num_sources=3,
                                       num_relays=2, source_radios=1)
        matching_path = tmp_path / "bad.json"
        # quota is 1 radio per source, so holding two violates feasibility
        matching_path.write_text(json.dumps({"0": [0, 1], "1": [], "2": []}))
        code = main(["verify", "--topology", str(topo_path),
                     "--matching", str(matching_path)])
        assert code == 2
        assert "INFEASIBLE" in capsys.readouterr().out


class TestOracle:
    def test_cap_exceeded_exits_two(self, tmp_path, capsys):
        topo_path = make_topology_file(tmp_path, name="big.json",
                                       num_sources=13, num_relays=5,
                                       radios_per_relay=2, source_radios=3)
        code = main(["oracle", "--topology", str(topo_path)])
        assert code == 2
        assert "exceed" in capsys.readouterr().err

    def test_nonempty_and_cap_flags(self, tmp_path, capsys):
        topo_path = make_topology_file(tmp_path, name="small.json")
        code = main(["oracle", "--topology", str(topo_path), "--nonempty",
                     "--max-set-size", "1"])
        captured = capsys.readouterr()
        assert code == 0
        assert captured.out.startswith("optimal_lambda,")
