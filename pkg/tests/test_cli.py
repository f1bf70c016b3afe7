import json

import numpy as np
import pytest

from dwellgain.cli import main
from dwellgain.model import save_system


@pytest.fixture(scope="module")
def ex1_path(bench_lti, tmp_path_factory):
    path = tmp_path_factory.mktemp("sys") / "ex1.json"
    save_system(bench_lti, str(path))
    return str(path)


@pytest.fixture(scope="module")
def ex2_path(bench_timer_growth, tmp_path_factory):
    path = tmp_path_factory.mktemp("sys") / "ex2.json"
    save_system(bench_timer_growth, str(path))
    return str(path)


class TestAnalyze:
    def test_arbitrary_reference(self, ex1_path, tmp_path, capsys):
        out = tmp_path / "cert.json"
        code = main(["analyze", "--system", ex1_path, "--dwell", "arbitrary", "-o", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        gamma = float(printed.split("gamma = ")[1].split()[0])
        assert gamma == pytest.approx(1.925, rel=1e-3)
        assert out.exists()

    def test_constant(self, ex2_path, tmp_path):
        out = tmp_path / "c.json"
        assert main(["analyze", "--system", ex2_path, "--dwell", "constant:0.3",
                     "--degree", "4", "-o", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["kind"] == "ConstantDT"

    def test_bad_dwell_exits_2(self, ex1_path):
        assert main(["analyze", "--system", ex1_path, "--dwell", "sometimes:1"]) == 2

    def test_missing_file_exits_2(self):
        assert main(["analyze", "--system", "/nonexistent.json", "--dwell", "arbitrary"]) == 2

    def test_infeasible_exits_3(self, tmp_path):
        from dwellgain.model import ImpulsiveSystem

        bad = ImpulsiveSystem.from_arrays(
            A=[[1.0]], Ec=[[1.0]], Cc=[[1.0]], Fc=[[0.0]],
            J=[[0.5]], Ed=[[0.0]], Cd=[[0.0]], Fd=[[0.0]],
        )
        path = tmp_path / "bad.json"
        save_system(bad, str(path))
        assert main(["analyze", "--system", str(path), "--dwell", "arbitrary"]) == 3

    def test_relaxation_limit_exits_4(self, tmp_path):
        from dwellgain.model import ImpulsiveSystem

        hard = ImpulsiveSystem.from_arrays(
            A=[[[-0.26, 1.0, -1.0]]], Ec=[[[0.001]]], Cc=[[[1.0]]], Fc=[[[0.0]]],
            J=[[0.5]], Ed=[[0.0]], Cd=[[1.0]], Fd=[[0.0]],
        )
        path = tmp_path / "hard.json"
        save_system(hard, str(path))
        assert main(["analyze", "--system", str(path), "--dwell", "constant:1",
                     "--degree", "0"]) == 4

    def test_dump_lp(self, ex1_path, tmp_path):
        lp_path = tmp_path / "prog.lp"
        assert main(["analyze", "--system", ex1_path, "--dwell", "minimum:0.5",
                     "--degree", "2", "--dump-lp", str(lp_path)]) == 0
        assert "Minimize" in lp_path.read_text()


class TestCertify:
    def test_pipeline_soundness(self, ex2_path, tmp_path):
        cert = tmp_path / "cert.json"
        assert main(["analyze", "--system", ex2_path, "--dwell", "constant:0.3",
                     "--degree", "4", "-o", str(cert)]) == 0
        assert main(["certify", "--system", ex2_path, "--certificate", str(cert)]) == 0

    def test_tampered_gamma_fails_with_named_row(self, ex2_path, tmp_path, capsys):
        cert = tmp_path / "cert.json"
        main(["analyze", "--system", ex2_path, "--dwell", "constant:0.3",
              "--degree", "4", "-o", str(cert)])
        data = json.loads(cert.read_text())
        data["gamma"] *= 0.9
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(data))
        capsys.readouterr()
        code = main(["certify", "--system", ex2_path, "--certificate", str(bad)])
        assert code == 1
        printed = capsys.readouterr().out
        assert "FAILED" in printed and "out_" in printed

    def test_controller_certify(self, bench_chain_plant, tmp_path):
        from dwellgain.model import DwellTimeSpec
        from dwellgain.synthesis import synthesize

        sys_path = tmp_path / "plant.json"
        save_system(bench_chain_plant, str(sys_path))
        ctrl = synthesize(bench_chain_plant, DwellTimeSpec.constant(0.1), degree=2)
        ctrl_path = tmp_path / "ctrl.json"
        ctrl.save(str(ctrl_path))
        assert main(["certify", "--system", str(sys_path),
                     "--certificate", str(ctrl_path)]) == 0


class TestSynthesizeCommand:
    def test_writes_controller(self, bench_chain_plant, tmp_path):
        sys_path = tmp_path / "plant.json"
        save_system(bench_chain_plant, str(sys_path))
        out = tmp_path / "ctrl.json"
        assert main(["synthesize", "--system", str(sys_path), "--dwell", "constant:0.1",
                     "--degree", "2", "-o", str(out)]) == 0
        data = json.loads(out.read_text())
        assert data["type"] == "controller" and data["kind"] == "ConstantDT"

    def test_fixed_kd_flag(self, bench_chain_plant, tmp_path):
        sys_path = tmp_path / "plant.json"
        save_system(bench_chain_plant, str(sys_path))
        out = tmp_path / "ctrl.json"
        assert main(["synthesize", "--system", str(sys_path), "--dwell", "range:0.1:0.3",
                     "--degree", "2", "--fixed-kd", "-o", str(out)]) == 0
        assert json.loads(out.read_text())["kind"] == "RangeDT_FixedKd"


class TestSimulateAndSweep:
    def test_simulate_outputs(self, ex1_path, tmp_path):
        prefix = str(tmp_path / "run")
        assert main(["simulate", "--system", ex1_path, "--dwell", "minimum:0.5",
                     "--runs", "3", "--horizon", "5", "--seed", "7", "-o", prefix]) == 0
        states = (tmp_path / "run_states.csv").read_text()
        assert states.splitlines()[0] == "t,x_1,x_2,zc_1"
        jumps = (tmp_path / "run_jumps.csv").read_text()
        assert jumps.splitlines()[0] == "k,t_k,zd_1"
        meta = json.loads((tmp_path / "run_meta.json").read_text())
        assert meta["seed"] == 7 and meta["runs"] == 3

    def test_byte_determinism(self, ex1_path, tmp_path):
        outs = []
        for name in ("a", "b"):
            prefix = str(tmp_path / name)
            assert main(["simulate", "--system", ex1_path, "--dwell", "range:0.3:0.6",
                         "--runs", "2", "--horizon", "4", "--seed", "11", "-o", prefix]) == 0
            outs.append(
                (tmp_path / f"{name}_states.csv").read_bytes()
                + (tmp_path / f"{name}_jumps.csv").read_bytes()
            )
        assert outs[0] == outs[1]

    def test_sweep_csv(self, ex1_path, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--system", ex1_path, "--dwell", "minimum",
                     "--from", "0.2", "--to", "1.0", "--points", "4",
                     "--degree", "4", "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "T,gamma"
        gammas = [float(l.split(",")[1]) for l in lines[1:]]
        assert len(gammas) == 4
        assert all(b <= a + 1e-9 for a, b in zip(gammas, gammas[1:]))

    def test_sweep_parallel_matches_serial(self, ex1_path, tmp_path):
        serial = tmp_path / "s.csv"
        parallel = tmp_path / "p.csv"
        for out, jobs in ((serial, "1"), (parallel, "2")):
            assert main(["sweep", "--system", ex1_path, "--dwell", "minimum",
                         "--from", "0.3", "--to", "0.9", "--points", "3",
                         "--degree", "2", "--jobs", jobs, "-o", str(out)]) == 0
        assert serial.read_bytes() == parallel.read_bytes()


def test_console_entry_point():
    import subprocess
    import sys

    r = subprocess.run(
        [sys.executable, "-m", "dwellgain.cli", "--help"], capture_output=True, text=True
    )
    assert r.returncode == 0
    assert "analyze" in r.stdout and "sweep" in r.stdout
