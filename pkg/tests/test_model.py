import json

import numpy as np
import pytest

from dwellgain.errors import DimensionMismatch, InvalidDomain, ParseError, Unsupported
from dwellgain.model import (
    DwellTimeSpec,
    ImpulsiveSystem,
    PolyMatrix,
    SwitchedSystem,
    adjoint,
    check_positive,
    lift_switched,
    load_system,
    save_system,
)
from dwellgain.sim import SequenceGen, generate_inputs, simulate


class TestPolyMatrix:
    def test_eval_and_clamp(self):
        pm = PolyMatrix.from_entries([[[1.0, 2.0], [0.0]], [[0.0, 0.0, 1.0], [3.0]]])
        m = pm(2.0)
        assert m == pytest.approx(np.array([[5.0, 0.0], [4.0, 3.0]]))
        assert pm(5.0, clamp=2.0) == pytest.approx(m)

    def test_mesh_matches_pointwise(self):
        pm = PolyMatrix.from_entries([[[0.5, -1.0, 2.0]]])
        taus = np.linspace(0, 3, 7)
        mesh = pm.eval_mesh(taus)
        for k, t in enumerate(taus):
            assert mesh[k] == pytest.approx(pm(float(t)))

    def test_transpose_derivative(self):
        pm = PolyMatrix.from_entries([[[1.0, 1.0], [2.0]], [[0.0], [0.0, 3.0]]])
        assert pm.T.entry(0, 1).coeffs == pm.entry(1, 0).coeffs
        assert pm.deriv().entry(0, 0).coeffs == (1.0,)
        assert pm.deriv().entry(1, 1).coeffs == (3.0,)


class TestPositivity:
    def test_benchmark_is_positive(self, bench_lti):
        report = check_positive(bench_lti, (0.0, 1.0))
        assert report.positive and not report.violations

    def test_negative_offdiagonal_flagged(self):
        sys = ImpulsiveSystem.from_arrays(
            A=[[-1.0, -1.0], [0.0, -1.0]],
            Ec=[[0.0], [0.0]],
            Cc=[[1.0, 0.0]],
            Fc=[[0.0]],
            J=np.eye(2),
            Ed=[[0.0], [0.0]],
            Cd=[[0.0, 0.0]],
            Fd=[[0.0]],
        )
        report = check_positive(sys, (0.0, 1.0))
        assert not report.positive
        assert any(name == "A" and idx == (0, 1) for name, idx, _, _ in report.violations)

    def test_timer_dependent_positive(self, bench_timer_growth, bench_timer_stable):
        assert check_positive(bench_timer_growth, (0.0, 0.5)).positive
        assert check_positive(bench_timer_stable, (0.0, 2.0)).positive

    def test_lifted_jumps_nonnegative(self, bench_switched):
        lifted = lift_switched(bench_switched)
        report = check_positive(lifted, (0.0, 0.5))
        assert report.positive

    def test_invalid_domain(self, bench_lti):
        with pytest.raises(InvalidDomain):
            check_positive(bench_lti, (0.0, 0.0))

    def test_positivity_semantics_by_simulation(self, bench_lti, bench_timer_growth):
        """Certified-positive systems keep x, z_c, z_d nonnegative along runs."""
        for sys, Tdom in ((bench_lti, 1.0), (bench_timer_growth, 0.5)):
            assert check_positive(sys, (0.0, Tdom)).positive
            for seed in range(50):
                rng = np.random.default_rng((101, seed))
                x0 = rng.uniform(0.0, 2.0, size=sys.n)
                gen = SequenceGen.uniform_range(0.2, 0.5, seed=seed)
                traj = simulate(
                    sys, gen, generate_inputs("const_unit"), x0=x0, horizon=4.0, step=2e-3
                )
                assert traj.min_state() >= -1e-9
                if traj.zc.size:
                    assert float(traj.zc.min()) >= -1e-9
                if traj.zd.size:
                    assert float(traj.zd.min()) >= -1e-9


class TestLifting:
    def test_structure(self, bench_switched):
        lifted = lift_switched(bench_switched)
        assert lifted.n == 4
        assert len(lifted.jumps) == 2
        A = lifted.A.const()
        assert A[:2, :2] == pytest.approx(np.array([[-1.0, 0.0], [1.0, -2.0]]))
        assert A[2:, 2:] == pytest.approx(np.array([[-1.0, 1.0], [1.0, -6.0]]))
        assert A[:2, 2:] == pytest.approx(np.zeros((2, 2)))
        # jump maps are 0/1 block selectors: e_i e_j^T kron I
        for jm in lifted.jumps:
            src, dst = jm.tag
            sel = np.zeros((2, 2))
            sel[dst, src] = 1.0
            assert jm.J == pytest.approx(np.kron(sel, np.eye(2)))
        # stacked inputs/outputs
        assert lifted.Ec.const() == pytest.approx(np.array([[0.1], [0.1], [0.5], [0.0]]))
        assert lifted.Cc.const().shape == (2, 4)

    def test_single_mode_rejected(self):
        sw = SwitchedSystem.from_arrays(
            [{"A": [[-1.0]], "E": [[1.0]], "C": [[1.0]], "F": [[0.0]]}]
        )
        with pytest.raises(DimensionMismatch):
            lift_switched(sw)

    def test_lifting_preserves_positivity(self, bench_switched):
        assert check_positive(lift_switched(bench_switched), (0.0, 1.0)).positive


class TestAdjoint:
    def test_lti_transposition(self, bench_lti):
        adj = adjoint(bench_lti)
        assert adj.A.const() == pytest.approx(bench_lti.A.const().T)
        assert adj.Ec.const() == pytest.approx(bench_lti.Cc.const().T)
        assert adj.Cc.const() == pytest.approx(bench_lti.Ec.const().T)
        assert adj.jump.J == pytest.approx(bench_lti.jump.J.T)
        assert adj.jump.Ed == pytest.approx(bench_lti.jump.Cd.T)
        assert adj.time_reversed

    def test_dimension_swap(self, bench_lti):
        adj = adjoint(bench_lti)
        assert (adj.pc, adj.qc) == (bench_lti.qc, bench_lti.pc)
        assert (adj.pd, adj.qd) == (bench_lti.qd, bench_lti.pd)

    def test_involution_exact(self, bench_timer_stable):
        back = adjoint(adjoint(bench_timer_stable))
        assert np.array_equal(back.A.coeffs, bench_timer_stable.A.coeffs)
        assert np.array_equal(back.Ec.coeffs, bench_timer_stable.Ec.coeffs)
        assert np.array_equal(back.Cc.coeffs, bench_timer_stable.Cc.coeffs)
        assert np.array_equal(back.jump.J, bench_timer_stable.jump.J)
        assert not back.time_reversed

    def test_multi_jump_unsupported(self, bench_switched):
        with pytest.raises(Unsupported):
            adjoint(lift_switched(bench_switched))


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(42)
        sys = ImpulsiveSystem.from_arrays(
            A=[[list(rng.uniform(-1, 1, 4)) for _ in range(2)] for _ in range(2)],
            Ec=[[list(rng.uniform(0, 1, 3))] for _ in range(2)],
            Cc=[[list(rng.uniform(0, 1, 2)) for _ in range(2)]],
            Fc=[[list(rng.uniform(0, 1, 2))]],
            J=rng.uniform(0, 1, (2, 2)),
            Ed=rng.uniform(0, 1, (2, 1)),
            Cd=rng.uniform(0, 1, (1, 2)),
            Fd=rng.uniform(0, 1, (1, 1)),
        )
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_system(sys, str(p1))
        save_system(load_system(str(p1)), str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_benchmark_file_positive(self, bench_lti, tmp_path):
        path = tmp_path / "ex1.json"
        save_system(bench_lti, str(path))
        loaded = load_system(str(path))
        assert loaded.n == 2
        assert check_positive(loaded, (0.0, 1.0)).positive

    def test_switched_round_trip(self, bench_switched, tmp_path):
        path = tmp_path / "sw.json"
        save_system(bench_switched, str(path))
        loaded = load_system(str(path))
        assert isinstance(loaded, SwitchedSystem)
        assert loaded.N == 2
        assert loaded.modes[1]["A"].const() == pytest.approx(
            bench_switched.modes[1]["A"].const()
        )

    def test_lifted_round_trip(self, bench_switched, tmp_path):
        lifted = lift_switched(bench_switched)
        path = tmp_path / "lift.json"
        save_system(lifted, str(path))
        loaded = load_system(str(path))
        assert len(loaded.jumps) == 2
        assert loaded.jumps[1].tag == lifted.jumps[1].tag

    def test_nonsquare_A_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"A": [[[1.0], [0.0]]], "J": [[1.0]]}))
        with pytest.raises(DimensionMismatch):
            load_system(str(path))

    def test_declared_dimension_mismatch(self, bench_lti, tmp_path):
        data = json.loads(json.dumps({"n": 3, **_to_json(bench_lti)}))
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data))
        with pytest.raises(DimensionMismatch):
            load_system(str(path))

    def test_parse_error_context(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            load_system(str(path))


def _to_json(sys):
    from dwellgain.model import system_to_json

    data = system_to_json(sys)
    data.pop("n")
    return data


class TestDwellTimeSpec:
    @pytest.mark.parametrize(
        "text,kind",
        [
            ("arbitrary", "arbitrary"),
            ("constant:0.3", "constant"),
            ("minimum:2", "minimum"),
            ("range:0.3:0.5", "range"),
        ],
    )
    def test_parse_round_trip(self, text, kind):
        spec = DwellTimeSpec.parse(text)
        assert spec.kind == kind
        assert DwellTimeSpec.parse(str(spec)) == spec

    @pytest.mark.parametrize(
        "text", ["constant:-1", "range:0.5:0.3", "minimum:0", "bogus", "range:1", "constant:x"]
    )
    def test_rejects_invalid(self, text):
        with pytest.raises(ParseError):
            DwellTimeSpec.parse(text)

    def test_clamp_only_for_minimum(self):
        assert DwellTimeSpec.minimum(2.0).clamp == 2.0
        assert DwellTimeSpec.constant(2.0).clamp is None
