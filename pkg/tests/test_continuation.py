import numpy as np
import pytest

from nmode import (DomainError, StepControl, StationaryParams, branch_switch, continue_branch, detect_events,
                   family_branch, family_state, hypercube, locate_fold, residual_positive, sweep_ground_diagram)
from nmode.continuation import symmetric_branch
from nmode.symmetry import named_class


def _events(diagram, kind):
    return sorted(ev.eta_star for _, ev in diagram.unique_events() if ev.kind == kind)


def _counts_at(diagram, eta, tol=1e-4):
    return sorted({c for i, c in diagram.branch_counts.items()
                   if abs(diagram.events[i][1].eta_star - eta) < tol})


@pytest.fixture(scope="module")
def diag1():
    return sweep_ground_diagram(hypercube(1), 1, (-6.0, 0.0))


@pytest.fixture(scope="module")
def diag2():
    return sweep_ground_diagram(hypercube(2), 1, (-9.0, 0.0))


@pytest.fixture(scope="module")
def diag3():
    return sweep_ground_diagram(hypercube(3), 1, (-26.0, 0.0))


def test_symmetric_branch_identity():
    br = symmetric_branch(hypercube(2), 1, (-10.0, 0.0))
    assert br.termination == "range"
    assert br.etas[0] == 0.0 and br.etas[-1] == -10.0
    np.testing.assert_allclose(br.omegas, br.etas / 4 - 2, atol=1e-10)
    np.testing.assert_allclose(br.qs, 0.25, atol=1e-12)


def test_branch_points_are_on_branch(diag2):
    for br in diag2:
        for p in br.points[:: max(1, len(br) // 20)]:
            r = residual_positive(p.q, StationaryParams(1, p.eta, p.Omega), hypercube(2))
            assert np.max(np.abs(r)) < 1e-11


def test_d1_pitchfork(diag1):
    bps = _events(diag1, "branch_point")
    assert len(bps) == 1 and abs(bps[0] + 2.0) < 1e-6
    assert len(diag1.branches) == 2
    assert _counts_at(diag1, -2.0) == [2]
    asym = diag1.branches[1]
    np.testing.assert_allclose(asym.omegas, asym.etas, atol=1e-8)


def test_d1_two_seeds_without_symmetry_reduction(diag1):
    sym = diag1.branches[0]
    ev = next(ev for ev in detect_events(sym) if ev.kind == "branch_point")
    seeds = branch_switch(ev, sym, modulo_symmetry=False)
    assert len(seeds) == 2
    np.testing.assert_allclose(seeds[0].q, seeds[1].q[::-1], atol=1e-12)
    assert abs(seeds[0].q[0] - 0.5) > 1e-4
    assert len(branch_switch(ev, sym)) == 1


def test_d2_events(diag2, oracle):
    bps = _events(diag2, "branch_point")
    for target in (-4.0, -8.0):
        assert min(abs(b - target) for b in bps) < 1e-4
    assert min(abs(b - oracle["point_family_bifurcation"]) for b in bps) < 1e-6
    folds = _events(diag2, "fold")
    assert len(folds) == 1
    assert abs(folds[0] - oracle["folds"]["d2"]["eta"]) < 1e-8


def test_d2_even_multiplicity_flagged(diag2):
    ev = next(ev for _, ev in diag2.unique_events() if abs(ev.eta_star + 4) < 1e-4)
    assert ev.even
    assert ev.null_direction.shape[1] == 2


def test_d2_branch_counts(diag2):
    assert _counts_at(diag2, -4.0) == [3]
    assert _counts_at(diag2, -8.0) == [2]
    assert _counts_at(diag2, -8.4853, tol=1e-3) == [2]
    assert len(diag2.branches) == 5


def test_secondary_bifurcation_on_point_family(diag2):
    bid, ev = next((b, ev) for b, ev in diag2.unique_events() if abs(ev.eta_star + 8.4853) < 1e-3)
    assert diag2.branches[bid].symmetry.label == "point2d"


def test_locate_fold_matches_detect(diag2, oracle):
    bid, ev = next((b, ev) for b, ev in diag2.unique_events() if ev.kind == "fold")
    again = locate_fold(diag2.branches[bid], ev.segment)
    assert abs(again.eta_star - oracle["folds"]["d2"]["eta"]) < 1e-8
    with pytest.raises(DomainError):
        branch_switch(ev, diag2.branches[bid])


@pytest.mark.parametrize("part", ["a", "b"])
def test_d2_family_states_match_oracle(oracle, part):
    br = family_branch(2, 1, "F23Ter", -9.0)
    for eta_s, ref in oracle["table_states"]["table2"][part].items():
        q, Om = family_state(2, 1, "F23Ter", float(eta_s), part, branch=br)
        np.testing.assert_allclose(q, ref["q"], atol=1e-9)
        assert abs(Om - ref["Omega"]) < 1e-9


def test_d3_events(diag3, oracle):
    folds = _events(diag3, "fold")
    for key in ("d3_F27", "d3_F28"):
        assert min(abs(f - oracle["folds"][key]["eta"]) for f in folds) < 1e-8
    bps = _events(diag3, "branch_point")
    for target in (-8.0, -16.0, -24.0):
        assert min(abs(b - target) for b in bps) < 1e-4


def test_d3_branch_counts(diag3):
    assert _counts_at(diag3, -8.0) == [4]
    assert _counts_at(diag3, -16.0) == [4]
    assert _counts_at(diag3, -24.0) == [2]


def test_d3_narrow_window():
    d = sweep_ground_diagram(hypercube(3), 1, (-10.0, 0.0))
    assert [round(b, 4) for b in _events(d, "branch_point")] == [-8.0]
    assert len(_events(d, "fold")) == 2


@pytest.mark.parametrize("family,table,parts", [("F27", "table3", ("a", "b")), ("F28", "table4", ("c", "d"))])
def test_d3_family_states_match_oracle(oracle, family, table, parts):
    br = family_branch(3, 1, family, -11.0)
    for part, sub in zip(parts, ("a", "b")):
        for eta_s, ref in oracle["table_states"][table][part].items():
            q, Om = family_state(3, 1, family, float(eta_s), sub, branch=br)
            np.testing.assert_allclose(q, ref["q"], atol=1e-8)
            assert abs(Om - ref["Omega"]) < 1e-8


def test_threads_do_not_change_diagram():
    a = sweep_ground_diagram(hypercube(2), 1, (-9.0, 0.0), threads=1)
    b = sweep_ground_diagram(hypercube(2), 1, (-9.0, 0.0), threads=4)
    assert len(a.branches) == len(b.branches)
    for x, y in zip(a.branches, b.branches):
        np.testing.assert_array_equal(x.etas, y.etas)
    assert [e.eta_star for _, e in a.events] == [e.eta_star for _, e in b.events]


def test_q_boundary_termination():
    br = family_branch(3, 1, "F27", -25.0)
    assert br.termination in ("q_boundary", "range")
    assert br.points[-1].eta >= -25.0


def test_family_errors():
    with pytest.raises(DomainError):
        family_branch(2, 1, "F27", -9.0)
    with pytest.raises(DomainError):
        family_state(2, 1, "F23Ter", -3.0, "a")  # before the fold: no state
    with pytest.raises(DomainError):
        family_state(2, 1, "F23Ter", -3.7, "z")


def test_seed_on_fold_needs_direction(oracle):
    f = oracle["folds"]["d2"]
    cls = named_class("partial2d", hypercube(2))
    br = continue_branch((np.array(f["q"]), f["Omega"], f["eta"]), 1, hypercube(2), (-4.0, -3.0),
                         symmetry=cls, direction=np.array([0, 0, 0, 0, -1.0]))
    assert br.termination in ("range", "q_boundary")


def test_step_control_limits():
    br = symmetric_branch(hypercube(1), 1, (-1.0, 0.0), StepControl(initial=1e-3, max=1e-2))
    assert np.max(np.abs(np.diff(br.etas))) <= 1e-2 + 1e-12
