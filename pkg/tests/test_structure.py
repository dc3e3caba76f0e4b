from dataclasses import replace
from fractions import Fraction
from math import comb

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mclp.exact import vec_add, vec_sub, vec_scale
from mclp.model import (
    FeasibilityClass,
    MclpProblem,
    check_nondegeneracy,
    check_uniqueness_condition,
    evaluate_solution_at,
    one_dim,
)
from mclp.search import _perturbation_search, SearchStats, is_regular, solve
from mclp.structure import (
    BaseSequence,
    Layout,
    assemble_equations,
    boundary_lp_crosscheck,
    construct_solution,
    structural_violation,
    validate_certificate,
)

F = Fraction
# certificates of the three regimes of the 2x2 example (0-based indices)
S1 = BaseSequence(((0, 3),), K0={1}, JN1={1})
S2 = BaseSequence(((0, 3), (0, 2)), K0={1}, KN1={0}, JN1={1})
S3 = BaseSequence(((1, 2), (0, 2)), K0={0}, J0={0}, KN1={0}, JN1={1})


def test_layout_size_and_names():
    L = Layout(2, 2, 1)
    assert L.size == 2 * 2 + 2 * 2 + 1 + 2 * 2 + 2 * 2
    assert L.names()[:2] == ["u0[1]", "u0[2]"]
    assert "tau[1]" in L.names() and "xN_jump[2]" in L.names()


def test_assembled_system_is_square(ex22):
    for seq in (S1, S2, S3):
        M, rhs = assemble_equations(ex22, 1, seq)
        assert M.rows == M.cols == len(rhs) == Layout(2, 2, seq.N).size


def test_single_interval_at_one_third(ex22):
    res = validate_certificate(ex22, F(1, 3), S1)
    assert res.optimal
    sol = res.solution
    T = F(1, 3)
    assert sol.u0 == (F(6, 7) + F(4, 35) * T, F(13, 7) - F(2, 7) * T)
    assert sol.x0 == (0, F(4, 5) * T)
    assert sol.pN == (F(1, 35), F(34, 21))
    assert sol.qN == (0, F(8, 5) * T)
    assert sol.uN == (0, 0) and sol.xN_jump == (0, 0)
    assert sol.tau == (T,)


def test_two_intervals_at_three_quarters(ex22):
    sol = construct_solution(ex22, F(3, 4), S2)
    assert sol.tau == (F(5, 28), F(4, 7))
    T = F(3, 4)
    assert sol.u0 == (F(46, 49) - F(4, 49) * T, F(81, 49) + F(10, 49) * T)
    assert sol.x0 == (0, F(4, 7) - F(4, 7) * T)
    assert sol.xN_jump == (F(16, 7) * T - F(20, 21), 0)
    assert sol.pN == (0, F(5, 3)) and sol.qN == (0, F(2, 3))


def test_late_regime_at_three_halves(ex22):
    sol = construct_solution(ex22, F(3, 2), S3)
    assert sol.q0_jump == (F(1, 4), 0)
    assert sol.tau == (F(1, 2), 1)
    assert sol.u0 == (0, F(5, 2)) and sol.x0 == (3, 0)
    assert sol.xN_jump == (F(11, 6) + F(5, 2) * F(3, 2), 0)


def test_violations_name_the_failed_quantity(ex22):
    res = validate_certificate(ex22, F(1, 2), S1)
    assert not res.optimal
    assert res.violation == "pN[1] = -1/35 < 0"
    res = validate_certificate(ex22, F(1, 3), S2)
    assert not res.optimal
    assert res.violation == "tau[2] = -1/7 < 0"
    with pytest.raises(ValueError):
        construct_solution(ex22, F(1, 2), S1)


def test_structural_checks(ex22):
    assert structural_violation(ex22, BaseSequence(())) == "empty base sequence"
    assert "not distinct" in structural_violation(ex22, BaseSequence(((0, 3), (0, 3))))
    assert "not adjacent" in structural_violation(ex22, BaseSequence(((0, 3), (1, 2))))
    # K0 must be a state whose slope is basic in the first basis
    assert "K0" in structural_violation(ex22, S1.with_sets({0}, set(), set(), {1}))
    assert structural_violation(ex22, S2) is None


def test_zero_solution_certificate_for_case_4():
    p = one_dim(1, 1, -1, -1)
    sol = construct_solution(p, 1, BaseSequence(((1,),), K0={0}, J0={0}, KN1={0}, JN1={0}))
    assert sol.u0 == (0,) and sol.x0 == (1,)
    assert boundary_lp_crosscheck(p, 1, sol)


def test_one_dim_shapes():
    # Case 2: single impulse beta + b T at T, x jumps to zero
    sol = solve(one_dim(1, 1, 1, -1), F(1, 2)).solution
    assert sol.uN == (F(3, 2),) and sol.u0 == (0,)
    assert sol.xN_jump == (0,)
    # Case 1: U(t) = beta + b t
    sol = solve(one_dim(1, 1, 1, 1), F(1, 2)).solution
    assert sol.u0 == (1,) and sol.u_rates == ((1,),)
    assert evaluate_solution_at(sol, F(1, 4))[0] == (F(5, 4),)


def test_boundary_lp_crosscheck(ex22):
    sol = construct_solution(ex22, F(3, 4), S2)
    assert boundary_lp_crosscheck(ex22, F(3, 4), sol)
    bumped = replace(sol, u0=(sol.u0[0] + 1, sol.u0[1]), x_at=None, q_at=None)
    assert not boundary_lp_crosscheck(ex22, F(3, 4), bumped)


def test_uniqueness_condition_examples(ex22):
    assert not check_uniqueness_condition(ex22, 1)
    assert check_uniqueness_condition(ex22, F(3, 4))
    assert not check_uniqueness_condition(one_dim(1, 1, -1, 1), 1)


def test_family_at_the_critical_horizon(ex22):
    res = validate_certificate(ex22, 1, BaseSequence(((0, 2),), K0={0}, KN1={0}, JN1={1}))
    assert res.optimal and res.family is not None and res.family.dim == 1
    names = Layout(2, 2, 1).names()
    for theta in (F(0), F(1, 2), F(1)):
        v = dict(zip(names, res.family.at(theta)))
        assert (v["u0[1]"], v["u0[2]"]) == (F(6, 7) - F(6, 7) * theta, F(13, 7) + F(9, 14) * theta)
        assert (v["x0[1]"], v["x0[2]"]) == (3 * theta, 0)
        assert (v["xN_jump[1]"], v["xN_jump[2]"]) == (F(4, 3) + 3 * theta, 0)
        assert (v["pN[1]"], v["pN[2]"]) == (0, F(5, 3))
        assert (v["qN[1]"], v["qN[2]"]) == (0, F(2, 3))
    with pytest.raises(ValueError):
        res.family.at(2)


# ---------------------------------------------------------------------------
# properties over random instances

small = st.integers(-5, 5)


@st.composite
def feasible_instances(draw):
    K = draw(st.integers(1, 2))
    J = draw(st.integers(1, 2))
    A = [[draw(small) for _ in range(J)] for _ in range(K)]
    beta = [draw(st.integers(0, 5)) for _ in range(K)]
    b = [draw(small) for _ in range(K)]
    gamma = [draw(st.integers(-5, 0)) for _ in range(J)]
    c = [draw(small) for _ in range(J)]
    T = draw(st.fractions(min_value=F(1, 8), max_value=4, max_denominator=8))
    return MclpProblem(A, beta, b, gamma, c), T


@given(feasible_instances())
def test_certificate_identities(inst):
    p, T = inst
    rep = solve(p, T)
    assume(rep.verdict is FeasibilityClass.BOTH_OPTIMAL)
    sol = rep.solution
    seq = rep.certificate
    assert seq.N <= comb(p.K + p.J, p.K)
    # first boundary equations
    assert vec_add(p.A.apply(sol.u0), sol.x0) == p.beta
    assert vec_sub(p.A.T.apply(sol.pN), sol.qN) == p.gamma
    # second boundary equations
    assert vec_add(p.A.apply(sol.uN), sol.xN_jump) == sol.x_at[-1]
    assert vec_sub(p.A.T.apply(sol.p0), sol.q0_jump) == vec_scale(-1, sol.q_at[0])
    # zero settings
    assert all(sol.u0[j] == 0 for j in seq.J0)
    assert all(sol.x0[k] == 0 for k in range(p.K) if k not in seq.K0)
    assert all(sol.p0[k] == 0 for k in seq.K0)
    assert all(sol.q0_jump[j] == 0 for j in range(p.J) if j not in seq.J0)
    assert all(sol.pN[k] == 0 for k in seq.KN1)
    assert all(sol.xN_jump[k] == 0 for k in range(p.K) if k not in seq.KN1)
    assert all(sol.uN[j] == 0 for j in seq.JN1)
    assert all(sol.qN[j] == 0 for j in range(p.J) if j not in seq.JN1)


@settings(max_examples=20)
@given(feasible_instances())
def test_unique_solution_under_the_uniqueness_condition(inst):
    p, T = inst
    assume(all(check_nondegeneracy(p, "I").values()))
    assume(check_uniqueness_condition(p, T))
    rep = solve(p, T)
    assume(rep.verdict is FeasibilityClass.BOTH_OPTIMAL and is_regular(p, T))
    other = _perturbation_search(p, T, rep.verdict, SearchStats())
    a, b = rep.solution, other.solution
    for name in ("u0", "uN", "x0", "xN_jump", "p0", "pN", "qN", "q0_jump"):
        assert getattr(a, name) == getattr(b, name), name
    for k in range(9):
        t = T * k / 8
        Ua = vec_sub(evaluate_solution_at(a, t)[0], a.u0)
        Ub = vec_sub(evaluate_solution_at(b, t)[0], b.u0)
        assert Ua == Ub
