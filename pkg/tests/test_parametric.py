import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mclp.corpus import example_2x2
from mclp.exact import vec_add, vec_scale
from mclp.model import evaluate_objective, one_dim
from mclp.parametric import (
    assemble_validity_matrix,
    evaluate_formula,
    feasible_horizon,
    sweep_T,
    validity_interval_T,
    validity_membership,
)
from mclp.search import solve_degenerate
from mclp.structure import BaseSequence, Layout

F = Fraction
S1 = BaseSequence(((0, 3),), K0={1}, JN1={1})
S2 = BaseSequence(((0, 3), (0, 2)), K0={1}, KN1={0}, JN1={1})
S3 = BaseSequence(((1, 2), (0, 2)), K0={0}, J0={0}, KN1={0}, JN1={1})

# regime formulas of the 2x2 example as (constant, slope) pairs
REGIME_FORMULAS = [
    {
        "u0[1]": (F(6, 7), F(4, 35)), "u0[2]": (F(13, 7), F(-2, 7)),
        "x0[1]": (0, 0), "x0[2]": (0, F(4, 5)),
        "pN[1]": (F(1, 7), F(-12, 35)), "pN[2]": (F(10, 7), F(4, 7)),
        "qN[1]": (0, 0), "qN[2]": (0, F(8, 5)),
        "tau[1]": (0, 1),
    },
    {
        "u0[1]": (F(46, 49), F(-4, 49)), "u0[2]": (F(81, 49), F(10, 49)),
        "x0[1]": (0, 0), "x0[2]": (F(4, 7), F(-4, 7)),
        "pN[1]": (0, 0), "pN[2]": (F(5, 3), 0),
        "qN[1]": (0, 0), "qN[2]": (F(2, 3), 0),
        "tau[1]": (F(5, 7), F(-5, 7)), "tau[2]": (F(-5, 7), F(12, 7)),
        "xN_jump[1]": (F(-20, 21), F(16, 7)),
    },
    {
        "u0[1]": (0, 0), "u0[2]": (F(5, 2), 0),
        "x0[1]": (3, 0), "x0[2]": (0, 0),
        "pN[1]": (0, 0), "pN[2]": (F(5, 3), 0),
        "qN[1]": (0, 0), "qN[2]": (F(2, 3), 0),
        "tau[1]": (-1, 1), "tau[2]": (1, 0),
        "q0_jump[1]": (F(-1, 2), F(1, 2)),
        "xN_jump[1]": (F(11, 6), F(5, 2)),
    },
]


@pytest.fixture(scope="module")
def sweep():
    return sweep_T(example_2x2(), 2)


def _paper_vector(T):
    """Unknowns of the single-interval certificate written out by hand."""
    names = Layout(2, 2, 1).names()
    v = dict.fromkeys(names, F(0))
    v.update({
        "u0[1]": F(6, 7) + F(4, 35) * T, "u0[2]": F(13, 7) - F(2, 7) * T,
        "x0[2]": F(4, 5) * T, "qN[2]": F(8, 5) * T,
        "pN[1]": F(1, 7) - F(12, 35) * T, "pN[2]": F(10, 7) + F(4, 7) * T,
        "tau[1]": T,
    })
    return [v[n] for n in names]


def test_validity_matrix_of_single_interval(ex22):
    vm = assemble_validity_matrix(ex22, S1)
    assert vm.free_unknowns == 2 * 2 + 2 * 2 + 1
    T = F(1, 3)
    v = _paper_vector(T)
    # states at the breakpoints: x(T) and q at dual time T
    x1 = vec_add((0, F(4, 5) * T), vec_scale(T, (0, F(-4, 5))))
    q0 = vec_add((0, F(8, 5) * T), vec_scale(T, (0, F(-8, 5))))
    vec = vm.vector_from_solution(v, x1 + q0)
    assert vm.M.apply(vec) == vm.rhs(ex22.beta, ex22.gamma, T)
    assert vm.rhs(ex22.beta, ex22.gamma, T)[:6] == (8, 10, 5, 6, T, 0)


def test_one_dim_matrix_reduces_to_scalars():
    p = one_dim(1, 1, 1, 1)
    vm = assemble_validity_matrix(p, BaseSequence(((0,),)))
    # first boundary rows: u0 + x0 = beta and pN - qN = gamma
    assert vm.M.row(0)[:2] == (1, 1)
    assert vm.M.row(1)[2:4] == (-1, 1)


def test_time_interval_row_of_two_interval_sequence(ex22):
    vm = assemble_validity_matrix(ex22, S2)
    names = Layout(2, 2, 2).names()
    rows = [r for r in vm.M.tolist() if any(r)]
    target = [F(0)] * vm.M.cols
    target[names.index("x0[2]")] = F(1)
    target[names.index("tau[1]")] = F(-4, 5)
    assert target in rows
    for T in (F(5, 12), F(3, 4), F(1)):
        assert (F(4, 7) - F(4, 7) * T) - F(4, 5) * (F(5, 7) - F(5, 7) * T) == 0


def test_membership_examples(ex22):
    vm = assemble_validity_matrix(ex22, S1)
    inside = validity_membership(vm, ex22.beta, ex22.gamma, F(1, 3))
    assert inside.inside
    assert vm.M.apply(inside.witness) == vm.rhs(ex22.beta, ex22.gamma, F(1, 3))
    assert not validity_membership(vm, ex22.beta, ex22.gamma, F(1, 2)).inside
    assert validity_membership(vm, vec_scale(2, ex22.beta), vec_scale(2, ex22.gamma), F(2, 3)).inside
    with pytest.raises(ValueError):
        validity_membership(vm, ex22.beta, ex22.gamma, 0)


def test_validity_intervals(ex22):
    assert validity_interval_T(ex22, S1) == (0, F(5, 12))
    assert validity_interval_T(ex22, S2) == (F(5, 12), 1)
    assert validity_interval_T(ex22, S3) == (1, None)


def test_feasible_horizon():
    assert feasible_horizon(example_2x2()) == (True, None)
    assert feasible_horizon(one_dim(1, -1, 1, 1)) == (True, 1)
    assert feasible_horizon(one_dim(-1, 1, 1, 1))[0] is False


def test_sweep_of_the_example(sweep):
    assert [(r.lo, r.hi) for r in sweep.regimes] == [(0, F(5, 12)), (F(5, 12), 1), (1, 2)]
    assert sweep.breakpoints == [F(5, 12), 1]
    assert [r.sequence for r in sweep.regimes] == [S1, S2, S3]
    assert sweep.regimes[-1].open_ended
    for reg, want in zip(sweep.regimes, REGIME_FORMULAS):
        assert reg.note is None
        for name, (a, s) in want.items():
            assert reg.formulas[name] == (a, s), name
    assert [p["unique"] for p in sweep.boundary_points] == [False, False]
    assert sweep.boundary_points[1]["left"] == S2 and sweep.boundary_points[1]["right"] == S3


def test_sweep_objective_is_continuous(sweep):
    for left, right in zip(sweep.regimes, sweep.regimes[1:]):
        T = left.hi
        assert sum(a * T**k for k, a in enumerate(left.objective)) == sum(
            a * T**k for k, a in enumerate(right.objective)
        )
    a0, a1, a2 = sweep.regimes[-1].objective
    assert (a0, a1, a2) == (F(181, 12), F(13, 2), F(1, 4))


def test_regime_formulas_match_independent_solves(sweep):
    p = example_2x2()
    rng = random.Random(7)
    names = None
    for _ in range(20):
        reg = rng.choice(sweep.regimes)
        T = reg.lo + (reg.hi - reg.lo) * F(rng.randint(1, 999), 1000)
        rep = solve_degenerate(p, T)
        assert rep.certificate == reg.sequence
        names = Layout(2, 2, reg.sequence.N).names()
        sol = rep.solution
        got = dict(zip(names, sol.u0 + sol.x0 + sol.qN + sol.pN + sol.tau))
        for name, val in got.items():
            assert evaluate_formula(reg.formulas[name], T) == val
        assert evaluate_objective(p, T, sol) == sum(a * T**k for k, a in enumerate(reg.objective))


def test_sweep_of_one_dim_cases():
    dec = sweep_T(one_dim(1, 1, 1, 1), 5)
    assert [(r.lo, r.hi) for r in dec.regimes] == [(0, 5)]
    dec = sweep_T(one_dim(1, -1, -1, 1), 2)
    assert dec.truncated_at == 1
    assert dec.regimes[-1].hi == 1
    assert dec.boundary_points[-1]["T"] == 1 and dec.boundary_points[-1]["unique"] is False
    assert sweep_T(one_dim(-1, 1, 1, 1), 2).regimes == []
    with pytest.raises(ValueError):
        sweep_T(example_2x2(), 0)


inside_T = st.fractions(min_value=F(1, 100), max_value=F(5, 12), max_denominator=100)
scales = st.sampled_from([F(2), F(3), F(1, 2)])


@given(inside_T, scales)
def test_cone_scaling(T, theta):
    p = example_2x2()
    vm = assemble_validity_matrix(p, S1)
    assert validity_membership(vm, p.beta, p.gamma, T).inside
    assert validity_membership(vm, vec_scale(theta, p.beta), vec_scale(theta, p.gamma), theta * T).inside


@given(
    st.fractions(min_value=F(5, 12), max_value=1, max_denominator=60),
    st.fractions(min_value=F(5, 12), max_value=1, max_denominator=60),
    scales,
)
def test_cone_additivity(T1, T2, theta):
    p = example_2x2()
    vm = assemble_validity_matrix(p, S2)
    first = (p.beta, p.gamma, T1)
    second = (vec_scale(theta, p.beta), vec_scale(theta, p.gamma), theta * T2)
    assert validity_membership(vm, *first).inside
    assert validity_membership(vm, *second).inside
    total = (vec_add(first[0], second[0]), vec_add(first[1], second[1]), first[2] + second[2])
    assert validity_membership(vm, *total).inside
