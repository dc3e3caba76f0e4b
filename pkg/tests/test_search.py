import random
from fractions import Fraction

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from mclp.corpus import EXAMPLE_2X2_OBJECTIVES
from mclp.exact import is_general_position, RatMatrix
from mclp.model import (
    FeasibilityClass,
    MclpProblem,
    Side,
    build_test_lp,
    complementary_slackness_integrals,
    evaluate_objective,
    one_dim,
)
from mclp.lp import is_feasible
from mclp.rates import DimensionError, rates_from_basis, rates_objective
from mclp.search import (
    PerturbationSpec,
    default_perturbation,
    perturb,
    solve,
    solve_degenerate,
    verify_certificate,
)
from mclp.structure import BaseSequence

F = Fraction
BOTH = FeasibilityClass.BOTH_OPTIMAL
S1 = BaseSequence(((0, 3),), K0={1}, JN1={1})
S2 = BaseSequence(((0, 3), (0, 2)), K0={1}, KN1={0}, JN1={1})
S3 = BaseSequence(((1, 2), (0, 2)), K0={0}, J0={0}, KN1={0}, JN1={1})


def test_solve_small_horizon(ex22):
    rep = solve(ex22, F(1, 3))
    assert rep.certificate == S1
    assert rep.objective == rep.dual_objective == evaluate_objective(ex22, F(1, 3), rep.solution)
    assert rep.method == "direct" and rep.strict


def test_solve_large_horizon(ex22):
    rep = solve(ex22, F(3, 2))
    assert rep.certificate == S3
    assert rep.solution.tau == (F(1, 2), 1)
    assert rep.objective == EXAMPLE_2X2_OBJECTIVES[F(3, 2)]


def test_solve_reports_infeasible_verdict():
    rep = solve(one_dim(-1, 1, 1, 1), 1)
    assert rep.verdict is FeasibilityClass.PRIMAL_INFEASIBLE_DUAL_UNBOUNDED
    assert rep.certificate is None and rep.solution is None


def test_solve_enforces_dimension_cap():
    p = MclpProblem([[1] * 6] * 6, [1] * 6, [1] * 6, [1] * 6, [1] * 6)
    with pytest.raises(DimensionError):
        solve(p, 1)


def test_perturb_examples():
    p = one_dim(0, 1, 1, 1)
    assert perturb(p, PerturbationSpec(1, (0,), (0,), 0)) == p
    q = perturb(p, PerturbationSpec(1, (0,), (0,), 1))
    assert q.beta == (1,) and q.gamma == (0,)
    d = one_dim(1, 0, 1, 1)
    q = perturb(d, PerturbationSpec(1, (1,), (0,), F(1, 2)))
    assert q.b == (F(1, 2),)
    assert is_general_position(q.b, RatMatrix([[1, 1]]))


def test_perturbation_spec_checks():
    with pytest.raises(ValueError):
        PerturbationSpec(0, (0,), (0,))
    with pytest.raises(ValueError):
        PerturbationSpec(1, (0,), (0,), 2)
    with pytest.raises(ValueError):
        PerturbationSpec(1, (0,), (1,)).check(1)
    default_perturbation(one_dim(1, 1, 1, 1), 4).check(4)


def test_degenerate_horizon_of_the_example(ex22):
    rep = solve_degenerate(ex22, 1)
    assert rep.certificate.N == 1
    assert rep.objective == F(131, 6)
    assert rep.family is not None and rep.family.dim == 1


def test_degenerate_one_dim_case_3():
    p = one_dim(1, 1, -1, 1)
    rep = solve_degenerate(p, 1)
    assert rep.objective == 0
    fam = rep.family
    assert fam is not None and fam.dim == 1
    u0 = {fam.at(th)[0] for th in (F(0), F(1, 2), F(1))}
    assert u0 == {F(0), F(1, 2), F(1)}


def test_degenerate_data_goes_through_perturbation():
    # b = 0 violates Non-Degeneracy I
    p = one_dim(1, 0, 1, 1)
    rep = solve(p, 1)
    assert rep.method == "perturbation" and not rep.strict
    assert rep.objective == rep.dual_objective == 2
    assert rep.perturbation["rule"].startswith("3 consecutive")
    assert verify_certificate(p, 1, rep.certificate, strict=False).optimal


def test_non_degenerate_input_delegates(ex22):
    a, b = solve_degenerate(ex22, F(3, 4)), solve(ex22, F(3, 4))
    assert a.certificate == b.certificate and a.objective == b.objective


def test_solve_is_deterministic(ex22):
    runs = [solve(ex22, F(3, 4)) for _ in range(2)]
    assert runs[0].certificate == runs[1].certificate
    assert runs[0].stats.as_dict() == runs[1].stats.as_dict()


def test_three_regimes_at_random_horizons(ex22):
    rng = random.Random(20240917)
    seen = {}
    for _ in range(200):
        T = F(rng.randint(1, 2000), 1000)
        rep = solve_degenerate(ex22, T)
        seq = rep.certificate
        if T < F(5, 12):
            assert seq == S1
        elif F(5, 12) < T < 1:
            assert seq == S2
        elif T > 1:
            assert seq == S3
        seen[seq] = True
    assert len([s for s in seen if s in (S1, S2, S3)]) == 3


def test_interval_objectives_decrease(ex22):
    for T in (F(3, 4), F(3, 2)):
        seq = solve(ex22, T).certificate
        objs = [rates_objective(ex22, rates_from_basis(ex22, b)) for b in seq.bases]
        assert all(a > b for a, b in zip(objs, objs[1:]))


def test_verify_certificate_modes(ex22):
    assert verify_certificate(ex22, F(1, 3), S1).optimal
    res = verify_certificate(ex22, F(1, 2), S1)
    assert not res.optimal and "pN[1]" in res.violation


small = st.integers(-5, 5)


@st.composite
def instances(draw):
    K = draw(st.integers(1, 2))
    J = draw(st.integers(1, 2))
    A = [[draw(small) for _ in range(J)] for _ in range(K)]
    vec = lambda n: [draw(small) for _ in range(n)]
    T = draw(st.fractions(min_value=F(1, 10), max_value=4, max_denominator=10))
    return MclpProblem(A, vec(K), vec(K), vec(J), vec(J)), T


@given(instances())
def test_strong_duality_on_random_instances(inst):
    p, T = inst
    rep = solve(p, T)
    primal_ok = is_feasible(build_test_lp(p, T, Side.PRIMAL))
    dual_ok = is_feasible(build_test_lp(p, T, Side.DUAL))
    if rep.verdict is not BOTH:
        assert not (primal_ok and dual_ok)
        return
    assert primal_ok and dual_ok
    assert rep.objective == rep.dual_objective
    assert complementary_slackness_integrals(rep.solution) == (0, 0)
