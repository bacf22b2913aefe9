from fractions import Fraction

import pytest

from orthoselmer.distrib import compare_models, mean_size, moment, tv_distance
from orthoselmer.kernelmodel import (GenFun, KernelDistParams, T, burnside_orbit_count,
                                     coset_pgf, dimension_counts, edge_moment,
                                     enumerated_moment, enumerated_pgf, g_identity_forms,
                                     interpolation_polys, kernel_distribution, lagrange,
                                     limit_constant, moments_closed_form, orbit_count_product,
                                     orbit_count_recursive, orbit_count_table,
                                     product_mean_enumerated, rudvalis_shinoda_law,
                                     rudvalis_shinoda_limit, rudvalis_shinoda_pmf,
                                     rudvalis_shinoda_printed_odd, spec_pgf)
from orthoselmer.modring import ModuleClass
from orthoselmer.orthogroup import CosetSpec, group_order


def test_genfun_arithmetic():
    p = GenFun([1, 2]) * GenFun([0, 1]) + 3
    assert p.c == (3, 1, 2) and p(2) == 13
    assert (p - p) == GenFun([0])
    q = lagrange([(0, 1), (1, 3), (2, 7)])
    assert [q(x) for x in (0, 1, 2)] == [1, 3, 7]


def test_moments_examples():
    assert moments_closed_form(3, 1) == 4
    assert moments_closed_form(3, 2) == 40
    assert moments_closed_form(2, 3) == 135
    assert edge_moment(3, 2, 2, "H") == 41 and edge_moment(3, 2, 2, "O-H") == 39
    assert edge_moment(3, 2, 1, "O-H") == 4
    with pytest.raises(ValueError):
        edge_moment(3, 2, 3, "H")


def test_orbit_counts():
    assert orbit_count_recursive(3, 2) == 40
    assert orbit_count_recursive(3, 0) == 1
    for ell in (2, 3, 5):
        for m in range(6):
            prod = 1
            for i in range(1, m + 1):
                prod *= 1 + ell**i
            assert orbit_count_recursive(ell, m) == prod == orbit_count_product(ell, m)
    f = orbit_count_table(3, 2)
    assert f[2] == [1, 12, 27]


def test_burnside_small():
    assert burnside_orbit_count(3, 2, 1, "trivial") == 81
    assert burnside_orbit_count(3, 2, 2, "SO") == burnside_orbit_count(3, 2, 2, "O") + 1
    assert burnside_orbit_count(3, 2, 1, "O") == 4
    assert burnside_orbit_count(3, 2, 1, CosetSpec.omega(3)) == 4


def test_rs_normalisation():
    for ell in (2, 3, 5):
        for N in range(2, 11):
            assert sum(rudvalis_shinoda_law(ell, N).values()) == 1


def test_rs_printed_odd_branch_does_not_normalise():
    law = rudvalis_shinoda_law(3, 2)
    printed = dict(law)
    for z in range(2):
        printed[2 * z + 1] = rudvalis_shinoda_printed_odd(3, 2, z)
    assert sum(printed.values()) != 1


def test_rs_matches_enumeration_n2():
    for ell in (3, 5, 2):
        counts = dimension_counts(ell, 2)
        tot = sum(counts.values())
        assert {k: Fraction(v, tot) for k, v in counts.items()} == rudvalis_shinoda_law(ell, 2)
    assert rudvalis_shinoda_law(3, 2)[0] == Fraction(41, 128)


def test_rs_limit():
    for ell in (2, 3, 5):
        assert abs(float(rudvalis_shinoda_pmf(ell, 60, 0)) - limit_constant(ell)) < 1e-12
        tot = sum(rudvalis_shinoda_limit(ell, v) for v in range(40))
        assert tot == pytest.approx(1.0, abs=1e-12)


def test_interpolation_and_gr():
    P, Pp = interpolation_polys(3, 2)
    assert P.degree == 4 and Pp.degree == 3
    assert [P(3**j) for j in range(3)] == [1, 4, 40]
    assert [Pp(3**j) for j in range(2)] == [1, 4]
    G = coset_pgf(3, 2, "H")
    assert G(1) == 1 and G.is_pgf()
    assert G.coeff(4) == Fraction(1, group_order(2, 3) // 2)
    forms = g_identity_forms(3, 2)
    assert forms["G_r_via_P_r_minus_1"] == forms["G_r_via_P_r"] == enumerated_pgf(3, 2, "H")
    assert forms["G'_r+1_via_P'_r"] == forms["G'_r+1_via_P'_r+1"]


@pytest.mark.parametrize("coset", ["O", "H", "O-H", "Omega", "A", "B", "C"])
def test_coset_pgf_matches_enumeration(coset):
    assert coset_pgf(3, 2, coset) == enumerated_pgf(3, 2, coset)


def test_coset_pgf_ell2():
    for coset in ("O", "H", "O-H"):
        assert coset_pgf(2, 3, coset) == enumerated_pgf(2, 3, coset)
    with pytest.raises(ValueError):
        coset_pgf(2, 2, "Omega")


def test_coset_parity_and_moment_matching():
    r = 4
    pg = {c: coset_pgf(3, r, c) for c in ("Omega", "A", "B", "C")}
    for c, G in pg.items():
        assert G.is_pgf()
        assert G.parity_support() == ({0} if c in ("Omega", "A") else {1})
    assert pg["B"] == pg["C"]
    for j in range(r):
        vals = {G(3**j) for G in pg.values()}
        assert vals == {moments_closed_form(3, j)}
    assert pg["Omega"] != pg["A"]


def test_moments_from_enumeration():
    for j in range(2):
        assert enumerated_moment(3, 2, j, "O") == moments_closed_form(3, j)
    assert enumerated_moment(3, 2, 2, "H") == 41
    assert enumerated_moment(3, 2, 2, "O-H") == 39


def test_kernel_distribution_exact_m2():
    D = kernel_distribution(KernelDistParams(3, m=2))
    assert mean_size(D) == 4
    counts = dimension_counts(3, 2)
    assert D.prob(ModuleClass.trivial()) == Fraction(counts[0], 1152)
    full = ModuleClass.elementary(3, 4)
    assert D.prob(full) == Fraction(1, 1152)
    odd = kernel_distribution(KernelDistParams(3, m=2, coset=CosetSpec(1, None)))
    assert odd.prob(full) == 0


def test_kernel_distribution_joint_and_closed():
    spec = CosetSpec.from_height(2, 5, 3)
    ex = kernel_distribution(KernelDistParams(3, m=2, coset=spec, joint=True))
    cf = kernel_distribution(KernelDistParams(3, m=2, coset=spec, joint=True, mode="closed"))
    assert ex == cf
    assert all(k[0] == k[1].dim(3) % 2 for k in ex.weights)
    assert all(k[0] in (0, 1) for k in ex.weights)
    with pytest.raises(ValueError):
        KernelDistParams(9, m=2, mode="closed")


def test_kernel_distribution_composite():
    D = kernel_distribution(KernelDistParams(15, m=2, coset=CosetSpec.from_height(2, 7, 15)))
    assert mean_size(D) == 24
    num, cnt = product_mean_enumerated(2, (3, 5), CosetSpec.from_height(2, 7, 15))
    assert num == 24 and cnt == group_order(2, 3) * group_order(2, 5) // 8


def test_kernel_distribution_mod9():
    D = kernel_distribution(KernelDistParams(9, m=2))
    # Burnside: the mean equals the number of orbits on (Z/9)^4, namely 9 norm
    # classes of primitive vectors, 3 classes of 3 * primitive, and zero
    assert mean_size(D) == 13
    assert sum(D.probs().values()) == 1
    assert D.prob(ModuleClass.elementary(3, 4, 2)) == Fraction(1, 1152 * 729)


def test_budget():
    with pytest.raises(RuntimeError, match="budget"):
        kernel_distribution(KernelDistParams(3, m=3, budget=1000))


def test_mc_converges_to_exact():
    spec = CosetSpec.from_height(2, 5, 3)
    ex = kernel_distribution(KernelDistParams(3, m=2, coset=spec))
    mc = kernel_distribution(KernelDistParams(3, m=2, coset=spec, mode="mc", samples=20000,
                                              seed=3))
    rep = compare_models(ex, mc)
    assert rep["pass"]
    assert mc.meta["samples"] == 20000 and mc.meta["seed"] == 3


def test_spec_pgf_matches_enumeration():
    spec = CosetSpec.from_height(2, 5, 3)
    law = kernel_distribution(KernelDistParams(3, m=2, coset=spec))
    pgf = spec_pgf(3, 2, spec)
    assert {ModuleClass.elementary(3, i): a for i, a in pgf.pmf().items()} == law.probs()


def test_dickson_tv_against_enumeration():
    a = kernel_distribution(KernelDistParams(3, m=2, coset=CosetSpec(0, None)))
    b = kernel_distribution(KernelDistParams(3, m=2, coset=CosetSpec(1, None)))
    # supports have opposite parity, so the distance is 1
    assert tv_distance(a, b) == 1
    for j in range(2):
        assert moment(a, j) == moment(b, j)
