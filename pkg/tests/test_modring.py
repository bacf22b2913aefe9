import itertools

import numpy as np
import pytest

from orthoselmer.modring import (MatrixMod, ModuleClass, Modulus, crt_join, crt_split, inverse,
                                 is_invertible, kernel_class, kernel_size, smith_normal_form,
                                 snf_exponents)


def brute_kernel(a, n):
    k = a.shape[1]
    return sum(1 for x in itertools.product(range(n), repeat=k)
               if not np.any(a @ np.array(x) % n))


def random_invertible(rng, k, n):
    while True:
        A = MatrixMod(rng.integers(0, n, (k, k)), n)
        if is_invertible(A):
            return A


def test_modulus_factorisation():
    m = Modulus.of(360)
    assert m.factorization == ((2, 3), (3, 2), (5, 1))
    assert Modulus.of(9).is_prime_power and not Modulus.of(9).is_prime
    with pytest.raises(ValueError):
        Modulus.of(1)
    with pytest.raises(ValueError):
        Modulus.of(2**40)
    with pytest.raises(ValueError):
        Modulus.of(15).local()


def test_matrix_canonical_and_immutable():
    A = MatrixMod([[-1, 10], [4, 3]], 9)
    assert A.a.tolist() == [[8, 1], [4, 3]]
    with pytest.raises((AttributeError, ValueError)):
        A.a[0, 0] = 1
    with pytest.raises(ValueError):
        A @ MatrixMod(np.eye(2), 5)


@pytest.mark.parametrize("A, n, exps", [
    (np.eye(3), 9, [0, 0, 0]),
    (np.zeros((2, 2)), 9, [2, 2]),
    (np.diag([3, 1]), 9, [0, 1]),
])
def test_snf_examples(A, n, exps):
    got, (U, V) = smith_normal_form(MatrixMod(A, n))
    assert got == exps
    assert snf_exponents(MatrixMod(A, n)) == exps
    D = (U @ MatrixMod(A, n) @ V).a
    assert np.array_equal(D, np.diag(np.diag(D)))


def test_snf_transforms_and_invariance():
    rng = np.random.default_rng(0)
    for _ in range(40):
        A = MatrixMod(rng.integers(0, 27, (4, 4)) * rng.integers(0, 2, (4, 4)), 27)
        exps, (U, V) = smith_normal_form(A)
        assert is_invertible(U) and is_invertible(V)
        D = (U @ A @ V).a
        want = np.diag([(3**c) % 27 for c in exps])
        assert np.array_equal(D, want)
        P, R = random_invertible(rng, 4, 27), random_invertible(rng, 4, 27)
        assert snf_exponents(P @ A @ R) == exps
        assert snf_exponents(A) == exps


def test_snf_rejects_composite():
    with pytest.raises(ValueError):
        smith_normal_form(MatrixMod(np.eye(2), 15))


def test_kernel_class_examples():
    assert kernel_class(MatrixMod(np.zeros((4, 4)), 9)) == ModuleClass.elementary(3, 4, 2)
    assert kernel_class(MatrixMod(np.diag([3, 1]), 9)) == ModuleClass.from_dict({3: [1]})
    rng = np.random.default_rng(1)
    assert kernel_class(random_invertible(rng, 3, 9)) == ModuleClass.trivial()


def test_kernel_size_matches_brute_force():
    rng = np.random.default_rng(2)
    for n, k in [(9, 3), (8, 2), (3, 4), (27, 2)]:
        for _ in range(15):
            a = rng.integers(0, n, (k, k)) * rng.integers(0, 2, (k, k)) * rng.integers(1, 4)
            A = MatrixMod(a, n)
            assert kernel_size(A) == brute_kernel(A.a, n)


def test_crt_round_trip_and_zero():
    rng = np.random.default_rng(3)
    z = crt_split(MatrixMod(np.zeros((2, 2)), 15))
    assert all(not np.any(M.a) for M in z.values())
    for _ in range(20):
        A = MatrixMod(rng.integers(0, 15, (3, 3)), 15)
        assert crt_join(crt_split(A)) == A


def test_kernel_class_all_2x2_mod_15():
    # every 2x2 matrix over Z/15 against brute-force kernel size
    for entries in itertools.product(range(15), repeat=4):
        if sum(entries) % 7:  # a deterministic sixth-ish of the 50625 matrices
            continue
        a = np.array(entries, dtype=np.int64).reshape(2, 2)
        cls = kernel_class(MatrixMod(a, 15))
        parts = crt_split(MatrixMod(a, 15))
        assert cls == kernel_class(parts[3]) + kernel_class(parts[5])
        assert cls.order == brute_kernel(a, 15)


def test_inverse():
    rng = np.random.default_rng(4)
    for n in (9, 15, 7, 16):
        A = random_invertible(rng, 4, n)
        assert A @ inverse(A) == MatrixMod.identity(4, n)


def test_module_class_algebra_and_json():
    c = ModuleClass.from_dict({3: [1, 2], 5: [1]})
    assert c.exps(3) == (2, 1) and c.order == 27 * 5 and c.dim(3) == 2
    assert ModuleClass.from_json(c.to_json()) == c
    assert c.to_json() == [{"ell": 3, "exps": [2, 1]}, {"ell": 5, "exps": [1]}]
    assert c.truncate(3, 1) == ModuleClass.from_dict({3: [1, 1], 5: [1]})
    assert c + ModuleClass.trivial() == c
    with pytest.raises(ValueError):
        ModuleClass.from_dict({3: [0]})
