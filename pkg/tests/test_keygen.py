"""Tests for shared-base derivation and per-agency key generation."""

import numpy as np
import pytest

from maskreg.errors import DimMismatch
from maskreg.keygen import (
    RESPONSE_KEY_DEGREE,
    agency_rng,
    default_degree,
    derive_bases,
    draw_commuting_key,
    gen_agency_keys,
    key_fingerprint,
    make_responses,
)


def test_default_degree_caps_at_sixteen():
    assert default_degree(2) == 2
    assert default_degree(16) == 16
    assert default_degree(90) == 16


def test_derive_bases_deterministic():
    a = derive_bases(123, 7)
    b = derive_bases(123, 7)
    assert np.array_equal(a.b_basis, b.b_basis)
    assert np.array_equal(a.c_basis, b.c_basis)
    assert a.degree == b.degree == 7


def test_derive_bases_seed_sensitivity():
    a = derive_bases(123, 5)
    b = derive_bases(124, 5)
    assert not np.array_equal(a.b_basis, b.b_basis)


def test_derive_bases_shapes():
    bases = derive_bases(0, 9, degree=4)
    assert bases.b_basis.shape == (9, 9)
    assert bases.c_basis.shape == (3, 3)
    assert bases.degree == 4


def test_derive_bases_rejects_bad_degree():
    with pytest.raises(DimMismatch):
        derive_bases(0, 5, degree=0)
    with pytest.raises(DimMismatch):
        derive_bases(0, 5, degree=99)


def test_drawn_keys_commute_and_invert():
    bases = derive_bases(7, 6)
    rng = np.random.default_rng(1)
    _, k1 = draw_commuting_key(bases.b_basis, bases.degree, rng, 3)
    _, k2 = draw_commuting_key(bases.b_basis, bases.degree, rng, 3)
    np.testing.assert_allclose(k1 @ k2, k2 @ k1, atol=1e-10)
    assert np.linalg.cond(k1) < 1e4
    # round-trip through the inverse
    np.testing.assert_allclose(
        np.linalg.solve(k1, k1 @ np.eye(6)), np.eye(6), atol=1e-10
    )


def test_draw_commuting_key_coeff_consistency():
    bases = derive_bases(7, 4)
    rng = np.random.default_rng(2)
    coeffs, key = draw_commuting_key(bases.b_basis, bases.degree, rng, 2)
    from maskreg.matrix_core import commute_materialize

    np.testing.assert_allclose(
        key, commute_materialize(bases.b_basis, coeffs), atol=1e-12
    )


def test_gen_agency_keys_layout():
    bases = derive_bases(3, 5)
    keys = gen_agency_keys(bases, 2, [10, 14, 9], 4, np.random.default_rng(0))
    assert keys.agency_id == 2
    assert keys.b_key.shape == (5, 5)
    assert keys.c_key.shape == (3, 3)
    assert sorted(keys.a_blocks_for) == [1, 2, 3]
    assert keys.a_blocks_for[1].n_rows == 10
    assert keys.a_blocks_for[2].n_rows == 14
    assert keys.a_blocks_for[3].n_rows == 9


def test_gen_agency_keys_rejects_bad_id():
    bases = derive_bases(3, 4)
    with pytest.raises(DimMismatch):
        gen_agency_keys(bases, 4, [5, 5], 4, np.random.default_rng(0))


def test_fingerprint_covers_structure_not_secrets():
    bases = derive_bases(11, 4)
    keys_a = gen_agency_keys(bases, 1, [8, 8], 4, np.random.default_rng(1))
    keys_b = gen_agency_keys(bases, 1, [8, 8], 4, np.random.default_rng(2))
    keys_c = gen_agency_keys(bases, 2, [8, 8], 4, np.random.default_rng(1))
    # same public layout, different secret draws -> same fingerprint
    assert key_fingerprint(keys_a) == key_fingerprint(keys_b)
    # a different agency id is a different public identity
    assert key_fingerprint(keys_a) != key_fingerprint(keys_c)


def test_make_responses_linear():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((6, 4))
    y = rng.standard_normal(6)
    resp = make_responses(x, y, "linear", rng)
    assert resp.shape == (6, 3)
    np.testing.assert_allclose(resp[:, 0], y)
    np.testing.assert_allclose(resp[:, 1], x.sum(axis=1))


def test_make_responses_linear_with_offset():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((5, 3))
    y = rng.standard_normal(5)
    delta = rng.standard_normal((5, 3))
    resp = make_responses(x, y, "linear", rng, delta=delta)
    np.testing.assert_allclose(resp[:, 1], (x + delta).sum(axis=1))


def test_make_responses_ridge_targets_zero():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((6, 4))
    y = rng.standard_normal(6)
    resp = make_responses(x, y, "ridge", rng)
    assert np.all(resp[:, 1] == 0.0)
    np.testing.assert_allclose(resp[:, 0], y)


def test_decoy_response_varies_with_rng():
    x = np.ones((4, 2))
    y = np.ones(4)
    r1 = make_responses(x, y, "linear", np.random.default_rng(1))
    r2 = make_responses(x, y, "linear", np.random.default_rng(2))
    assert not np.array_equal(r1[:, 2], r2[:, 2])


def test_response_key_degree_is_cubic():
    assert RESPONSE_KEY_DEGREE == 3


def test_agency_rng_deterministic_and_distinct():
    a = agency_rng(9, 1).standard_normal(4)
    b = agency_rng(9, 1).standard_normal(4)
    c = agency_rng(9, 2).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
