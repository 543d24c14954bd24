from __future__ import annotations

import math
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpc, mpf

from focksobolev.moments import (
    CLOSED,
    QUADRATURE,
    SERIES,
    ConvergenceError,
    MomentQuery,
    QuadratureAccuracyWarning,
    closed_coefficient,
    weighted_gaussian_lhs,
    weighted_gaussian_rhs,
    moment,
    moment_closed,
    moment_quadrature,
    moment_series,
    moment_table,
)
from focksobolev.numerics import PrecComplex, parse_cnum


def disk(r):
    return st.tuples(st.floats(-r, r), st.floats(-r, r)).map(lambda t: mpc(*t)).filter(lambda z: abs(z) <= r)


idx = st.integers(0, 12)


def rel(a, b):
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale else mpf(0)


class TestClosedForm:
    def test_coefficients(self):
        assert closed_coefficient(2, 2, 2) == 2
        assert closed_coefficient(2, 2, 0) == 1
        assert closed_coefficient(1, 1, 1) == 1

    @given(disk(3), disk(3))
    def test_i11_witness(self, A, B):
        val = moment_closed(MomentQuery(1, 1, PrecComplex(A), PrecComplex(B))).mpc
        assert rel(val, (1 + A * B) * mp.exp(A * B)) <= mpf(10) ** -70

    def test_resonance_is_exact(self):
        q = MomentQuery(0, 0, parse_cnum("(1,0)"), parse_cnum("(0,2pi)"))
        v = moment_closed(q).mpc
        assert v.real == 1 and v.imag == 0

    def test_resonant_witness_entry(self):
        q = MomentQuery(1, 1, parse_cnum("(1,0)"), parse_cnum("(0,2pi)"))
        v = moment_closed(q).mpc
        assert v.real == 1 and v.imag == 2 * mp.pi

    @pytest.mark.parametrize("j,k", [(0, 0), (3, 3), (5, 2), (7, 7), (12, 12)])
    def test_rational_path_exact_integers(self, j, k):
        v = moment_closed(MomentQuery(j, k, PrecComplex(0), PrecComplex(0))).mpc
        expected = math.factorial(j) if j == k else 0
        assert v == expected and v.imag == 0
        assert int(v.real) == v.real

    @settings(max_examples=40, deadline=None)
    @given(idx, idx, disk(4), disk(4))
    def test_symmetry(self, j, k, A, B):
        a = moment_closed(MomentQuery(j, k, PrecComplex(A), PrecComplex(B))).mpc
        b = moment_closed(MomentQuery(k, j, PrecComplex(mp.conj(B)), PrecComplex(mp.conj(A)))).mpc
        assert rel(a, mp.conj(b)) <= mpf(10) ** -60


class TestPaths:
    @settings(max_examples=40, deadline=None)
    @given(idx, idx, disk(4), disk(4))
    def test_series_matches_closed(self, j, k, A, B):
        q = MomentQuery(j, k, PrecComplex(A), PrecComplex(B))
        assert rel(moment_closed(q).mpc, moment_series(q).mpc) <= mpf("1e-30")

    @settings(max_examples=15, deadline=None)
    @given(idx, idx, disk(4), disk(4))
    def test_quadrature_matches_closed(self, j, k, A, B):
        q = MomentQuery(j, k, PrecComplex(A), PrecComplex(B))
        res = moment_quadrature(q)
        ref = moment_closed(q).mpc
        # absolute floor: some moments vanish exactly (A = 0 with j < k)
        floor = mpf("1e-30") * mp.sqrt(math.factorial(j) * math.factorial(k))
        assert abs(ref - res.mpc) <= mpf("1e-10") * max(abs(ref), floor)
        assert res.path == QUADRATURE and res.err_estimate is not None

    def test_table_matches_closed(self):
        A, B = mpc(1.5, -0.5), mpc(-2, 1)
        table = moment_table(8, 9, A, B)
        for j in range(9):
            for k in range(10):
                ref = moment_closed(MomentQuery(j, k, PrecComplex(A), PrecComplex(B))).mpc
                assert rel(table[j][k], ref) <= mpf(10) ** -60

    def test_table_zero_frequency(self):
        table = moment_table(5, 5, 0, mpc(0.5, 1))
        ref = moment_closed(MomentQuery(4, 2, PrecComplex(0), PrecComplex(mpc(0.5, 1)))).mpc
        assert rel(table[4][2], ref) <= mpf(10) ** -70

    def test_dispatch(self):
        for path in (CLOSED, SERIES, QUADRATURE):
            assert moment(2, 1, mpc(0.5), mpc(0, 1), path=path).path == path
        with pytest.raises(ValueError):
            moment(0, 0, 0, 0, path="bogus")


class TestErrors:
    def test_index_range(self):
        with pytest.raises(ValueError):
            MomentQuery(-1, 0, PrecComplex(0), PrecComplex(0))

    def test_series_non_convergence(self):
        q = MomentQuery(3, 3, PrecComplex(mpc(4, 0)), PrecComplex(mpc(4, 0)))
        with pytest.raises(ConvergenceError) as err:
            moment_series(q, max_terms=5)
        assert err.value.partial is not None

    def test_quadrature_envelope(self):
        with pytest.raises(ValueError):
            moment_quadrature(MomentQuery(0, 0, PrecComplex(20), PrecComplex(1)))

    def test_quadrature_warns_when_underresolved(self):
        q = MomentQuery(12, 12, PrecComplex(mpc(6, 0)), PrecComplex(mpc(6, 0)))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            moment_quadrature(q, nodes=8, angles=16)
        assert any(issubclass(w.category, QuadratureAccuracyWarning) for w in caught)


class TestWeightedGaussian:
    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(disk(1), min_size=1, max_size=5),
        st.lists(disk(1), min_size=1, max_size=5),
        disk(1.5), disk(1.5), disk(1.5),
    )
    def test_differential_form_matches_moment_expansion(self, p, q, A, B, z):
        assert rel(weighted_gaussian_lhs(p, q, A, B, z), weighted_gaussian_rhs(p, q, A, B, z)) <= mpf("1e-25")

    def test_constant_weights_give_exponential(self):
        A, B, z = mpc(0.5, 0.2), mpc(-0.3, 1), mpc(0.1, -0.4)
        val = weighted_gaussian_rhs([1], [1], A, B, z)
        assert rel(val, mp.exp((A + mp.conj(z)) * (mp.conj(B) + z))) <= mpf(10) ** -70
