import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopmotion.dist_core import (
    DistributionError,
    LatticeDist,
    ModelParams,
    cdf_at,
    dominates,
    max_atom,
    parse_dist,
    parse_pairs,
    rescaled_cdf,
    sup_distance,
)


def test_model_params_validation():
    ModelParams(1, 0.5)
    ModelParams(2.5, 0.1)
    assert ModelParams(3, 0.2).integer_m
    assert not ModelParams(1.5, 0.2).integer_m
    for m, q in [(0.5, 0.5), (1, 0.0), (1, 1.0), (1, -0.1), (float("nan"), 0.5)]:
        with pytest.raises(ValueError):
            ModelParams(m, q)


def test_cdf_is_strict():
    d = LatticeDist.from_pairs({0: 0.5, 1: 0.5})
    assert cdf_at(d, 0) == 0.0
    assert cdf_at(d, 1) == 0.5
    assert cdf_at(d, 2) == 1.0
    assert cdf_at(d, -100) == 0.0


def test_extended_atoms_in_cdf():
    d = parse_pairs("-inf:0.2,0:0.5,+inf:0.3")
    assert d.cdf(-10**9) == pytest.approx(0.2)
    assert d.cdf(10**9) == pytest.approx(0.7)
    assert max_atom(d) == 0.5
    assert max_atom(parse_pairs("-inf:0.6,0:0.4")) == 0.6


def test_normalisation_and_negativity():
    with pytest.raises(DistributionError):
        LatticeDist(0, np.array([0.5, 0.4]))
    with pytest.raises(DistributionError):
        LatticeDist(0, np.array([1.2, -0.2]))
    with pytest.raises(DistributionError):
        LatticeDist(0, np.array([1.0]), -0.1, 0.1)
    # rounding inside the tolerance is accepted
    LatticeDist(0, np.array([0.5, 0.5 + 5e-13]))


def test_trimming_folds_tiny_edges():
    d = LatticeDist(-2, np.array([1e-320, 0.5, 0.5, 0.0]))
    assert d.offset == -1
    assert d.mass.size == 2
    assert d.finite_mass() == 1.0


def test_dominance():
    low, high = LatticeDist.delta(0), LatticeDist.delta(1)
    assert dominates(high, low)
    assert not dominates(low, high)
    assert dominates(low, low)
    a = parse_pairs("0:0.5,+inf:0.5")
    b = parse_pairs("-inf:0.5,0:0.5")
    assert dominates(a, b) and not dominates(b, a)


def test_rescaled_cdf_uses_ceiling():
    d = LatticeDist.from_pairs({0: 0.25, 1: 0.25, 2: 0.5})
    # n=1, m=1: scale 1; x=0.5 -> k=1 -> P(X<1)
    assert rescaled_cdf(d, 1, 1, 0.5) == 0.25
    assert rescaled_cdf(d, 1, 1, 1.0) == 0.25
    assert rescaled_cdf(d, 1, 1, 1.0000001) == 0.5
    assert np.allclose(rescaled_cdf(d, 4, 1, [0.0, 0.5, 1.5]), [0.0, 0.25, 1.0])
    with pytest.raises(ValueError):
        rescaled_cdf(d, 0, 1, 0.0)


def test_sup_distance():
    assert sup_distance(lambda x: x, lambda x: 2 * x, [0.0, 1.0, 2.0]) == 2.0
    with pytest.raises(ValueError):
        sup_distance(lambda x: x, lambda x: x, [])


def test_parse_dist_text_format():
    d = parse_dist("# header\n-inf 0.25\n0 0.5\n\n+inf 0.25  # tail\n")
    assert (d.mass_neg_inf, d.pmf(0), d.mass_pos_inf) == (0.25, 0.5, 0.25)
    with pytest.raises(DistributionError):
        parse_dist("0 0.5 extra\n")
    with pytest.raises(DistributionError):
        parse_pairs("0:0.5,1:0.4")
    with pytest.raises(DistributionError):
        parse_pairs("0-0.5")


def test_text_round_trip():
    d = parse_pairs("-inf:0.125,-3:0.375,2:0.25,+inf:0.25")
    assert parse_dist(d.to_text()).allclose(d, 0.0)


def test_from_cdf_round_trip():
    d = parse_pairs("-inf:0.1,0:0.3,3:0.4,+inf:0.2")
    back = LatticeDist.from_cdf(d.cdf_values(), d.offset)
    assert back.allclose(d, 1e-15)
    with pytest.raises(DistributionError):
        LatticeDist.from_cdf(np.array([0.0, 0.5, 0.4, 1.0]), 0)


weights = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda w: sum(w) > 1e-3)


@given(weights, st.integers(-50, 50))
def test_cdf_monotone_and_bounded(w, off):
    w = np.array(w) / sum(w)
    d = LatticeDist(off, w)
    ks = np.arange(off - 3, off + len(w) + 3)
    F = d.cdf(ks)
    assert np.all(np.diff(F) >= 0)
    assert F[0] == 0.0 and abs(F[-1] - 1.0) < 1e-12
    pmf = np.array([d.pmf(int(k)) for k in ks[:-1]])
    assert np.allclose(np.diff(F), pmf, atol=1e-15)


@given(weights, weights)
def test_dominance_matches_coupling_definition(w1, w2):
    d1 = LatticeDist(0, np.array(w1) / sum(w1))
    d2 = LatticeDist(0, np.array(w2) / sum(w2))
    ks = np.arange(-2, max(len(w1), len(w2)) + 3)
    expected = bool(np.all(d1.cdf(ks) <= d2.cdf(ks)))
    assert dominates(d1, d2) == expected
    # a law shifted one site right dominates the original
    assert dominates(LatticeDist(d1.offset + 1, d1.mass), d1)


def test_immutable():
    d = LatticeDist.delta(0)
    with pytest.raises((AttributeError, TypeError)):
        d.offset = 3
    with pytest.raises(ValueError):
        d.mass[0] = 0.5
    assert math.isclose(d.finite_mass(), 1.0)
