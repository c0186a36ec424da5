import numpy as np
import pytest

from commcascade import (DegreeDistribution, GlobalSeeding, LinearThreshold,
                         ModelSpec, is_contagious, perron_root,
                         single_community_equivalent, small_seed_limit,
                         unseeded_jacobian)
from _helpers import poisson_model


def test_perron_root_scalar_cases():
    assert perron_root(2.5 * np.eye(4)) == pytest.approx(2.5, abs=1e-12)
    assert perron_root(np.zeros((3, 3))) == 0.0


def test_perron_root_rank_one():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.uniform(0, 2, 4)
        w = rng.uniform(0, 2, 4)
        rho = perron_root(np.outer(v, w))
        assert rho == pytest.approx(float(w @ v), abs=1e-10)


def test_perron_root_periodic_and_reducible():
    # eigenvalues +-1: plain power iteration oscillates, the shift fixes it
    m = np.array([[0.0, 2.0], [0.5, 0.0]])
    assert perron_root(m) == pytest.approx(1.0, abs=1e-10)
    # reducible: nilpotent block plus decoupled diagonal
    m2 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.7]])
    assert perron_root(m2) == pytest.approx(0.7, abs=1e-12)
    with pytest.raises(ValueError):
        perron_root(np.array([[1.0, -0.1], [0.0, 1.0]]))


def test_perron_root_bounds():
    rng = np.random.default_rng(1)
    for _ in range(50):
        m = rng.uniform(0, 1, (4, 4))
        rho = perron_root(m)
        rows = m.sum(axis=1)
        assert rows.min() - 1e-9 <= rho <= rows.max() + 1e-9
        assert rho >= m.diagonal().max() - 1e-9


def test_unseeded_jacobian_zero_without_pivotal_mass():
    m = ModelSpec(p1=DegreeDistribution.regular(3), p2=DegreeDistribution.regular(3),
                  pm=DegreeDistribution.regular(2), n1=10, n2=10,
                  threshold=LinearThreshold(0.6), seeding=GlobalSeeding(0.05))
    rep = is_contagious(m)
    assert np.all(rep.jacobian_at_one == 0.0)
    assert rep.rho == 0.0
    assert not rep.contagious


def test_unseeded_jacobian_entry_oracle():
    m = poisson_model(8, 8, 1)
    jac = unseeded_jacobian(m)
    p1, pm = m.p1.pmf, m.pm.pmf
    hand = sum(p1[d1] * pm[d2] * d1 * (d1 - 1) / m.p1.mean
               for d1 in range(len(p1)) for d2 in range(len(pm))
               if d1 + d2 <= 4)
    assert jac[0, 0] == pytest.approx(hand, abs=1e-12)


def test_is_contagious_cross_checks_general_jacobian():
    m = poisson_model(2, 3, 0.8)
    rep = is_contagious(m)
    from commcascade import recursion_jacobian
    general = recursion_jacobian(m, np.ones(4), seeding=GlobalSeeding(0.0))
    assert np.max(np.abs(rep.jacobian_at_one - general)) < 1e-12


def test_contagion_community_invariance():
    # symmetric Poisson: the 4x4 root equals the collapsed scalar derivative
    for l1, lm in [(1.5, 1.0), (2.0, 0.5), (5.0, 1.0), (0.8, 0.3)]:
        m = poisson_model(l1, l1, lm)
        rep = is_contagious(m)
        rho1 = single_community_equivalent(m).contagion_rho()
        assert abs(rep.rho - rho1) < 1e-10


def test_contagion_window_in_total_rate():
    # theta = 0.25: contagious strictly inside the window, not outside
    assert is_contagious(poisson_model(1.5, 1.5, 1.0)).contagious      # total 2.5
    assert is_contagious(poisson_model(2.5, 2.5, 0.5)).contagious      # total 3.0
    assert not is_contagious(poisson_model(5.0, 5.0, 1.0)).contagious  # total 6.0
    assert not is_contagious(poisson_model(0.3, 0.3, 0.2)).contagious  # total 0.5


def test_rho_continuity_along_sweep():
    rhos = []
    for l1 in np.arange(1.0, 1.2001, 0.01):
        rhos.append(is_contagious(poisson_model(l1, l1, 1.0)).rho)
    assert np.max(np.abs(np.diff(rhos))) < 0.1


def test_small_seed_limit_verdicts():
    alphas = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    non = small_seed_limit(poisson_model(8, 8, 1), alphas)
    assert non.verdict == "no_contagion"
    deficits = [r.deficit for r in non.rows]
    assert all(a >= b - 1e-12 for a, b in zip(deficits, deficits[1:]))
    assert deficits[-1] < 1e-3

    cont = small_seed_limit(poisson_model(1.5, 1.5, 1.0), alphas)
    assert cont.verdict == "contagion"
    assert min(r.deficit for r in cont.rows) > 0.05

    single = small_seed_limit(poisson_model(8, 8, 1), [1e-3])
    assert single.verdict is None
    with pytest.raises(ValueError):
        small_seed_limit(poisson_model(8, 8, 1), [1e-3, 1e-2])
    with pytest.raises(ValueError):
        small_seed_limit(poisson_model(8, 8, 1), [])


def test_verdicts_match_predicate_on_grid():
    for l1, lm in [(1.2, 0.5), (1.5, 1.0), (4.0, 1.0), (6.0, 0.5), (0.4, 0.3)]:
        m = poisson_model(l1, l1, lm)
        rep = is_contagious(m)
        if rep.margin < 0.05:
            continue
        table = small_seed_limit(m, [1e-2, 1e-3, 1e-4, 1e-5])
        expected = "contagion" if rep.contagious else "no_contagion"
        assert table.verdict == expected


def test_report_serialization():
    rep = is_contagious(poisson_model(2, 2, 1))
    doc = rep.to_dict()
    assert set(doc) >= {"rho", "contagious", "margin", "jacobian", "pivotal_masses"}
    assert len(doc["jacobian"]) == 4
    assert doc["pivotal_masses"]["dF11_dmu11"] == rep.jacobian_at_one[0, 0]
