"""Category-split monitoring: LRT statistics, chi-square tail, Monte Carlo."""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln

from graphwatch.models import CategoricalDirichlet, PoissonGamma
from graphwatch.splits import (
    CategoryCounts,
    SplitModel,
    chi_square_sf,
    lrt_augmented,
    lrt_conditional,
    monte_carlo_pvalue,
)


def flat_model(k=3, alpha=1.0, total=None):
    return SplitModel(
        CategoricalDirichlet.flat(range(k), alpha),
        total_model=total or PoissonGamma(1, 1),
    )


def test_conditional_statistic_worked_example():
    # by hand: 2 * (3 ln(3 / (4/3)) + 1 ln(1 / (4/3))) = 4.29022...
    expected = 2 * (3 * math.log(9 / 4) + math.log(3 / 4))
    model = flat_model()
    counts = CategoryCounts({0: 3, 1: 0, 2: 1})
    assert lrt_conditional(model, counts) == pytest.approx(expected, abs=1e-10)
    assert lrt_conditional(model, counts) == pytest.approx(4.2902, abs=1e-3)


def test_conditional_statistic_zero_cases():
    model = flat_model()
    proportional = CategoryCounts({0: 4, 1: 4, 2: 4})
    assert lrt_conditional(model, proportional) == pytest.approx(0.0, abs=1e-12)
    single = SplitModel(CategoricalDirichlet.flat(["only"], 2.0), PoissonGamma(1, 1))
    assert lrt_conditional(single, CategoryCounts({"only": 9})) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        lrt_conditional(model, CategoryCounts({0: 0}))


def test_augmented_statistic_worked_example():
    model = flat_model()
    counts = CategoryCounts({0: 3, 1: 0, 2: 1})
    # PG(1,1) predictive is geometric(1/2): P(4) = 1/32
    expected = lrt_conditional(model, counts) + 2 * math.log(32)
    value = lrt_augmented(model, counts)
    assert value == pytest.approx(expected, abs=1e-10)
    assert value == pytest.approx(11.2217, abs=1e-3)


def test_augmented_reduces_to_total_surprise_for_proportional_counts():
    model = flat_model()
    counts = CategoryCounts({0: 2, 1: 2, 2: 2})
    assert lrt_augmented(model, counts) == pytest.approx(
        -2 * math.log(model.total_model.pmf(6)), abs=1e-10
    )


def test_augmented_approaches_conditional_as_total_certainty_grows():
    counts = CategoryCounts({0: 3, 1: 0, 2: 1})
    gaps = []
    for scale in (10, 1000, 100000):
        model = flat_model(total=PoissonGamma(4.0 * scale, 1.0 * scale))
        gaps.append(lrt_augmented(model, counts) - lrt_conditional(model, counts))
    assert gaps[0] > gaps[1] > gaps[2]
    # -2 log P(4) under an ever-sharper predictive at its mode keeps shrinking
    assert gaps[2] < 3.5


def test_augmented_at_least_conditional_on_random_cases():
    rng = np.random.default_rng(99)
    for _ in range(10_000):
        k = int(rng.integers(2, 6))
        model = SplitModel(
            CategoricalDirichlet.flat(range(k), float(rng.uniform(0.05, 3.0))),
            PoissonGamma(float(rng.uniform(0.2, 8)), float(rng.uniform(0.2, 4))),
        )
        raw = rng.multinomial(int(rng.integers(1, 30)), rng.dirichlet(np.ones(k)))
        counts = CategoryCounts({i: int(c) for i, c in enumerate(raw)})
        assert lrt_augmented(model, counts) >= lrt_conditional(model, counts) - 1e-12


def test_conditional_invariant_under_label_permutation():
    rng = np.random.default_rng(4)
    raw = [5, 0, 2, 9]
    model = flat_model(k=4, alpha=0.7)
    base = lrt_conditional(model, CategoryCounts(dict(enumerate(raw))))
    for _ in range(5):
        perm = rng.permutation(4)
        shuffled = CategoryCounts({int(i): raw[j] for i, j in enumerate(perm)})
        assert lrt_conditional(model, shuffled) == pytest.approx(base, rel=1e-12)


def test_chi_square_sf_values():
    # df = 2 closed form: exp(-x/2)
    assert chi_square_sf(4.2902, 2) == pytest.approx(math.exp(-2.1451), abs=1e-10)
    assert chi_square_sf(4.2902, 2) == pytest.approx(0.1170, abs=5e-4)
    assert chi_square_sf(0.0, 5) == 1.0
    assert chi_square_sf(3.841, 1) == pytest.approx(0.05, abs=5e-4)
    # independent oracle: numeric integration of the chi-square density
    for x, df in ((1.7, 1), (4.2902, 2), (11.2, 7)):
        density = lambda t: math.exp(
            (df / 2 - 1) * math.log(t) - t / 2 - gammaln(df / 2) - (df / 2) * math.log(2)
        )
        expected, _ = integrate.quad(density, x, np.inf)
        assert chi_square_sf(x, df) == pytest.approx(expected, abs=1e-10)
    with pytest.raises(ValueError):
        chi_square_sf(-1.0, 2)
    with pytest.raises(ValueError):
        chi_square_sf(1.0, 0)


def test_monte_carlo_rank_symmetry():
    # when the observed period is itself a draw from the predictive, its rank
    # among simulated statistics is uniform, so the p-values center on 1/2
    model = flat_model(k=3, alpha=2.0, total=PoissonGamma(8, 2))
    rng = np.random.default_rng(7)
    pvals = []
    for rep in range(61):
        n = 0
        while n == 0:
            lam = rng.gamma(8, 1 / 2)
            n = int(rng.poisson(lam))
        counts_raw = rng.multinomial(n, rng.dirichlet([2.0, 2.0, 2.0]))
        counts = CategoryCounts({i: int(c) for i, c in enumerate(counts_raw)})
        pvals.append(monte_carlo_pvalue(model, counts, draws=1000, seed=1000 + rep))
    assert 0.35 <= float(np.median(pvals)) <= 0.65


def test_monte_carlo_deterministic_given_seed():
    model = flat_model(k=4, alpha=0.5, total=PoissonGamma(3, 1))
    counts = CategoryCounts({0: 5, 1: 0, 2: 0, 3: 0})
    p1 = monte_carlo_pvalue(model, counts, draws=1000, seed=13)
    p2 = monte_carlo_pvalue(model, counts, draws=1000, seed=13)
    assert p1 == p2
    with pytest.raises(ValueError):
        monte_carlo_pvalue(model, counts, draws=10)


def test_new_tower_scenario_flags_day_eight():
    # 30 declared towers, flat 1/30 prior; seven stable days on towers 0-4,
    # then 30 calls spread over seven never-used towers
    towers = [str(i) for i in range(30)]
    model = SplitModel(
        CategoricalDirichlet.flat(towers, 1.0 / 30.0),
        total_model=PoissonGamma(16.0 / 9.0, 2.0 / 9.0),
        growth_prior=1.0 / 30.0,
    )
    rng = np.random.default_rng(17)
    for _ in range(7):
        day = rng.multinomial(8, [0.3, 0.3, 0.2, 0.1, 0.1])
        model.observe(CategoryCounts({towers[i]: int(c) for i, c in enumerate(day)}))
    burst = {towers[10 + i]: c for i, c in enumerate((5, 5, 4, 4, 4, 4, 4))}
    counts = CategoryCounts(burst)
    assert model.new_categories(counts) == []  # declared up front, never used
    p = monte_carlo_pvalue(model, counts, draws=2000, seed=5)
    assert p <= 0.05
    # the chi-square route on the conditional statistic agrees
    stat = lrt_conditional(model, counts)
    assert chi_square_sf(stat, df=29) <= 0.05


def test_undeclared_categories_grow_the_universe():
    model = SplitModel(
        CategoricalDirichlet.flat(["a", "b"], 0.5),
        total_model=PoissonGamma(2, 1),
        growth_prior=0.5,
    )
    counts = CategoryCounts({"a": 1, "z": 3})
    assert model.new_categories(counts) == ["z"]
    stat = lrt_conditional(model, counts)
    assert stat > 0
    model.observe(counts)
    assert "z" in model.dirichlet.categories
    assert model.new_categories(counts) == []
