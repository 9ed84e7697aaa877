"""Multinomial monitoring of how a subject's activity splits across categories.

Given a subject's per-period total (calls, contacts) and the categories they
land in (recipients, cell towers), two statistics measure whether the split
is surprising: a conditional likelihood-ratio statistic that takes the total
as given, and an augmented statistic that also charges for how surprising
the total itself was under the subject's count model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import gammaincc

from .models import CategoricalDirichlet, CountModel

__all__ = [
    "CategoryCounts",
    "SplitModel",
    "lrt_conditional",
    "lrt_augmented",
    "chi_square_sf",
    "monte_carlo_pvalue",
]


@dataclass(frozen=True)
class CategoryCounts:
    counts: Mapping[object, int]

    @property
    def n(self) -> int:
        return sum(self.counts.values())

    def __post_init__(self):
        for c, k in self.counts.items():
            if k != int(k) or k < 0:
                raise ValueError(f"count for {c!r} must be a nonnegative integer")


@dataclass
class SplitModel:
    """Dirichlet posterior over the split plus a count model for the total."""

    dirichlet: CategoricalDirichlet
    total_model: CountModel
    growth_prior: float = 1.0 / 30.0

    def observe(self, counts: CategoryCounts) -> None:
        """Fold one period into both the split and total posteriors."""
        self.dirichlet = self.dirichlet.ensure(counts.counts.keys(), self.growth_prior)
        for category, k in counts.counts.items():
            if k:
                self.dirichlet = self.dirichlet.update(category, k)
        self.total_model = self.total_model.update(counts.n)

    def new_categories(self, counts: CategoryCounts) -> list:
        return [c for c in counts.counts if c not in self.dirichlet.categories]


def lrt_conditional(model: SplitModel, counts: CategoryCounts) -> float:
    """Likelihood-ratio statistic of the observed split against E[p].

    2 * sum over nonzero categories of c_j * log(c_j / (n * E[p_j])), with
    E[p_j] the current Dirichlet posterior mean.  Undefined for silent
    periods (n = 0).
    """
    n = counts.n
    if n == 0:
        raise ValueError("split statistic undefined for a silent period (n = 0)")
    dirichlet = model.dirichlet.ensure(counts.counts.keys(), model.growth_prior)
    expected = dirichlet.expected_probs()
    stat = 0.0
    for category, c in counts.counts.items():
        if c > 0:
            stat += c * math.log(c / (n * expected[category]))
    return 2.0 * stat


def lrt_augmented(model: SplitModel, counts: CategoryCounts) -> float:
    """Conditional statistic plus -2 log of the total's predictive mass.

    Charges for surprise in the number of communications as well as in how
    they split; always at least the conditional statistic.
    """
    cond = lrt_conditional(model, counts)
    pn = model.total_model.pmf(counts.n)
    return cond - 2.0 * math.log(max(pn, 1e-300))


def chi_square_sf(x: float, df: int) -> float:
    """Upper-tail chi-square probability via the regularized upper
    incomplete gamma function."""
    if x < 0.0:
        raise ValueError(f"statistic must be nonnegative: {x}")
    if df < 1 or df != int(df):
        raise ValueError(f"degrees of freedom must be a positive integer: {df}")
    return float(gammaincc(df / 2.0, x / 2.0))


def _sample_total(model: CountModel, rng: np.random.Generator) -> int:
    """Draw one total from the posterior predictive of the count model."""
    from .models import BetaBernoulli, BetaGeometric, DirichletProcess, Hurdle, MarkovBernoulli, PoissonGamma

    if isinstance(model, PoissonGamma):
        lam = rng.gamma(model.shape, 1.0 / model.rate)
        return int(rng.poisson(lam))
    if isinstance(model, (BetaBernoulli, MarkovBernoulli)):
        return int(rng.random() < model.p_active)
    if isinstance(model, BetaGeometric):
        q = rng.beta(model.alpha, model.beta)
        return int(rng.geometric(q) - 1)
    if isinstance(model, Hurdle):
        if rng.random() >= model.activity.p_active:
            return 0
        return 1 + _sample_total(model.magnitude, rng)
    if isinstance(model, DirichletProcess):
        denom = model.mass + model.total_observed
        if rng.random() < model.total_observed / denom:
            values = [v for v, _ in model.observed]
            mults = np.array([m for _, m in model.observed], dtype=float)
            return int(rng.choice(values, p=mults / mults.sum()))
        return _sample_total(model.base, rng)
    raise TypeError(f"cannot sample from {type(model).__name__}")


def monte_carlo_pvalue(
    model: SplitModel,
    counts: CategoryCounts,
    draws: int = 10_000,
    seed: int = 0,
) -> float:
    """Monte-Carlo p-value for the augmented statistic.

    Simulates totals from the count model's predictive and splits from the
    Dirichlet-multinomial posterior predictive, recomputes the augmented
    statistic for each draw, and returns (1 + #{sim >= observed}) /
    (draws + 1).  Fully determined by the seed.
    """
    if draws < 1000:
        raise ValueError("use at least 1000 draws")
    observed = lrt_augmented(model, counts)
    dirichlet = model.dirichlet.ensure(counts.counts.keys(), model.growth_prior)
    categories = dirichlet.categories
    alpha = np.asarray(dirichlet.alpha, dtype=float)
    expected = alpha / alpha.sum()
    rng = np.random.default_rng(seed)
    hits = 0
    log = math.log
    for _ in range(draws):
        n = _sample_total(model.total_model, rng)
        if n == 0:
            # A silent period carries no split information; only the total's
            # surprise counts.
            stat = -2.0 * log(max(model.total_model.pmf(0), 1e-300))
        else:
            probs = rng.dirichlet(alpha)
            sim = rng.multinomial(n, probs)
            stat = 0.0
            for c, e in zip(sim, expected):
                if c > 0:
                    stat += c * log(c / (n * e))
            stat = 2.0 * stat - 2.0 * log(max(model.total_model.pmf(n), 1e-300))
        if stat >= observed:
            hits += 1
    return (1 + hits) / (draws + 1)
