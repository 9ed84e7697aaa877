"""Conjugate Bayesian models for nonnegative-integer increments.

Every model is an immutable record of sufficient statistics.  ``update`` and
``downdate`` return new states, so a state can be shared freely between
workers while another thread scores against it.  Observation tallies are
kept as integers next to the float prior, which makes conjugate bookkeeping
exact: downdate inverts update bit-for-bit, folding observations in any
order (or absorbing a block of zeros at once) lands on the same state, and
equality/hashing see only the effective pseudocounts.

All models expose the same small surface:

* ``update(obs)`` / ``downdate(obs)`` -- exact conjugate bookkeeping,
* ``pmf(n)`` -- posterior predictive mass at a count,
* ``moments()`` -- predictive mean/variance (closed form where it exists,
  otherwise numeric from the truncated pmf),
* ``absorb_zeros(k)`` -- fold in ``k`` silent periods in one step.

Two-sided predictive p-values use the min-likelihood ordering: the p-value
of ``n`` is the total predictive mass of all outcomes no more likely than
``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional, Union

from scipy.special import betaln, gammaln

__all__ = [
    "InconsistentDowndateError",
    "PredictiveSummary",
    "PValue",
    "BetaBernoulli",
    "MarkovBernoulli",
    "PoissonGamma",
    "BetaGeometric",
    "Hurdle",
    "DirichletProcess",
    "CategoricalDirichlet",
    "markov_equilibrium",
    "predictive_pvalue",
    "build_model",
    "DEFAULT_ACTIVITY_PRIOR",
    "DEFAULT_PAIR_MAGNITUDE_PRIOR",
    "DEFAULT_NETWORK_MAGNITUDE_PRIOR",
    "DEFAULT_GEOMETRIC_PRIOR",
]

# Support truncation: cumulative mass 1 - eps.  The tighter value is used for
# p-value sums, the looser one for numeric moments; both leave truncation
# error far below reporting precision.
PVALUE_EPS = 1e-12
MOMENT_EPS = 1e-8
_MAX_SUPPORT = 200_000
_TINY = 1e-300

DEFAULT_ACTIVITY_PRIOR = (1.0, 1.0)
DEFAULT_PAIR_MAGNITUDE_PRIOR = (0.1, 0.1)
DEFAULT_NETWORK_MAGNITUDE_PRIOR = (0.1, 0.01)
DEFAULT_GEOMETRIC_PRIOR = (3.0, 1.0)


class InconsistentDowndateError(ValueError):
    """Removing an observation the state cannot have absorbed."""


@dataclass(frozen=True)
class PredictiveSummary:
    """One-step-ahead predictive mean, variance and pmf."""

    mean: float
    variance: float
    pmf: Callable[[int], float]


@dataclass(frozen=True)
class PValue:
    p: float
    direction: str  # "high" | "low"


def markov_equilibrium(phi: float, psi: float) -> float:
    """Stationary probability of the active state of a two-state chain.

    ``phi`` is P(active | previously active), ``psi`` is
    P(active | previously inactive); the stationary active probability is
    ``psi / (1 + psi - phi)``.
    """
    if not (0.0 <= phi <= 1.0 and 0.0 <= psi <= 1.0):
        raise ValueError(f"transition probabilities must lie in [0, 1]: {phi}, {psi}")
    if phi == 1.0 and psi == 0.0:
        raise ValueError("equilibrium undefined for phi=1, psi=0 (frozen chain)")
    return psi / (1.0 + psi - phi)


def _check_count(n) -> int:
    if n != int(n) or n < 0:
        raise ValueError(f"observation must be a nonnegative integer, got {n!r}")
    return int(n)


def _check_binary(obs) -> int:
    if obs not in (0, 1):
        raise ValueError(f"observation must be 0 or 1, got {obs!r}")
    return int(obs)


@dataclass(frozen=True, eq=False)
class BetaBernoulli:
    """Beta-Bernoulli model for 0/1 activity increments.

    ``alpha0``/``beta0`` are the prior pseudocounts; ``ones``/``zeros`` tally
    the observations (negative after downdating a state built directly from
    aggregate pseudocounts, which is fine as long as the effective values
    stay positive).
    """

    alpha0: float
    beta0: float
    ones: int = 0
    zeros: int = 0
    label = "bernoulli"

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise ValueError(f"beta pseudocounts must be positive: {self.alpha}, {self.beta}")

    @property
    def alpha(self) -> float:
        return self.alpha0 + self.ones

    @property
    def beta(self) -> float:
        return self.beta0 + self.zeros

    def __eq__(self, other):
        if not isinstance(other, BetaBernoulli):
            return NotImplemented
        return (self.alpha, self.beta) == (other.alpha, other.beta)

    def __hash__(self):
        return hash(("bb", self.alpha, self.beta))

    def __repr__(self):
        return f"BetaBernoulli({self.alpha}, {self.beta})"

    @property
    def p_active(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def update(self, obs) -> "BetaBernoulli":
        obs = _check_binary(obs)
        if obs:
            return replace(self, ones=self.ones + 1)
        return replace(self, zeros=self.zeros + 1)

    def downdate(self, obs) -> "BetaBernoulli":
        obs = _check_binary(obs)
        try:
            if obs:
                return replace(self, ones=self.ones - 1)
            return replace(self, zeros=self.zeros - 1)
        except ValueError:
            raise InconsistentDowndateError(
                f"downdating obs={obs} would drive {self!r} to the floor"
            ) from None

    def absorb_zeros(self, k: int) -> "BetaBernoulli":
        return replace(self, zeros=self.zeros + int(k)) if k else self

    def pmf(self, n: int) -> float:
        n = _check_count(n)
        if n == 0:
            return 1.0 - self.p_active
        if n == 1:
            return self.p_active
        return 0.0

    def _table(self, eps: float) -> tuple[list[float], float]:
        p = self.p_active
        return [1.0 - p, p], 0.0

    def moments(self) -> PredictiveSummary:
        p = self.p_active
        return PredictiveSummary(p, p * (1.0 - p), self.pmf)


@dataclass(frozen=True, eq=False)
class MarkovBernoulli:
    """Two-state Markov chain over 0/1 activity with beta-posterior transitions.

    ``from_active`` holds the posterior of P(active | previously active),
    ``from_inactive`` that of P(active | previously inactive).  The first
    observation only conditions the chain; no transition is tallied for it.
    """

    from_active: BetaBernoulli
    from_inactive: BetaBernoulli
    last_state: Optional[int] = None
    label = "markov-bernoulli"

    def __post_init__(self):
        if self.last_state not in (None, 0, 1):
            raise ValueError(f"last_state must be None, 0 or 1: {self.last_state!r}")

    def __eq__(self, other):
        if not isinstance(other, MarkovBernoulli):
            return NotImplemented
        return (self.from_active, self.from_inactive, self.last_state) == (
            other.from_active,
            other.from_inactive,
            other.last_state,
        )

    def __hash__(self):
        return hash(("mb", self.from_active, self.from_inactive, self.last_state))

    @property
    def p_active(self) -> float:
        phi = self.from_active.p_active
        psi = self.from_inactive.p_active
        if self.last_state == 1:
            return phi
        if self.last_state == 0:
            return psi
        # Unconditioned chain: fall back to the stationary probability of the
        # posterior-mean transition matrix.
        return markov_equilibrium(phi, psi)

    def tally(self, prev: int, cur: int) -> "MarkovBernoulli":
        """Record a single prev -> cur transition without moving last_state."""
        prev = _check_binary(prev)
        cur = _check_binary(cur)
        if prev:
            return replace(self, from_active=self.from_active.update(cur))
        return replace(self, from_inactive=self.from_inactive.update(cur))

    def untally(self, prev: int, cur: int) -> "MarkovBernoulli":
        prev = _check_binary(prev)
        cur = _check_binary(cur)
        if prev:
            return replace(self, from_active=self.from_active.downdate(cur))
        return replace(self, from_inactive=self.from_inactive.downdate(cur))

    def update(self, obs) -> "MarkovBernoulli":
        obs = _check_binary(obs)
        if self.last_state is None:
            return replace(self, last_state=obs)
        return replace(self.tally(self.last_state, obs), last_state=obs)

    def downdate(self, obs) -> "MarkovBernoulli":
        """Remove one transition, supplied as a (previous, current) pair.

        last_state is deliberately not rewound; retrospective evaluation
        reconstructs the conditioning context explicitly.
        """
        if not (isinstance(obs, tuple) and len(obs) == 2):
            raise ValueError("Markov downdate requires the (previous, current) transition")
        return self.untally(obs[0], obs[1])

    def conditioned_on(self, prev: Optional[int]) -> "MarkovBernoulli":
        return replace(self, last_state=prev)

    def absorb_zeros(self, k: int) -> "MarkovBernoulli":
        if k == 0:
            return self
        state = self
        if state.last_state is None:
            state = replace(state, last_state=0)
            k -= 1
        elif state.last_state == 1:
            state = replace(state.tally(1, 0), last_state=0)
            k -= 1
        if k:
            state = replace(state, from_inactive=state.from_inactive.absorb_zeros(k))
        return state

    def pmf(self, n: int) -> float:
        n = _check_count(n)
        p = self.p_active
        if n == 0:
            return 1.0 - p
        if n == 1:
            return p
        return 0.0

    def _table(self, eps: float) -> tuple[list[float], float]:
        p = self.p_active
        return [1.0 - p, p], 0.0

    def moments(self) -> PredictiveSummary:
        p = self.p_active
        return PredictiveSummary(p, p * (1.0 - p), self.pmf)


@dataclass(frozen=True, eq=False)
class PoissonGamma:
    """Poisson counts with a gamma prior; negative binomial predictive."""

    shape0: float
    rate0: float
    events: int = 0  # summed observed counts
    periods: int = 0  # number of observations folded in
    label = "poisson-gamma"

    def __post_init__(self):
        if not (self.shape > 0.0 and self.rate > 0.0):
            raise ValueError(f"gamma parameters must be positive: {self.shape}, {self.rate}")

    @property
    def shape(self) -> float:
        return self.shape0 + self.events

    @property
    def rate(self) -> float:
        return self.rate0 + self.periods

    def __eq__(self, other):
        if not isinstance(other, PoissonGamma):
            return NotImplemented
        return (self.shape, self.rate) == (other.shape, other.rate)

    def __hash__(self):
        return hash(("pg", self.shape, self.rate))

    def __repr__(self):
        return f"PoissonGamma({self.shape}, {self.rate})"

    def update(self, n) -> "PoissonGamma":
        n = _check_count(n)
        return replace(self, events=self.events + n, periods=self.periods + 1)

    def downdate(self, n) -> "PoissonGamma":
        n = _check_count(n)
        try:
            return replace(self, events=self.events - n, periods=self.periods - 1)
        except ValueError:
            raise InconsistentDowndateError(
                f"downdating n={n} would drive {self!r} to the floor"
            ) from None

    def absorb_zeros(self, k: int) -> "PoissonGamma":
        return replace(self, periods=self.periods + int(k)) if k else self

    def pmf(self, n: int) -> float:
        n = _check_count(n)
        r, b = self.shape, self.rate
        # NB(r, q) with q = b / (b + 1)
        logp = (
            gammaln(n + r)
            - gammaln(r)
            - gammaln(n + 1.0)
            + r * (math.log(b) - math.log1p(b))
            - n * math.log1p(b)
        )
        return math.exp(logp)

    def _table(self, eps: float) -> tuple[list[float], float]:
        r, b = self.shape, self.rate
        one_minus_q = 1.0 / (b + 1.0)
        p0 = math.exp(r * (math.log(b) - math.log1p(b)))
        probs = [p0]
        cum = p0
        n = 0
        target = 1.0 - eps
        while cum < target and n < _MAX_SUPPORT:
            nxt = probs[-1] * ((n + r) / (n + 1.0)) * one_minus_q
            probs.append(nxt)
            cum += nxt
            n += 1
        return probs, max(0.0, 1.0 - cum)

    def moments(self) -> PredictiveSummary:
        mean = self.shape / self.rate
        var = self.shape * (self.rate + 1.0) / (self.rate * self.rate)
        return PredictiveSummary(mean, var, self.pmf)


@dataclass(frozen=True, eq=False)
class BetaGeometric:
    """Geometric counts on {0, 1, ...} with a beta prior on the success rate.

    Used as the shifted magnitude model of a hurdle: each observation n
    contributes one success and n failures.  The predictive mean exists only
    for alpha > 1 and the variance only for alpha > 2; ``exact_moments``
    reports the missing ones as None and ``moments`` falls back to numeric
    moments of the truncated pmf.
    """

    alpha0: float
    beta0: float
    successes: int = 0
    failures: int = 0
    label = "beta-geometric"

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.beta > 0.0):
            raise ValueError(f"beta parameters must be positive: {self.alpha}, {self.beta}")

    @property
    def alpha(self) -> float:
        return self.alpha0 + self.successes

    @property
    def beta(self) -> float:
        return self.beta0 + self.failures

    def __eq__(self, other):
        if not isinstance(other, BetaGeometric):
            return NotImplemented
        return (self.alpha, self.beta) == (other.alpha, other.beta)

    def __hash__(self):
        return hash(("bg", self.alpha, self.beta))

    def __repr__(self):
        return f"BetaGeometric({self.alpha}, {self.beta})"

    def update(self, n) -> "BetaGeometric":
        n = _check_count(n)
        return replace(self, successes=self.successes + 1, failures=self.failures + n)

    def downdate(self, n) -> "BetaGeometric":
        n = _check_count(n)
        try:
            return replace(self, successes=self.successes - 1, failures=self.failures - n)
        except ValueError:
            raise InconsistentDowndateError(
                f"downdating n={n} would drive {self!r} to the floor"
            ) from None

    def absorb_zeros(self, k: int) -> "BetaGeometric":
        return replace(self, successes=self.successes + int(k)) if k else self

    def pmf(self, n: int) -> float:
        n = _check_count(n)
        a, b = self.alpha, self.beta
        return math.exp(betaln(a + 1.0, b + n) - betaln(a, b))

    def _table(self, eps: float) -> tuple[list[float], float]:
        a, b = self.alpha, self.beta
        p0 = a / (a + b)
        probs = [p0]
        cum = p0
        n = 0
        target = 1.0 - eps
        while cum < target and n < _MAX_SUPPORT:
            nxt = probs[-1] * ((b + n) / (a + b + n + 1.0))
            probs.append(nxt)
            cum += nxt
            n += 1
        return probs, max(0.0, 1.0 - cum)

    def exact_moments(self) -> tuple[Optional[float], Optional[float]]:
        a, b = self.alpha, self.beta
        mean = b / (a - 1.0) if a > 1.0 else None
        var = None
        if a > 2.0:
            inv_q = (a + b - 1.0) / (a - 1.0)
            inv_q2 = (a + b - 1.0) * (a + b - 2.0) / ((a - 1.0) * (a - 2.0))
            second = 2.0 * inv_q2 - 3.0 * inv_q + 1.0
            var = second - mean * mean
        return mean, var

    def moments(self) -> PredictiveSummary:
        mean, var = self.exact_moments()
        if mean is None or var is None:
            num_mean, num_var = _numeric_moments(self)
            mean = num_mean if mean is None else mean
            var = num_var if var is None else var
        return PredictiveSummary(mean, var, self.pmf)


MagnitudeModel = Union[PoissonGamma, BetaGeometric]
ActivityModel = Union[BetaBernoulli, MarkovBernoulli]


@dataclass(frozen=True)
class Hurdle:
    """Two-part count model: an activity process gating a shifted magnitude.

    pmf(0) = 1 - P(active); pmf(n >= 1) = P(active) * magnitude.pmf(n - 1).
    """

    activity: ActivityModel
    magnitude: MagnitudeModel

    @property
    def label(self) -> str:
        return f"hurdle({self.activity.label},{self.magnitude.label})"

    def update(self, n) -> "Hurdle":
        n = _check_count(n)
        if n == 0:
            return Hurdle(self.activity.update(0), self.magnitude)
        return Hurdle(self.activity.update(1), self.magnitude.update(n - 1))

    def downdate(self, n) -> "Hurdle":
        n = _check_count(n)
        if isinstance(self.activity, MarkovBernoulli):
            raise ValueError(
                "hurdle downdate with Markov activity needs explicit transitions; "
                "use the component models directly"
            )
        if n == 0:
            return Hurdle(self.activity.downdate(0), self.magnitude)
        return Hurdle(self.activity.downdate(1), self.magnitude.downdate(n - 1))

    def absorb_zeros(self, k: int) -> "Hurdle":
        if k == 0:
            return self
        return Hurdle(self.activity.absorb_zeros(k), self.magnitude)

    def pmf(self, n: int) -> float:
        n = _check_count(n)
        p = self.activity.p_active
        if n == 0:
            return 1.0 - p
        return p * self.magnitude.pmf(n - 1)

    def _table(self, eps: float) -> tuple[list[float], float]:
        p = self.activity.p_active
        mag_probs, mag_tail = _pmf_table(self.magnitude, eps)
        probs = [1.0 - p]
        probs.extend(p * q for q in mag_probs)
        return probs, p * mag_tail

    def moments(self) -> PredictiveSummary:
        p = self.activity.p_active
        mag = self.magnitude.moments()
        mean = p * (mag.mean + 1.0)
        # var(dN) for dN = dA * (dB + 1) with dA, dB independent given history.
        var = p * mag.variance + p * (1.0 - p) * (mag.mean + 1.0) ** 2
        return PredictiveSummary(mean, var, self.pmf)


def _observed_to_dict(observed: tuple) -> dict[int, int]:
    return {value: mult for value, mult in observed}


@dataclass(frozen=True)
class DirichletProcess:
    """Dirichlet process over counts with a fixed hurdle base measure.

    The predictive mixes the base measure with the empirical histogram:
    pmf(n) = (mass * base(n) + multiplicity(n)) / (mass + total_observed).
    ``observed`` is kept as a sorted tuple of (value, multiplicity) pairs so
    states stay hashable and cheap to copy.
    """

    mass: float
    base: Hurdle
    observed: tuple = ()
    total_observed: int = 0
    label = "dirichlet-process"

    def __post_init__(self):
        if not self.mass > 0.0:
            raise ValueError(f"base-measure mass must be positive: {self.mass}")
        if self.total_observed != sum(m for _, m in self.observed):
            raise ValueError("total_observed does not match the histogram")
        if any(m <= 0 for _, m in self.observed):
            raise ValueError("histogram multiplicities must be positive")

    def multiplicity(self, n: int) -> int:
        for value, mult in self.observed:
            if value == n:
                return mult
        return 0

    def update(self, n) -> "DirichletProcess":
        n = _check_count(n)
        hist = _observed_to_dict(self.observed)
        hist[n] = hist.get(n, 0) + 1
        return DirichletProcess(
            self.mass, self.base, tuple(sorted(hist.items())), self.total_observed + 1
        )

    def downdate(self, n) -> "DirichletProcess":
        n = _check_count(n)
        hist = _observed_to_dict(self.observed)
        if hist.get(n, 0) <= 0:
            raise InconsistentDowndateError(f"no observation of {n} to remove")
        hist[n] -= 1
        if hist[n] == 0:
            del hist[n]
        return DirichletProcess(
            self.mass, self.base, tuple(sorted(hist.items())), self.total_observed - 1
        )

    def absorb_zeros(self, k: int) -> "DirichletProcess":
        if k == 0:
            return self
        hist = _observed_to_dict(self.observed)
        hist[0] = hist.get(0, 0) + k
        return DirichletProcess(
            self.mass, self.base, tuple(sorted(hist.items())), self.total_observed + k
        )

    def pmf(self, n: int) -> float:
        n = _check_count(n)
        return (self.mass * self.base.pmf(n) + self.multiplicity(n)) / (
            self.mass + self.total_observed
        )

    def _table(self, eps: float) -> tuple[list[float], float]:
        denom = self.mass + self.total_observed
        base_probs, base_tail = _pmf_table(self.base, eps)
        top = max(len(base_probs), (max((v for v, _ in self.observed), default=0) + 1))
        probs = [0.0] * top
        for i, q in enumerate(base_probs):
            probs[i] = self.mass * q / denom
        for value, mult in self.observed:
            probs[value] += mult / denom
        return probs, self.mass * base_tail / denom

    def moments(self) -> PredictiveSummary:
        mean, var = _numeric_moments(self)
        return PredictiveSummary(mean, var, self.pmf)


@dataclass(frozen=True, eq=False)
class CategoricalDirichlet:
    """Dirichlet posterior over a fixed set of category probabilities."""

    categories: tuple
    alpha0: tuple
    counts: tuple = ()

    def __post_init__(self):
        if not self.counts:
            object.__setattr__(self, "counts", tuple(0 for _ in self.categories))
        if not (len(self.categories) == len(self.alpha0) == len(self.counts)):
            raise ValueError("categories, concentrations and counts must align")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("duplicate categories")
        if any(a <= 0.0 for a in self.alpha):
            raise ValueError("concentrations must be positive")

    @property
    def alpha(self) -> tuple:
        return tuple(a + c for a, c in zip(self.alpha0, self.counts))

    def __eq__(self, other):
        if not isinstance(other, CategoricalDirichlet):
            return NotImplemented
        return (self.categories, self.alpha) == (other.categories, other.alpha)

    def __hash__(self):
        return hash(("cd", self.categories, self.alpha))

    @classmethod
    def flat(cls, categories, alpha0: float) -> "CategoricalDirichlet":
        cats = tuple(categories)
        return cls(cats, tuple(alpha0 for _ in cats))

    def index(self, category) -> int:
        try:
            return self.categories.index(category)
        except ValueError:
            raise KeyError(f"unknown category {category!r}") from None

    def ensure(self, categories, alpha0: float) -> "CategoricalDirichlet":
        """Grow the universe with prior mass alpha0 for unseen categories."""
        new = [c for c in categories if c not in self.categories]
        if not new:
            return self
        return CategoricalDirichlet(
            self.categories + tuple(new),
            self.alpha0 + tuple(alpha0 for _ in new),
            self.counts + tuple(0 for _ in new),
        )

    def update(self, category, count: int = 1) -> "CategoricalDirichlet":
        i = self.index(category)
        count = _check_count(count)
        counts = list(self.counts)
        counts[i] += count
        return CategoricalDirichlet(self.categories, self.alpha0, tuple(counts))

    def downdate(self, category, count: int = 1) -> "CategoricalDirichlet":
        i = self.index(category)
        count = _check_count(count)
        counts = list(self.counts)
        counts[i] -= count
        try:
            return CategoricalDirichlet(self.categories, self.alpha0, tuple(counts))
        except ValueError:
            raise InconsistentDowndateError(
                f"downdating {count} from category {category!r} hits the floor"
            ) from None

    def expected_probs(self) -> dict:
        alpha = self.alpha
        total = sum(alpha)
        return {c: a / total for c, a in zip(self.categories, alpha)}


CountModel = Union[
    BetaBernoulli, MarkovBernoulli, PoissonGamma, BetaGeometric, Hurdle, DirichletProcess
]


@lru_cache(maxsize=65536)
def _pmf_table(state: CountModel, eps: float) -> tuple[tuple[float, ...], float]:
    probs, tail = state._table(eps)
    return tuple(probs), tail


def _numeric_moments(state: CountModel, eps: float = MOMENT_EPS) -> tuple[float, float]:
    """Mean/variance of the truncated predictive pmf (mass >= 1 - eps)."""
    probs, _tail = _pmf_table(state, eps)
    mean = 0.0
    second = 0.0
    for n, q in enumerate(probs):
        mean += n * q
        second += n * n * q
    return mean, max(0.0, second - mean * mean)


@lru_cache(maxsize=1 << 20)
def _pvalue_cached(state: CountModel, n: int) -> tuple[float, str]:
    probs, tail = _pmf_table(state, PVALUE_EPS)
    pn = probs[n] if n < len(probs) else state.pmf(n)
    thr = pn * (1.0 + 1e-12)
    p = 0.0
    for q in probs:
        if q <= thr:
            p += q
    if tail > 0.0 and probs[-1] <= thr:
        # Tail pmfs beyond the table are monotone decreasing for every model
        # here, so the whole remainder is at least as extreme as n.
        p += tail
    elif n >= len(probs):
        p += pn
    p = min(p, 1.0)
    p = max(p, _TINY)
    direction = "high" if n >= state.moments().mean else "low"
    return p, direction


def predictive_pvalue(state: CountModel, n) -> PValue:
    """Two-sided min-likelihood predictive p-value of observing ``n``.

    Sums predictive mass over all outcomes whose pmf does not exceed pmf(n),
    truncating the support at cumulative mass 1 - 1e-12 and crediting the
    remainder to the extreme side.  Direction is "high" when n is at or above
    the predictive mean.
    """
    n = _check_count(n)
    p, direction = _pvalue_cached(state, n)
    return PValue(p, direction)


def clear_caches() -> None:
    _pmf_table.cache_clear()
    _pvalue_cached.cache_clear()


def build_model(
    name: str,
    *,
    activity_prior: tuple[float, float] = DEFAULT_ACTIVITY_PRIOR,
    magnitude_prior: tuple[float, float] = DEFAULT_PAIR_MAGNITUDE_PRIOR,
    geometric_prior: tuple[float, float] = DEFAULT_GEOMETRIC_PRIOR,
    dp_mass: float = 1.0,
) -> CountModel:
    """Construct a fresh model from a configuration name.

    Known names: bernoulli, markov-bernoulli, poisson-gamma, hurdle-pg,
    hurdle-markov-pg, hurdle-geom, dp.
    """
    a0, b0 = activity_prior

    def bern():
        return BetaBernoulli(a0, b0)

    def markov():
        return MarkovBernoulli(BetaBernoulli(a0, b0), BetaBernoulli(a0, b0))

    if name == "bernoulli":
        return bern()
    if name == "markov-bernoulli":
        return markov()
    if name == "poisson-gamma":
        return PoissonGamma(*magnitude_prior)
    if name == "hurdle-pg":
        return Hurdle(bern(), PoissonGamma(*magnitude_prior))
    if name == "hurdle-markov-pg":
        return Hurdle(markov(), PoissonGamma(*magnitude_prior))
    if name == "hurdle-geom":
        return Hurdle(bern(), BetaGeometric(*geometric_prior))
    if name == "dp":
        base = Hurdle(bern(), PoissonGamma(*magnitude_prior))
        return DirichletProcess(dp_mass, base)
    raise ValueError(f"unknown model name {name!r}")
