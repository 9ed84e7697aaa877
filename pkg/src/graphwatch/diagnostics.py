"""Compensator, martingale-residual and predictable-variation tracking.

For each monitored counting process we accumulate, period by period, the
cumulative count N(t), the compensator Lambda(t) built from one-step-ahead
predictive means, the residual M(t) = N(t) - Lambda(t) and the cumulative
conditional variance <M>(t) of the increments.  A calibrated model keeps the
residual inside +/- band_multiplier * sqrt(<M>(t)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .models import CountModel, Hurdle

__all__ = [
    "DiagnosticPath",
    "compensator_increment",
    "variation_increment",
    "accumulate",
]

# Clamp tolerance for variation increments driven fractionally below zero by
# floating-point cancellation; the quantity is nonnegative analytically.
_CLAMP_EPS = 1e-12

DIAGNOSTIC_COLUMNS = (
    "period",
    "dN",
    "N",
    "Lambda",
    "M",
    "Var",
    "band_lo",
    "band_hi",
    "out_of_band",
)


def compensator_increment(state: CountModel) -> float:
    """One-step compensator increment from a state strictly before the period.

    For a hurdle state this is P(active) * (E[magnitude] + 1); for any other
    model it is the predictive mean.
    """
    if isinstance(state, Hurdle):
        p = state.activity.p_active
        return p * (state.magnitude.moments().mean + 1.0)
    return state.moments().mean


def variation_increment(state: CountModel) -> float:
    """One-step increment of the predictable variation of N - Lambda.

    This is the conditional variance of the period's count given history.
    For a hurdle with activity mean p and magnitude mean m / variance v it
    equals p*v + p*(1-p)*(m+1)^2; for plain models it is the predictive
    variance.
    """
    if isinstance(state, Hurdle):
        p = state.activity.p_active
        mag = state.magnitude.moments()
        dvar = p * mag.variance + p * (1.0 - p) * (mag.mean + 1.0) ** 2
    else:
        dvar = state.moments().variance
    return dvar


@dataclass
class DiagnosticPath:
    """Cumulative layer stack for one counting process."""

    band_multiplier: float = 2.0
    periods: list[int] = field(default_factory=list)
    dn: list[int] = field(default_factory=list)
    n: list[float] = field(default_factory=list)
    lam: list[float] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)
    variation: list[float] = field(default_factory=list)
    out_of_band: list[bool] = field(default_factory=list)
    clamped: int = 0

    def __len__(self) -> int:
        return len(self.periods)

    def band(self, i: int) -> float:
        return self.band_multiplier * self.variation[i] ** 0.5

    def rows(self) -> Iterator[tuple]:
        """Yield CSV-ready rows matching DIAGNOSTIC_COLUMNS."""
        for i, t in enumerate(self.periods):
            b = self.band(i)
            yield (
                t,
                self.dn[i],
                self.n[i],
                self.lam[i],
                self.residual[i],
                self.variation[i],
                -b,
                b,
                int(self.out_of_band[i]),
            )


def accumulate(
    path: DiagnosticPath, period: int, dn: int, dlambda: float, dvar: float
) -> DiagnosticPath:
    """Extend a path by one period of increments.

    Period indices must be strictly increasing.  Variation increments inside
    -1e-12 of zero are clamped to zero and counted; more negative values are
    a caller bug and raise.
    """
    if path.periods and period <= path.periods[-1]:
        raise ValueError(
            f"period {period} does not extend the path (last {path.periods[-1]})"
        )
    if dvar < 0.0:
        if dvar < -_CLAMP_EPS:
            raise ValueError(f"variation increment {dvar} is negative beyond roundoff")
        dvar = 0.0
        path.clamped += 1
    n = (path.n[-1] if path.n else 0.0) + dn
    lam = (path.lam[-1] if path.lam else 0.0) + dlambda
    var = (path.variation[-1] if path.variation else 0.0) + dvar
    m = n - lam
    path.periods.append(period)
    path.dn.append(dn)
    path.n.append(n)
    path.lam.append(lam)
    path.residual.append(m)
    path.variation.append(var)
    path.out_of_band.append(abs(m) > path.band_multiplier * var**0.5)
    return path
