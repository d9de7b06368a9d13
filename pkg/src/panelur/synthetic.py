"""Simulated panels and input files for examples, tests and the CLI."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .data import EA, MonthIndex, Panel, RawSeries, month_range

__all__ = [
    "DGPS",
    "random_walk_panel",
    "ar1_panel",
    "factor_panel",
    "mixed_panel",
    "correlated_pvalues",
    "make_panel",
    "pipeline_series",
    "COUNTRIES",
]

COUNTRIES = ("AT", "BE", "DE", "ES", "FI", "FR", "GR", "IE", "IT", "NL", "PT")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _panel(Y, units=None, start=MonthIndex(2000, 1)) -> Panel:
    if units is None:
        units = [f"U{i:02d}" for i in range(1, Y.shape[0] + 1)]
    return Panel.from_array(Y, units=units, start=start)


def _ar_paths(rng, phi, N, T, burn, shocks=None):
    e = rng.standard_normal((N, T + burn)) if shocks is None else shocks
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (N,))
    y = np.zeros_like(e)
    for t in range(1, e.shape[1]):
        y[:, t] = phi * y[:, t - 1] + e[:, t]
    return y[:, burn:]


def random_walk_panel(n: int = 10, t: int = 148, seed=0, sigma: float = 1.0) -> Panel:
    """Independent driftless random walks started at zero."""
    rng = _rng(seed)
    return _panel(np.cumsum(sigma * rng.standard_normal((n, t)), axis=1))


def ar1_panel(n: int = 10, t: int = 148, seed=0, phi=0.8, burn: int = 50) -> Panel:
    """Independent stationary AR(1) units; ``phi`` may differ by unit."""
    rng = _rng(seed)
    return _panel(_ar_paths(rng, phi, n, t, burn))


def factor_panel(
    n: int = 10, t: int = 148, seed=0, phi=1.0, loading_range=(0.5, 1.5), factor_sd: float = 1.0, burn: int = 50
) -> Panel:
    """Units driven by one common shock: ``u_it = lambda_i f_t + e_it`` fed through AR(``phi``).

    With ``phi = 1`` every unit is a random walk whose innovations share the
    factor, which is the cross-dependent null.
    """
    rng = _rng(seed)
    f = factor_sd * rng.standard_normal(t + burn)
    lam = rng.uniform(*loading_range, size=n)
    u = lam[:, None] * f + rng.standard_normal((n, t + burn))
    if np.all(np.asarray(phi) == 1.0):
        return _panel(np.cumsum(u[:, burn:], axis=1))
    return _panel(_ar_paths(rng, phi, n, t, burn, shocks=u))


def mixed_panel(n: int = 10, t: int = 148, seed=0, n_stationary: int = 1, phi: float = 0.5, burn: int = 50) -> Panel:
    """``n_stationary`` AR(``phi``) units followed by random walks."""
    if not 0 <= n_stationary <= n:
        raise ValueError("n_stationary must lie in [0, n]")
    rng = _rng(seed)
    phis = np.array([phi] * n_stationary + [1.0] * (n - n_stationary))
    e = rng.standard_normal((n, t + burn))
    y = np.zeros_like(e)
    y[phis == 1.0] = np.cumsum(e[phis == 1.0], axis=1)
    y[phis != 1.0] = _ar_paths(rng, phis[phis != 1.0], int(np.sum(phis != 1.0)), t + burn, 0, e[phis != 1.0])
    return _panel(y[:, burn:])


def correlated_pvalues(n: int = 10, theta: float = 0.5, reps: int = 1, seed=0) -> np.ndarray:
    """Null p-values ``Phi(z)`` whose probits are equicorrelated with correlation ``theta``."""
    from scipy.special import ndtr

    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    rng = _rng(seed)
    z = np.sqrt(theta) * rng.standard_normal((reps, 1)) + np.sqrt(1 - theta) * rng.standard_normal((reps, n))
    return ndtr(z)


DGPS = {
    "random_walk": random_walk_panel,
    "ar1": ar1_panel,
    "factor": factor_panel,
    "mixed": mixed_panel,
}


def make_panel(dgp: str, n: int = 10, t: int = 148, seed=0, **kwargs) -> Panel:
    try:
        return DGPS[dgp](n=n, t=t, seed=seed, **kwargs)
    except KeyError:
        raise ValueError(f"unknown DGP {dgp!r}; choose from {sorted(DGPS)}") from None


def pipeline_series(
    n: int = 10,
    t: int = 148,
    seed=0,
    dgp: str = "random_walk",
    start: MonthIndex = MonthIndex(1999, 1),
    countries: Sequence[str] | None = None,
) -> list[RawSeries]:
    """CPI and policy-rate series for the benchmark and ``n`` countries.

    The series cover ``t + 12`` months so that year-on-year inflation and the
    ex-post lead leave ``t`` usable months. Rates follow the benchmark rate
    plus a country gap simulated from ``dgp``; CPI grows with a country drift
    and small noise.
    """
    rng = _rng(seed)
    countries = list(countries or COUNTRIES[:n])
    if len(countries) != n:
        raise ValueError("need one country code per unit")
    length = t + 12
    months = month_range(start, start.shift(length - 1))
    gaps = make_panel(dgp, n, length, rng).values
    base = 3.0 + np.cumsum(0.1 * rng.standard_normal(length))
    out = []

    def cpi_path(drift):
        steps = drift / 12.0 + 0.002 * rng.standard_normal(length)
        return 100.0 * np.exp(np.cumsum(steps) - steps[0])

    out.append(RawSeries(EA, "cpi", months, cpi_path(0.02)))
    out.append(RawSeries(EA, "rate", months, base))
    for i, c in enumerate(countries):
        out.append(RawSeries(c, "cpi", months, cpi_path(0.02 + 0.01 * rng.standard_normal())))
        out.append(RawSeries(c, "rate", months, base + 0.5 * gaps[i]))
    return out
