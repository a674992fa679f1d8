"""Bivariate Gaussian outputs: constraint map, log-likelihood, sampling.

The prediction head emits 5 unconstrained reals per agent per future step.
``constrain_gaussian`` maps them to a valid distribution (exp keeps the
standard deviations positive, tanh keeps the correlation inside (-1, 1)),
and inside the NLL the standard deviations are floored at SIGMA_FLOOR and
1 - rho^2 at OM_FLOOR. Without the floors the loss is unbounded below on
memorizable targets (sigma -> 0 or |rho| -> 1 sends the log-density to
+infinity), so fixed-step SGD first oscillates and then overflows; with
them the loss has a finite floor-corner minimum and plain SGD at the
default learning rate descends monotonically into it. Sampling uses the
unfloored parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .rng import Rng

SIGMA_FLOOR = 0.5
OM_FLOOR = 0.75


@dataclass(frozen=True)
class GaussianParams:
    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    rho: float


def constrain_gaussian(raw) -> GaussianParams:
    """Map 5 unconstrained reals to valid bivariate Gaussian parameters."""
    r = np.asarray(raw, dtype=np.float64)
    if r.shape != (5,):
        raise ValueError(f"expected 5 raw values, got shape {r.shape}")
    return GaussianParams(
        mu_x=float(r[0]),
        mu_y=float(r[1]),
        sigma_x=float(np.exp(r[2])),
        sigma_y=float(np.exp(r[3])),
        rho=float(np.tanh(r[4])),
    )


def bivariate_nll(g: GaussianParams, target) -> float:
    """Negative log density of ``target`` under ``g``."""
    x, y = target
    sx = max(g.sigma_x, SIGMA_FLOOR)
    sy = max(g.sigma_y, SIGMA_FLOOR)
    dx = (x - g.mu_x) / sx
    dy = (y - g.mu_y) / sy
    om = max(1.0 - g.rho * g.rho, OM_FLOOR)
    z = dx * dx - 2.0 * g.rho * dx * dy + dy * dy
    return math.log(2.0 * math.pi * sx * sy) + 0.5 * math.log(om) + z / (2.0 * om)


def nll_from_raw(raw: ad.Tensor, targets: np.ndarray) -> ad.Tensor:
    """Differentiable NLL of displacement targets under raw head outputs.

    raw: Tensor [..., 5]; targets: ndarray [..., 2]. Returns the elementwise
    NLL tensor with shape raw.shape[:-1]; callers reduce it. Agrees with
    ``bivariate_nll`` after ``constrain_gaussian`` on each 5-vector.
    """
    targets = np.asarray(targets, dtype=np.float64)
    mu = raw[..., 0:2]
    log_sig = ad.maximum(raw[..., 2:4], math.log(SIGMA_FLOOR))
    sig = ad.exp(log_sig)
    rho = ad.tanh(raw[..., 4])
    d = ad.div(ad.add(ad.mul(mu, -1.0), targets), sig)
    dx = d[..., 0]
    dy = d[..., 1]
    om = ad.maximum(ad.add(ad.mul(ad.mul(rho, rho), -1.0), 1.0), OM_FLOOR)
    z = dx * dx - 2.0 * rho * dx * dy + dy * dy
    log_norm = ad.add(ad.tsum(log_sig, axis=-1), math.log(2.0 * math.pi))
    return log_norm + 0.5 * ad.log(om) + z / (2.0 * om)


def sample_bivariate(g: GaussianParams, rng: Rng) -> tuple[float, float]:
    """Draw one point from ``g`` via Box-Muller."""
    z1, z2 = rng.standard_normal_pair()
    x = g.mu_x + g.sigma_x * z1
    y = g.mu_y + g.sigma_y * (g.rho * z1 + math.sqrt(max(1.0 - g.rho * g.rho, 0.0)) * z2)
    return float(x), float(y)


def sample_bivariate_array(params: np.ndarray, rng: Rng) -> np.ndarray:
    """Vectorized sampling; params [..., 5] already constrained
    (mu_x, mu_y, sigma_x, sigma_y, rho). Returns [..., 2]."""
    p = np.asarray(params, dtype=np.float64)
    z1, z2 = rng.standard_normal_pair(p.shape[:-1])
    x = p[..., 0] + p[..., 2] * z1
    y = p[..., 1] + p[..., 3] * (p[..., 4] * z1 + np.sqrt(np.maximum(1.0 - p[..., 4] ** 2, 0.0)) * z2)
    return np.stack([x, y], axis=-1)
