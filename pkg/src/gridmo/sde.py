"""Ito-process disturbance models and moment propagation.

The disturbance vector follows d xi = mu(xi) dt + sigma(xi) dW.  For each
energy unit i an auxiliary process

    d eta_i/dt = -alpha_i eta_i + beta_i (xi - E xi)

is driven by the *centered* disturbance, so E eta = 0 and the closed-loop
energy deviation is exactly a linear map of eta.  First and second moments
of the stacked (centered xi, eta_1, ..., eta_ne) system follow a Lyapunov
ODE integrated with fixed-step RK4.

Families:
  - affine_ou:      mu = -xi/tau,          sigma_eff = sigma/sqrt(tau)
  - beta:           mu = -(xi-0.5)/tau,    sigma_eff = diag(sqrt(xi(1-xi))) sigma/sqrt(tau)
  - general_affine: mu = A xi + b,         sigma_eff = sigma  (as stored)

The beta family keeps second moments closed through the exact identity
E[xi(1-xi)] = m - m^2 - var(xi); cross terms use the Cauchy-Schwarz
factorisation sqrt(E s_i^2 E s_j^2), exact whenever sigma sigma' is
diagonal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

AFFINE_OU = "affine_ou"
BETA = "beta"
GENERAL_AFFINE = "general_affine"

_FAMILIES = (AFFINE_OU, BETA, GENERAL_AFFINE)
_SUBSTEPS = 10  # RK4 / Euler-Maruyama substeps per control step
_BETA_EPS = 1e-6


class SdeError(ValueError):
    pass


@dataclass(frozen=True)
class ItoModel:
    family: str
    sigma: np.ndarray                 # (n_xi, n_w) spatial diffusion
    tau: float = 1.0
    a_drift: np.ndarray | None = None  # general_affine only
    b_drift: np.ndarray | None = None
    mean0: np.ndarray | None = None
    cov0: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise SdeError(f"unknown family {self.family!r}")
        if self.tau <= 0:
            raise SdeError("tau must be positive")
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "sigma", sigma)
        n = sigma.shape[0]
        if self.family == GENERAL_AFFINE:
            if self.a_drift is None:
                raise SdeError("general_affine requires a_drift")
            a = np.asarray(self.a_drift, dtype=float)
            if a.shape != (n, n):
                raise SdeError("a_drift shape mismatch")
            object.__setattr__(self, "a_drift", a)
            b = (np.zeros(n) if self.b_drift is None
                 else np.asarray(self.b_drift, dtype=float))
            object.__setattr__(self, "b_drift", b)
        m0 = (np.zeros(n) if self.mean0 is None
              else np.asarray(self.mean0, dtype=float))
        c0 = (np.zeros((n, n)) if self.cov0 is None
              else np.asarray(self.cov0, dtype=float))
        if m0.shape != (n,) or c0.shape != (n, n):
            raise SdeError("initial moment shape mismatch")
        if np.linalg.eigvalsh((c0 + c0.T) / 2).min() < -1e-12:
            raise SdeError("initial covariance not PSD")
        object.__setattr__(self, "mean0", m0)
        object.__setattr__(self, "cov0", c0)

    @property
    def n_xi(self) -> int:
        return self.sigma.shape[0]

    def drift_matrix(self) -> np.ndarray:
        if self.family == GENERAL_AFFINE:
            return self.a_drift
        return -np.eye(self.n_xi) / self.tau

    def drift_offset(self) -> np.ndarray:
        if self.family == GENERAL_AFFINE:
            return self.b_drift
        if self.family == BETA:
            return np.full(self.n_xi, 0.5 / self.tau)
        return np.zeros(self.n_xi)

    def sigma_eff(self) -> np.ndarray:
        """Constant part of the diffusion (state scaling excluded)."""
        if self.family == GENERAL_AFFINE:
            return self.sigma
        return self.sigma / np.sqrt(self.tau)

    def with_correlation_scale(self, factor: float) -> "ItoModel":
        """Scale the decorrelation time by `factor` at fixed stationary
        variance (drift / factor, diffusion / sqrt(factor))."""
        if factor <= 0:
            raise SdeError("correlation scale factor must be positive")
        if self.family == GENERAL_AFFINE:
            return ItoModel(family=self.family,
                            sigma=self.sigma / np.sqrt(factor),
                            tau=self.tau * factor,
                            a_drift=self.a_drift / factor,
                            b_drift=self.b_drift / factor,
                            mean0=self.mean0, cov0=self.cov0)
        return ItoModel(family=self.family, sigma=self.sigma,
                        tau=self.tau * factor,
                        mean0=self.mean0, cov0=self.cov0)


@dataclass(frozen=True)
class EUParams:
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        b = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if a.shape != b.shape:
            raise SdeError("alpha/beta shape mismatch")
        if np.any(a < 0):
            raise SdeError("dissipation alpha must be >= 0")
        if np.any(b < 0):
            raise SdeError("charging efficiency beta must be >= 0")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def n_eu(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def from_grid(cls, grid) -> "EUParams":
        return cls(alpha=np.array([e.alpha for e in grid.eus]),
                   beta=np.array([e.beta for e in grid.eus]))

    def hold(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Exact zero-order-hold pair (phi, gamma):
        e+ = phi e + gamma * beta * u."""
        phi = np.exp(-self.alpha * dt)
        gamma = np.where(self.alpha > 0,
                         (1.0 - phi) / np.where(self.alpha > 0,
                                                self.alpha, 1.0),
                         dt)
        return phi, gamma


@dataclass
class MomentTrajectory:
    """Mean of xi and covariance of (centered xi, eta stack) per step."""
    times: np.ndarray          # (N+1,)
    mean: np.ndarray           # (N+1, n_xi)
    cov: np.ndarray            # (N+1, naug, naug)
    n_xi: int
    n_eu: int

    @property
    def horizon(self) -> int:
        return self.times.shape[0] - 1

    @property
    def n_aug(self) -> int:
        return self.n_xi * (1 + self.n_eu)

    def m_xi(self, k: int) -> np.ndarray:
        n = self.n_xi
        return self.cov[k, :n, :n]

    def m_xi_eta(self, k: int) -> np.ndarray:
        n = self.n_xi
        return self.cov[k, :n, n:]

    def m_eta(self, k: int) -> np.ndarray:
        n = self.n_xi
        return self.cov[k, n:, n:]

    def m_eta_block(self, k: int, eu: int) -> np.ndarray:
        n = self.n_xi
        a = n * (1 + eu)
        return self.cov[k, a:a + n, a:a + n]

    def xi_std(self, k: int) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.m_xi(k)), 0.0, None))


@dataclass
class ScenarioEnsemble:
    paths: np.ndarray          # (n_paths, N+1, n_xi)
    dt: float
    seed: int

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def horizon(self) -> int:
        return self.paths.shape[1] - 1


def ou_covariance(tau: float, sigma: np.ndarray, t: float,
                  s: float) -> np.ndarray:
    """E[xi_t xi_s'] of the zero-start OU family (exact)."""
    if tau <= 0:
        raise SdeError("tau must be positive")
    if s < 0 or s > t:
        raise SdeError("need 0 <= s <= t")
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    w = 0.5 * (np.exp(-(t - s) / tau) - np.exp(-(t + s) / tau))
    return w * (sigma @ sigma.T)


def _aug_drift(model: ItoModel, eu: EUParams):
    n, ne = model.n_xi, eu.n_eu
    naug = n * (1 + ne)
    f = np.zeros((naug, naug))
    f[:n, :n] = model.drift_matrix()
    for i in range(ne):
        blk = n * (1 + i)
        f[blk:blk + n, :n] = eu.beta[i] * np.eye(n)
        f[blk:blk + n, blk:blk + n] = -eu.alpha[i] * np.eye(n)
    return f


def _beta_noise_cov(model: ItoModel, mean: np.ndarray,
                    var_diag: np.ndarray) -> np.ndarray:
    ssig = model.sigma @ model.sigma.T / model.tau
    es2 = np.clip(mean - mean ** 2 - var_diag, 0.0, None)
    scale = np.sqrt(np.outer(es2, es2))
    np.fill_diagonal(scale, es2)
    return ssig * scale


def _noise_cov(model: ItoModel, mean: np.ndarray,
               cov_xi_diag: np.ndarray) -> np.ndarray:
    if model.family == BETA:
        return _beta_noise_cov(model, mean, cov_xi_diag)
    se = model.sigma_eff()
    return se @ se.T


def propagate_moments(model: ItoModel, eu: EUParams, horizon: int,
                      dt: float) -> MomentTrajectory:
    """Integrate the mean and Lyapunov ODEs on the control grid.

    M' = F M + M F' + blkdiag(noise, 0), mean' = A mean + b, with the
    auxiliary block driven by the centered disturbance (eta_0 = 0).
    """
    if horizon < 1 or dt <= 0:
        raise SdeError("horizon >= 1 and dt > 0 required")
    n, ne = model.n_xi, eu.n_eu
    naug = n * (1 + ne)
    f = _aug_drift(model, eu)
    a_mean = model.drift_matrix()
    b_mean = model.drift_offset()

    def deriv(mean, cov):
        dmean = a_mean @ mean + b_mean
        noise = np.zeros((naug, naug))
        noise[:n, :n] = _noise_cov(model, mean, np.diag(cov[:n, :n]))
        dcov = f @ cov + cov @ f.T + noise
        return dmean, dcov

    mean = model.mean0.copy()
    cov = np.zeros((naug, naug))
    cov[:n, :n] = model.cov0
    times = np.arange(horizon + 1) * dt
    means = np.empty((horizon + 1, n))
    covs = np.empty((horizon + 1, naug, naug))
    means[0], covs[0] = mean, cov
    h = dt / _SUBSTEPS
    for k in range(horizon):
        for _ in range(_SUBSTEPS):
            k1m, k1c = deriv(mean, cov)
            k2m, k2c = deriv(mean + 0.5 * h * k1m, cov + 0.5 * h * k1c)
            k3m, k3c = deriv(mean + 0.5 * h * k2m, cov + 0.5 * h * k2c)
            k4m, k4c = deriv(mean + h * k3m, cov + h * k3c)
            mean = mean + h / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m)
            cov = cov + h / 6.0 * (k1c + 2 * k2c + 2 * k3c + k4c)
            cov = 0.5 * (cov + cov.T)
        eigmin = float(np.linalg.eigvalsh(cov).min())
        if eigmin < -1e-10:
            warnings.warn(f"moment matrix lost PSD at step {k + 1} "
                          f"(min eig {eigmin:.2e}); projecting")
            w, v = np.linalg.eigh(cov)
            cov = (v * np.clip(w, 0.0, None)) @ v.T
        means[k + 1], covs[k + 1] = mean, cov
    return MomentTrajectory(times=times, mean=means, cov=covs,
                            n_xi=n, n_eu=ne)


def _drift_eval(model: ItoModel, xi: np.ndarray) -> np.ndarray:
    if model.family == BETA:
        return -(xi - 0.5) / model.tau
    if model.family == AFFINE_OU:
        return -xi / model.tau
    return xi @ model.a_drift.T + model.b_drift


def simulate_paths(model: ItoModel, n_paths: int, horizon: int, dt: float,
                   seed: int) -> ScenarioEnsemble:
    """Euler-Maruyama on dt/10 substeps; bit-identical for a given seed."""
    if n_paths < 1:
        raise SdeError("n_paths must be >= 1")
    if horizon < 1 or dt <= 0:
        raise SdeError("horizon >= 1 and dt > 0 required")
    rng = np.random.default_rng(seed)
    n, nw = model.sigma.shape
    h = dt / _SUBSTEPS
    sqh = np.sqrt(h)
    se = model.sigma_eff()
    xi = np.tile(model.mean0, (n_paths, 1))
    if np.any(model.cov0):
        xi = xi + rng.multivariate_normal(
            np.zeros(n), model.cov0, size=n_paths)
    paths = np.empty((n_paths, horizon + 1, n))
    paths[:, 0] = xi
    for k in range(horizon):
        for _ in range(_SUBSTEPS):
            dw = rng.standard_normal((n_paths, nw)) * sqh
            drift = _drift_eval(model, xi)
            if model.family == BETA:
                amp = np.sqrt(np.clip(xi * (1.0 - xi), 0.0, None))
                xi = xi + drift * h + amp * (dw @ se.T)
                xi = np.clip(xi, _BETA_EPS, 1.0 - _BETA_EPS)
            else:
                xi = xi + drift * h + dw @ se.T
        paths[:, k + 1] = xi
    return ScenarioEnsemble(paths=paths, dt=dt, seed=seed)


def empirical_moments(ensemble: ScenarioEnsemble,
                      eu: EUParams) -> MomentTrajectory:
    """Sample-moment oracle: eta is integrated path-wise (RK4 on dt/10
    substeps) from the linearly interpolated centered disturbance."""
    paths = ensemble.paths
    if paths.shape[0] < 1:
        raise SdeError("empty ensemble")
    n_paths, n_steps, n = paths.shape
    horizon = n_steps - 1
    ne = eu.n_eu
    naug = n * (1 + ne)
    mean = paths.mean(axis=0)                     # (N+1, n)
    delta = paths - mean[None, :, :]
    h = ensemble.dt / _SUBSTEPS

    eta = np.zeros((n_paths, ne, n))
    means = mean.copy()
    covs = np.empty((n_steps, naug, naug))

    def record(k):
        stack = [delta[:, k, :]]
        stack.extend(eta[:, i, :] for i in range(ne))
        zf = np.concatenate(stack, axis=1)
        if n_paths > 1:
            covs[k] = (zf.T @ zf) / (n_paths - 1)
        else:
            covs[k] = 0.0

    record(0)
    alpha = eu.alpha[None, :, None]
    beta = eu.beta[None, :, None]
    for k in range(horizon):
        d0 = delta[:, k, :][:, None, :]
        d1 = delta[:, k + 1, :][:, None, :]
        for j in range(_SUBSTEPS):
            t0 = j / _SUBSTEPS
            tm = (j + 0.5) / _SUBSTEPS
            t1 = (j + 1) / _SUBSTEPS
            f0 = d0 + (d1 - d0) * t0
            fm = d0 + (d1 - d0) * tm
            f1 = d0 + (d1 - d0) * t1
            k1 = -alpha * eta + beta * f0
            k2 = -alpha * (eta + 0.5 * h * k1) + beta * fm
            k3 = -alpha * (eta + 0.5 * h * k2) + beta * fm
            k4 = -alpha * (eta + h * k3) + beta * f1
            eta = eta + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        record(k + 1)
    return MomentTrajectory(times=np.arange(n_steps) * ensemble.dt,
                            mean=means, cov=covs, n_xi=n, n_eu=ne)


def make_beta_model(tau: float, sigma: np.ndarray) -> ItoModel:
    """Beta-stationary disturbance on (0,1): drift -(xi-0.5)/tau,
    diffusion sqrt(xi(1-xi)) sigma / sqrt(tau)."""
    if tau <= 0:
        raise SdeError("tau must be positive")
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    n = sigma.shape[0]
    return ItoModel(family=BETA, sigma=sigma, tau=tau,
                    mean0=np.full(n, 0.5))
