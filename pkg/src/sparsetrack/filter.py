"""Constant-velocity Kalman sub-filters and the IMM cycle.

State is 6-dimensional [position, velocity] in the global frame; the
measurement is position only. The IMM runs three constant-velocity models
that differ only in process-noise intensity (hover / cruise / evasive).
All functions are pure over value states.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import NumericalError, ValidationError, as_point

_LOG_2PI = float(np.log(2.0 * np.pi))


def _sym(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def ensure_psd(P: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Symmetrize and clamp tiny negative eigenvalues; error beyond -tol."""
    P = _sym(np.asarray(P, dtype=float))
    w = np.linalg.eigvalsh(P)
    lo = float(w.min())
    if lo < -tol:
        raise NumericalError(f"covariance indefinite (min eigenvalue {lo:.3e})")
    if lo < 0.0:
        w2, V = np.linalg.eigh(P)
        P = _sym(V @ np.diag(np.clip(w2, 0.0, None)) @ V.T)
    return P


@dataclass(frozen=True)
class KState:
    """Gaussian state: mean (6,) and covariance (6, 6)."""

    x: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(6)
        P = np.asarray(self.P, dtype=float).reshape(6, 6)
        # summing propagates NaN/inf, so this is a cheap finiteness check
        if not np.isfinite(x.sum() + P.sum()):
            raise ValidationError("non-finite filter state")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", _sym(P))

    @property
    def position(self) -> np.ndarray:
        return self.x[:3]

    @property
    def velocity(self) -> np.ndarray:
        return self.x[3:]


@dataclass(frozen=True)
class IMMState:
    """Bank of model-conditioned states plus probabilities and the fusion."""

    models: tuple[KState, ...]
    mu: np.ndarray
    fused: KState

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or len(mu) != len(self.models):
            raise ValidationError("mu length must match model count")
        if np.any(mu < -1e-12) or abs(mu.sum() - 1.0) > 1e-9:
            raise ValidationError("model probabilities must be a distribution")
        object.__setattr__(self, "mu", np.clip(mu, 0.0, None))
        object.__setattr__(self, "models", tuple(self.models))


@dataclass(frozen=True)
class FilterConfig:
    q_levels: tuple[float, ...] = (0.5, 2.0, 8.0)   # process noise intensities (m/s^2)
    Pi: np.ndarray = field(default_factory=lambda: np.array(
        [[0.95, 0.025, 0.025],
         [0.025, 0.95, 0.025],
         [0.025, 0.025, 0.95]]))
    R: np.ndarray = field(default_factory=lambda: 0.01 * np.eye(3))
    P0: np.ndarray = field(default_factory=lambda: np.diag(
        [0.25, 0.25, 0.25, 9.0, 9.0, 9.0]))
    mu0: np.ndarray | None = None

    def __post_init__(self):
        Pi = np.asarray(self.Pi, dtype=float)
        m = len(self.q_levels)
        if Pi.shape != (m, m):
            raise ValidationError("Pi must be square, one row per model")
        if np.any(Pi < 0) or np.any(np.abs(Pi.sum(axis=1) - 1.0) > 1e-12):
            raise ValidationError("Pi rows must sum to 1 with entries >= 0")
        R = _sym(np.asarray(self.R, dtype=float))
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ValidationError("R must be symmetric positive definite")
        mu0 = self.mu0
        if mu0 is None:
            mu0 = np.full(m, 1.0 / m)
        mu0 = np.asarray(mu0, dtype=float)
        if len(mu0) != m or abs(mu0.sum() - 1.0) > 1e-9 or np.any(mu0 < 0):
            raise ValidationError("mu0 must be a distribution over models")
        object.__setattr__(self, "Pi", Pi)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "P0", _sym(np.asarray(self.P0, dtype=float)))
        object.__setattr__(self, "mu0", mu0)

    @property
    def n_models(self) -> int:
        return len(self.q_levels)


def transition_matrix(dt: float) -> np.ndarray:
    F = np.eye(6)
    F[:3, 3:] = dt * np.eye(3)
    return F


def process_noise(dt: float, q: float) -> np.ndarray:
    G = np.zeros((6, 3))
    G[:3, :] = 0.5 * dt * dt * np.eye(3)
    G[3:, :] = dt * np.eye(3)
    return (q * q) * (G @ G.T)


def kf_predict(s: KState, dt: float, q: float) -> KState:
    """Constant-velocity time update."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    F = transition_matrix(dt)
    x = F @ s.x
    P = _sym(F @ s.P @ F.T + process_noise(dt, q))
    return KState(x=x, P=P)


def gaussian_loglik(y: np.ndarray, S: np.ndarray) -> float:
    """Log density of N(y; 0, S); raises on a singular S."""
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        raise NumericalError("singular innovation covariance "
                             f"(slogdet sign={sign}, logdet={logdet:.3e})")
    try:
        q = float(y @ np.linalg.solve(S, y))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular innovation covariance ({exc})") from exc
    return -0.5 * (len(y) * _LOG_2PI + logdet + q)


def kf_update(s: KState, z, R: np.ndarray
              ) -> tuple[KState, np.ndarray, np.ndarray, float]:
    """Position-measurement update; returns (state, innovation, S, likelihood).

    Uses the Joseph-form covariance update and symmetrizes the result.
    """
    z = as_point(z)
    R = np.asarray(R, dtype=float)
    y = z - s.x[:3]
    S = _sym(s.P[:3, :3] + R)
    loglik = gaussian_loglik(y, S)
    K = np.linalg.solve(S, s.P[:3, :]).T          # (6, 3)
    x = s.x + K @ y
    IKH = np.eye(6)
    IKH[:, :3] -= K
    # Joseph form is PSD by construction; symmetrization is enough here.
    P = _sym(IKH @ s.P @ IKH.T + K @ R @ K.T)
    return KState(x=x, P=P), y, S, float(np.exp(loglik))


def imm_mix(s: IMMState, cfg: FilterConfig
            ) -> tuple[list[KState], np.ndarray]:
    """Interaction step: mixed initial conditions and predicted mu.

    Returns (mixed states, mu_pred). A model whose predicted probability is
    zero gets uniform mixing weights.
    """
    m = cfg.n_models
    mu_pred = cfg.Pi.T @ s.mu
    mixed: list[KState] = []
    for j in range(m):
        if mu_pred[j] > 0.0:
            w = cfg.Pi[:, j] * s.mu / mu_pred[j]
        else:
            w = np.full(m, 1.0 / m)
        x0 = sum(w[i] * s.models[i].x for i in range(m))
        P0 = np.zeros((6, 6))
        for i in range(m):
            d = s.models[i].x - x0
            P0 += w[i] * (s.models[i].P + np.outer(d, d))
        mixed.append(KState(x=x0, P=_sym(P0)))
    return mixed, mu_pred


def imm_fuse(models: list[KState] | tuple[KState, ...],
             mu: np.ndarray) -> KState:
    """Moment-matched fusion of model-conditioned estimates."""
    mu = np.asarray(mu, dtype=float)
    x = sum(mu[j] * m.x for j, m in enumerate(models))
    P = np.zeros((6, 6))
    for j, m in enumerate(models):
        e = m.x - x
        P += mu[j] * (m.P + np.outer(e, e))
    return KState(x=x, P=_sym(P))


def imm_init(position, cfg: FilterConfig) -> IMMState:
    """Fresh track state at a measured position with zero velocity."""
    x = np.zeros(6)
    x[:3] = as_point(position)
    models = tuple(KState(x=x, P=cfg.P0) for _ in range(cfg.n_models))
    return IMMState(models=models, mu=cfg.mu0.copy(),
                    fused=imm_fuse(models, cfg.mu0))


def imm_predict(s: IMMState, dt: float, cfg: FilterConfig) -> IMMState:
    """Mix and time-update every model; mu becomes the predicted mu."""
    mixed, mu_pred = imm_mix(s, cfg)
    pred = tuple(kf_predict(mixed[j], dt, cfg.q_levels[j])
                 for j in range(cfg.n_models))
    mu = mu_pred / mu_pred.sum()
    return IMMState(models=pred, mu=mu, fused=imm_fuse(pred, mu))


def imm_correct(pred: IMMState, z, cfg: FilterConfig) -> IMMState:
    """Per-model measurement update plus likelihood-weighted mu update."""
    z = as_point(z)
    updated: list[KState] = []
    logliks = np.empty(cfg.n_models)
    for j in range(cfg.n_models):
        sj = pred.models[j]
        y = z - sj.x[:3]
        S = _sym(sj.P[:3, :3] + cfg.R)
        logliks[j] = gaussian_loglik(y, S)
        upd, _, _, _ = kf_update(sj, z, cfg.R)
        updated.append(upd)
    with np.errstate(divide="ignore"):
        log_mu = np.log(pred.mu) + logliks
    if np.all(np.isneginf(log_mu)):
        mu = pred.mu.copy()  # all likelihoods underflew: keep predicted mu
    else:
        mu = np.exp(log_mu - log_mu.max())
        mu = mu / mu.sum()
    return IMMState(models=tuple(updated), mu=mu,
                    fused=imm_fuse(updated, mu))


def imm_step(s: IMMState, dt: float, z, cfg: FilterConfig) -> IMMState:
    """Full IMM cycle; z=None is a missed-detection (predict-only) step."""
    pred = imm_predict(s, dt, cfg)
    if z is None:
        return pred
    return imm_correct(pred, z, cfg)
