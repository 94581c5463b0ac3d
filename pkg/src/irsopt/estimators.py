"""Estimator-style wrappers around the design algorithms.

Each designer is configured through constructor parameters (``get_params`` /
``set_params`` work as in scikit-learn), learns beamformers and phases in
``fit`` from a :class:`~irsopt.channels.ChannelSet` (or a
:class:`~irsopt.channels.ChannelEstimate` for the robust designer), and
``predict`` returns per-user SINRs of the fitted design on any channel set
of matching size.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import algorithms as alg
from . import robust
from .channels import ChannelEstimate, ChannelSet, ScenarioConfig, check_phases, db_to_linear, dbm_to_watts, sinr


def check_channels(channels, *, allow_estimate: bool = False):
    """Reject anything that is not a well-formed channel set."""
    kinds = (ChannelSet, ChannelEstimate) if allow_estimate else (ChannelSet,)
    if not isinstance(channels, kinds):
        names = " or ".join(k.__name__ for k in kinds)
        raise TypeError(f"expected {names}, got {type(channels).__name__}")
    H = channels.H
    if H.ndim != 3 or H.shape[0] < 1 or H.shape[1] < 1:
        raise ValueError(f"channel tensor has shape {H.shape}; need K x Nt x (M+1) with K, Nt >= 1")
    if not np.all(np.isfinite(H)):
        raise ValueError("channels contain NaN or infinite entries")
    return channels


def check_positive(name: str, value, *, integer: bool = False):
    if integer and (isinstance(value, bool) or int(value) != value):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return int(value) if integer else float(value)


class _Designer(BaseEstimator):
    """Shared plumbing; subclasses implement ``_solve``."""

    _accepts_estimate = False

    def __init__(self, gamma_db: float = 2.0, sigma2_dbm: float = -90.0, eps: float = 1e-5,
                 seed: int = 0, drop: int = 0):
        self.gamma_db = gamma_db
        self.sigma2_dbm = sigma2_dbm
        self.eps = eps
        self.seed = seed
        self.drop = drop

    def _scenario(self, channels) -> ScenarioConfig:
        return ScenarioConfig(nt=channels.nt, k=channels.k, irs_elements=(channels.m,),
                              gamma=float(db_to_linear(self.gamma_db)),
                              sigma2=float(dbm_to_watts(self.sigma2_dbm)), eps=self.eps,
                              seed=int(self.seed), **self._extra_scenario())

    def _extra_scenario(self) -> dict:
        return {}

    def _solve(self, channels, cfg: ScenarioConfig, init):
        raise NotImplementedError

    def fit(self, channels, y=None, init_phases=None):
        """Design for ``channels``; ``init_phases`` optionally fixes the starting phases."""
        check_channels(channels, allow_estimate=self._accepts_estimate)
        cfg = self._scenario(channels)
        init = None
        if init_phases is not None:
            init = alg.PhaseState.from_phi(check_phases(init_phases, channels.m))
        beam, phase, trace = self._solve(channels, cfg, init)
        self.w_ = beam.w
        self.phi_ = phase.phi
        self.power_ = beam.P
        self.trace_ = trace
        self.n_iter_ = trace.iterations
        self.gammas_ = cfg.gammas
        self.sigma2s_ = cfg.sigma2s
        return self

    def predict(self, channels) -> np.ndarray:
        """Per-user SINR of the fitted design on ``channels``."""
        check_is_fitted(self, "w_")
        check_channels(channels, allow_estimate=True)
        if channels.H.shape[1:] != (self.w_.shape[0], self.phi_.size + 1) or channels.k != self.w_.shape[1]:
            raise ValueError(
                f"channels (K={channels.k}, Nt={channels.nt}, M={channels.m}) do not match the "
                f"fitted design (K={self.w_.shape[1]}, Nt={self.w_.shape[0]}, M={self.phi_.size})")
        return sinr(channels, self.w_, self.phi_, self.sigma2s_)

    def score(self, channels, y=None) -> float:
        """Worst-user SINR margin in dB; nonnegative means every target is met."""
        return float(np.min(10 * np.log10(self.predict(channels) / self.gammas_)))


class PenaltyAltMinDesigner(_Designer):
    """Alternating beamforming and penalized phase design."""

    def __init__(self, gamma_db: float = 2.0, sigma2_dbm: float = -90.0, mu: float = 1e3,
                 eps: float = 1e-5, max_outer: int = alg.MAX_OUTER, max_inner: int = alg.MAX_INNER,
                 seed: int = 0, drop: int = 0):
        super().__init__(gamma_db, sigma2_dbm, eps, seed, drop)
        self.mu = mu
        self.max_outer = max_outer
        self.max_inner = max_inner

    def _extra_scenario(self):
        return {"mu": check_positive("mu", self.mu)}

    def _solve(self, channels, cfg, init):
        return alg.penalty_altmin(channels, cfg, drop=self.drop, init=init,
                                  max_outer=check_positive("max_outer", self.max_outer, integer=True),
                                  max_inner=check_positive("max_inner", self.max_inner, integer=True))


class InnerApproximationDesigner(_Designer):
    """Joint design by successive convex inner approximation."""

    def __init__(self, gamma_db: float = 2.0, sigma2_dbm: float = -90.0, eps: float = 1e-5,
                 max_iter: int = alg.MAX_IA, keep_rank_cut: bool = False, seed: int = 0, drop: int = 0):
        super().__init__(gamma_db, sigma2_dbm, eps, seed, drop)
        self.max_iter = max_iter
        self.keep_rank_cut = keep_rank_cut

    def _solve(self, channels, cfg, init):
        return alg.ia_solve(channels, cfg, drop=self.drop, init=init, keep_rank_cut=self.keep_rank_cut,
                            max_iter=check_positive("max_iter", self.max_iter, integer=True))


class SDRAltMinDesigner(_Designer):
    """Alternating design with relaxed phase feasibility and Gaussian randomization."""

    def __init__(self, gamma_db: float = 2.0, sigma2_dbm: float = -90.0, max_iter: int = 20,
                 draws: int = alg.RANDOMIZATION_DRAWS, seed: int = 0, drop: int = 0):
        super().__init__(gamma_db, sigma2_dbm, 1e-5, seed, drop)
        self.max_iter = max_iter
        self.draws = draws

    def _solve(self, channels, cfg, init):
        return alg.sdr_altmin(channels, cfg, drop=self.drop, init=init,
                              max_iter=check_positive("max_iter", self.max_iter, integer=True),
                              draws=check_positive("draws", self.draws, integer=True))


class FixedPhaseDesigner(_Designer):
    """Minimum-power beamforming at the starting phases only."""

    def _solve(self, channels, cfg, init):
        return alg.random_phase_design(channels, cfg, drop=self.drop, init=init)


class RobustPenaltyAltMinDesigner(_Designer):
    """Worst-case design over norm-bounded channel errors; fit on a ChannelEstimate."""

    _accepts_estimate = True

    def __init__(self, gamma_db: float = 2.0, sigma2_dbm: float = -90.0, mu: float | None = None,
                 eps: float = 1e-5, max_outer: int = alg.MAX_OUTER, max_inner: int = alg.MAX_INNER,
                 seed: int = 0, drop: int = 0):
        super().__init__(gamma_db, sigma2_dbm, eps, seed, drop)
        self.mu = mu
        self.max_outer = max_outer
        self.max_inner = max_inner

    def _solve(self, channels, cfg, init):
        if isinstance(channels, ChannelSet):
            channels = ChannelEstimate(channels.E, channels.d, np.zeros(channels.k), np.zeros(channels.k))
        mu = None if self.mu is None else check_positive("mu", self.mu)
        return robust.robust_penalty_altmin(
            channels, cfg, drop=self.drop, init=init, mu=mu,
            max_outer=check_positive("max_outer", self.max_outer, integer=True),
            max_inner=check_positive("max_inner", self.max_inner, integer=True))
