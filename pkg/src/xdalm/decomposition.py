"""Whitening and symmetric FastICA for asset return panels.

Components are returned as *portfolio* return series: row ``i`` of the
unmixing matrix holds the asset notionals that replicate component ``i``,
so ``components = X @ unmixing.T`` keeps the component drift.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from ._validation import ReturnPanel, ReturnSeries, as_labels, as_matrix, as_values, check_k
from .allocation import ComponentStats
from .exceptions import AlignmentError, DegenerateInputError, IdentifiabilityWarning, InvalidInputError
from .moments import SignedLogValue, central_moment, cross_moment

DEFAULT_RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class WhiteningTransform:
    mean: np.ndarray
    matrix: np.ndarray  # r x N, maps centred returns to white coordinates
    inverse: np.ndarray  # N x r
    singular_values: np.ndarray
    rank: int


@dataclass
class MixingModel:
    """Result of :func:`fast_ica`.

    ``unmixing`` is r x N, ``mixing`` is N x r and ``components`` is T x r.
    ``mixing @ unmixing`` is the orthogonal projector onto the retained
    r-dimensional subspace of asset space.
    """

    unmixing: np.ndarray
    mixing: np.ndarray
    components: np.ndarray
    whitening: WhiteningTransform
    rank: int
    n_iter: int
    converged: bool
    assets: tuple = ()
    timestamps: np.ndarray = field(default=None, repr=False)

    @property
    def n_components(self) -> int:
        return self.unmixing.shape[0]

    def component(self, i: int) -> ReturnSeries:
        return ReturnSeries(self.components[:, i], self.timestamps)

    def transform(self, X) -> np.ndarray:
        return as_matrix(X) @ self.unmixing.T

    def reconstruct(self, components) -> np.ndarray:
        return np.asarray(components) @ self.mixing.T


def whiten(panel, rank_tolerance: float = DEFAULT_RANK_TOLERANCE):
    """Centre and whiten a T x N panel on its numerical-rank subspace.

    Returns ``(Z, transform, rank)`` where ``Z`` is T x r with identity
    sample covariance (1/T normalisation).
    """
    X = as_matrix(panel, "panel")
    n_periods = X.shape[0]
    if n_periods < 2:
        raise InvalidInputError("whitening needs at least 2 periods")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = linalg.svd(Xc, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise DegenerateInputError("panel has zero variance in every direction")
    rank = int(np.count_nonzero(s >= rank_tolerance * s[0]))
    scale = np.sqrt(n_periods) / s[:rank]
    K = scale[:, None] * vt[:rank]
    K_inv = vt[:rank].T * (s[:rank] / np.sqrt(n_periods))
    transform = WhiteningTransform(mean, K, K_inv, s, rank)
    return Xc @ K.T, transform, rank


def _sym_decorrelation(W):
    s, u = linalg.eigh(W @ W.T)
    s = np.clip(s, np.finfo(W.dtype).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ W


def fast_ica(
    panel,
    seed: int = 0,
    tol: float = 1e-7,
    max_iter: int = 1000,
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE,
) -> MixingModel:
    """Symmetric fixed-point FastICA with the log-cosh contrast.

    Convergence is declared when ``max_i | |<w_i, w_i_prev>| - 1 | < tol``.
    On failure the last iterate is returned with ``converged=False`` and a
    :class:`~sklearn.exceptions.ConvergenceWarning` is issued.
    """
    if max_iter < 1:
        raise InvalidInputError("max_iter must be at least 1")
    X = as_matrix(panel, "panel")
    Z, white, rank = whiten(X, rank_tolerance)
    n_periods = Z.shape[0]

    rng = np.random.default_rng(seed)
    W = _sym_decorrelation(rng.standard_normal((rank, rank)))
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        G = np.tanh(Z @ W.T)
        g_prime = 1.0 - G**2
        W_new = _sym_decorrelation(G.T @ Z / n_periods - g_prime.mean(axis=0)[:, None] * W)
        change = np.max(np.abs(np.abs(np.einsum("ij,ij->i", W_new, W)) - 1.0))
        W = W_new
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"FastICA did not converge in {max_iter} iterations (last change {change:.2e})",
            ConvergenceWarning,
            stacklevel=2,
        )

    unmixing = W @ white.matrix
    mixing = white.inverse @ W.T

    # order by variance explained, largest mixing entry positive
    explained = np.sum(mixing**2, axis=0)
    order = np.argsort(-explained, kind="stable")
    unmixing, mixing = unmixing[order], mixing[:, order]
    pivots = np.argmax(np.abs(mixing), axis=0)
    signs = np.sign(mixing[pivots, np.arange(rank)])
    signs[signs == 0] = 1.0
    unmixing *= signs[:, None]
    mixing *= signs[None, :]

    components = X @ unmixing.T
    _check_identifiability(components)

    assets = panel.assets if isinstance(panel, ReturnPanel) else as_labels(None, X.shape[1], "asset")
    timestamps = panel.timestamps if isinstance(panel, ReturnPanel) else None
    return MixingModel(unmixing, mixing, components, white, rank, n_iter, converged, assets, timestamps)


def _check_identifiability(components):
    n_periods = components.shape[0]
    kurt = stats.kurtosis(components, axis=0, fisher=True, bias=True)
    gaussian_like = int(np.sum(np.abs(kurt) < 3.0 * np.sqrt(24.0 / n_periods)))
    if gaussian_like >= 2:
        warnings.warn(
            f"{gaussian_like} components have excess kurtosis indistinguishable from 0; "
            "the decomposition is not identifiable among them",
            IdentifiabilityWarning,
            stacklevel=3,
        )


def component_stats(
    model: MixingModel,
    liability,
    funding_rates=None,
    k: int = 1,
    r_L: float | None = None,
) -> list[ComponentStats]:
    """Per-component statistics against a liability series.

    ``funding_rates`` are per-asset, per-period rates; a component's rate is
    the notional-weighted sum through its unmixing row. ``r_L`` defaults to
    the liability sample mean, which makes the liability increment driftless.
    """
    k = check_k(k)
    L = as_values(liability, "liability")
    if L.size != model.components.shape[0]:
        raise AlignmentError(
            f"liability has {L.size} periods, components have {model.components.shape[0]}"
        )
    if isinstance(liability, ReturnSeries) and model.timestamps is not None:
        if np.any(liability.timestamps != model.timestamps):
            raise AlignmentError("liability timestamps differ from the panel timestamps")
    n_assets = model.unmixing.shape[1]
    rates = np.zeros(n_assets) if funding_rates is None else np.asarray(funding_rates, dtype=float)
    if rates.shape != (n_assets,):
        raise InvalidInputError(f"expected {n_assets} funding rates, got shape {rates.shape}")
    if r_L is None:
        r_L = float(L.mean())

    dl = L - L.mean()
    sigma_L = float(np.sqrt(np.mean(dl**2)))
    out = []
    for i in range(model.n_components):
        C = model.components[:, i]
        dc = C - C.mean()
        sigma = float(np.sqrt(np.mean(dc**2)))
        if sigma == 0.0:
            raise DegenerateInputError(f"component {i} has zero variance")
        rho = 0.0 if sigma_L == 0.0 else float(np.clip(np.mean(dc * dl) / (sigma * sigma_L), -1.0, 1.0))
        residual = L - (rho * sigma_L / sigma) * C
        if k == 1:
            residual_moment = SignedLogValue(1, 0.0)
        else:
            residual_moment = central_moment(residual, 2 * k - 2)
        out.append(
            ComponentStats(
                mu=float(C.mean()),
                r=float(model.unmixing[i] @ rates),
                sigma=sigma,
                rho=rho,
                own_moment_2k=central_moment(C, 2 * k),
                cross_moment_2k1=cross_moment(C, L, k, r_L),
                residual_moment_2k2=residual_moment,
                k=k,
                sigma_L=sigma_L,
                residual=residual,
            )
        )
    return out


class FastICADecomposer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`fast_ica`.

    Parameters
    ----------
    random_state : int, default=0
        Seed of the initial unmixing matrix.
    tol : float, default=1e-7
        Fixed-point convergence threshold.
    max_iter : int, default=1000
    rank_tolerance : float, default=1e-10
        Singular values below ``rank_tolerance * s_max`` are dropped.

    Attributes
    ----------
    model_ : MixingModel
    components_ : ndarray of shape (n_components, n_assets)
        Unmixing matrix (asset notionals per unit of component).
    mixing_ : ndarray of shape (n_assets, n_components)
    n_components_, n_iter_, converged_
    """

    def __init__(self, random_state=0, tol=1e-7, max_iter=1000, rank_tolerance=DEFAULT_RANK_TOLERANCE):
        self.random_state = random_state
        self.tol = tol
        self.max_iter = max_iter
        self.rank_tolerance = rank_tolerance

    def fit(self, X, y=None):
        self.model_ = fast_ica(X, self.random_state, self.tol, self.max_iter, self.rank_tolerance)
        self.components_ = self.model_.unmixing
        self.mixing_ = self.model_.mixing
        self.mean_ = self.model_.whitening.mean
        self.n_components_ = self.model_.n_components
        self.n_iter_ = self.model_.n_iter
        self.converged_ = self.model_.converged
        self.n_features_in_ = self.components_.shape[1]
        return self

    def transform(self, X):
        """Component returns of ``X`` (no centring, drifts are kept)."""
        check_is_fitted(self, "model_")
        return self.model_.transform(X)

    def inverse_transform(self, X):
        check_is_fitted(self, "model_")
        return self.model_.reconstruct(X)
