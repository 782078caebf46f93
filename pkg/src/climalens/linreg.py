"""Least-squares kernel: QR-based OLS, sandwich covariances, within transform."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateClusters, RankDeficient

RANK_TOL = 1e-10


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    col_names: tuple[str, ...]
    intercept_included: bool = False

    @classmethod
    def from_columns(cls, columns: dict[str, Sequence[float]], intercept: bool = True,
                     intercept_name: str = "const") -> "DesignMatrix":
        names = list(columns)
        cols = [np.asarray(columns[c], dtype=float) for c in names]
        if intercept:
            n = len(cols[0]) if cols else 0
            cols.insert(0, np.ones(n))
            names.insert(0, intercept_name)
        return cls(np.column_stack(cols), tuple(names), intercept)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class OlsFit:
    coef: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    rss: float
    sigma2: float
    r2: float
    n: int
    k: int
    df_resid: int
    xtx_inv: np.ndarray
    cov_classical: np.ndarray
    cov_hc1: np.ndarray
    cov_cluster: np.ndarray | None = None
    n_clusters: int | None = None
    col_names: tuple[str, ...] = ()
    intercept: bool = False
    absorbed: int = 0
    extras: dict = field(default_factory=dict)

    def cov(self, flavor: str) -> np.ndarray:
        if flavor == "classical":
            return self.cov_classical
        if flavor == "hc1":
            return self.cov_hc1
        if flavor == "cluster":
            if self.cov_cluster is None:
                raise DegenerateClusters("fit was run without cluster ids")
            return self.cov_cluster
        raise ValueError(f"unknown covariance flavor {flavor!r}")

    def se(self, flavor: str = "hc1") -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov(flavor)), 0.0, None))


def _as_design(X) -> tuple[np.ndarray, tuple[str, ...], bool | None]:
    if isinstance(X, DesignMatrix):
        return np.asarray(X.values, dtype=float), X.col_names, X.intercept_included
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr, (), None


def _has_constant_column(X: np.ndarray) -> bool:
    if X.shape[0] == 0:
        return False
    return bool(np.any(np.all(X == X[0], axis=0) & (X[0] != 0)))


def ols_fit(X, y, *, cluster_ids=None, intercept: bool | None = None,
            col_names: Sequence[str] | None = None, absorbed: int = 0) -> OlsFit:
    """Fit ``y = X b + e`` by Householder QR.

    ``absorbed`` counts parameters removed before the fit (for example firm
    effects swept out by demeaning); it enters every degrees-of-freedom
    correction alongside ``k``. ``intercept`` defaults to detecting a nonzero
    constant column and only affects how R^2 is centred.
    """
    Xa, names, icept = _as_design(X)
    y = np.asarray(y, dtype=float).ravel()
    n, k = Xa.shape
    if y.shape[0] != n:
        raise ValueError(f"X has {n} rows but y has {y.shape[0]}")
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    if not (np.all(np.isfinite(Xa)) and np.all(np.isfinite(y))):
        raise ValueError("design matrix and response must be finite")
    if col_names is not None:
        names = tuple(col_names)
    if intercept is None:
        intercept = icept if icept is not None else _has_constant_column(Xa)

    Q, R = np.linalg.qr(Xa, mode="reduced")
    diag = np.abs(np.diag(R))
    if k and (diag.max() == 0 or np.any(diag < RANK_TOL * diag.max())):
        bad = int(np.argmax(diag < RANK_TOL * diag.max())) if diag.max() > 0 else 0
        raise RankDeficient(bad, names[bad] if names else None)
    coef = solve_triangular(R, Q.T @ y)
    r_inv = solve_triangular(R, np.eye(k))
    xtx_inv = r_inv @ r_inv.T
    fitted = Xa @ coef
    resid = y - fitted
    rss = float(resid @ resid)

    df = n - k - absorbed
    sigma2 = rss / df if df > 0 else float("nan")
    if intercept:
        tss = float(np.sum((y - y.mean()) ** 2))
    else:
        tss = float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")

    fit = OlsFit(coef=coef, residuals=resid, fitted=fitted, rss=rss, sigma2=sigma2, r2=r2,
                 n=n, k=k, df_resid=df, xtx_inv=xtx_inv,
                 cov_classical=np.empty((k, k)), cov_hc1=np.empty((k, k)),
                 col_names=names, intercept=bool(intercept), absorbed=absorbed)
    fit.cov_classical = robust_cov(fit, Xa, "classical")
    fit.cov_hc1 = robust_cov(fit, Xa, "hc1")
    if cluster_ids is not None:
        fit.cov_cluster = robust_cov(fit, Xa, "cluster", cluster_ids)
        fit.n_clusters = len(np.unique(np.asarray(cluster_ids)))
    return fit


def _sandwich(bread: np.ndarray, meat: np.ndarray) -> np.ndarray:
    v = bread @ meat @ bread
    return (v + v.T) / 2


def robust_cov(fit: OlsFit, X, flavor: str, cluster_ids=None) -> np.ndarray:
    """Classical, HC1 or cluster-robust covariance of ``fit.coef``.

    cluster: G/(G-1) * (n-1)/(n-k) * (X'X)^-1 (sum_g X_g'e_g e_g'X_g) (X'X)^-1,
    with ``k`` including any absorbed parameters.
    """
    Xa, _, _ = _as_design(X)
    e = fit.residuals
    n, df = fit.n, fit.df_resid
    if flavor == "classical":
        return fit.sigma2 * fit.xtx_inv
    if flavor == "hc1":
        meat = (Xa * (e ** 2)[:, None]).T @ Xa
        scale = n / df if df > 0 else float("nan")
        return scale * _sandwich(fit.xtx_inv, meat)
    if flavor != "cluster":
        raise ValueError(f"unknown covariance flavor {flavor!r}")
    if cluster_ids is None:
        raise DegenerateClusters("cluster covariance needs cluster ids")
    ids = np.asarray(cluster_ids)
    if ids.shape[0] != n:
        raise DegenerateClusters(f"{ids.shape[0]} cluster ids for {n} rows")
    _, inv = np.unique(ids, return_inverse=True)
    G = int(inv.max()) + 1 if n else 0
    if G < 2:
        raise DegenerateClusters(f"need at least 2 clusters, got {G}")
    scores = np.zeros((G, Xa.shape[1]))
    np.add.at(scores, inv, Xa * e[:, None])
    scale = G / (G - 1) * (n - 1) / df if df > 0 else float("nan")
    return scale * _sandwich(fit.xtx_inv, scores.T @ scores)


def within_transform(values, group_ids) -> np.ndarray:
    """Subtract each group's mean from its members (works column-wise on 2-D input)."""
    v = np.asarray(values, dtype=float)
    _, inv = np.unique(np.asarray(group_ids), return_inverse=True)
    inv = inv.ravel()
    if v.shape[0] != inv.shape[0]:
        raise ValueError(f"{v.shape[0]} values for {inv.shape[0]} group ids")
    counts = np.bincount(inv).astype(float)
    if v.ndim == 1:
        means = np.bincount(inv, weights=v) / counts
        return v - means[inv]
    out = np.empty_like(v)
    for j in range(v.shape[1]):
        means = np.bincount(inv, weights=v[:, j]) / counts
        out[:, j] = v[:, j] - means[inv]
    return out
