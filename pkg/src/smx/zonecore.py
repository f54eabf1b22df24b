"""Per-zone one-component PCA: loadings, scores, explained variance and
threshold back-projection.

A zone model summarises one spectral zone by its column means, the unit
loading of the dominant covariance eigenvector (divisor n-1) and the
fraction of variance that direction explains. Loading signs follow a
fixed convention so every fit is bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import SpectralDataset, ZoneConfig, resolve_zones, _fmt
from .errors import ConfigError, PipelineError

# Zones at or below this width are solved by direct eigen-decomposition;
# wider ones fall back to power iteration on the implicit covariance.
_EIGH_MAX_DIM = 64
_POWER_TOL = 1e-10
_POWER_MAX_ITERS = 1000


@dataclass
class ZoneModel:
    zone_name: str
    zone_index: int
    indices: np.ndarray
    mean: np.ndarray
    loading: np.ndarray
    variance_explained: float

    @property
    def width(self) -> int:
        return int(self.indices.size)


@dataclass
class ThresholdSpectrum:
    """A score-space threshold mapped back to measurement units."""

    zone_name: str
    tau: float
    profile: np.ndarray


def _fix_sign(w: np.ndarray) -> np.ndarray:
    """Sum of entries >= 0; on a zero sum the first nonzero entry is positive."""
    s = float(w.sum())
    if abs(s) <= 1e-12:
        nz = np.flatnonzero(w)
        if nz.size and w[nz[0]] < 0:
            return -w
        return w
    return -w if s < 0 else w


def _power_iteration(Xc: np.ndarray, divisor: float) -> tuple[np.ndarray, float]:
    d = Xc.shape[1]
    rng = np.random.default_rng(0x5A0E)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    residual = np.inf
    for _ in range(_POWER_MAX_ITERS):
        u = Xc.T @ (Xc @ v) / divisor
        norm = np.linalg.norm(u)
        if norm == 0.0:
            raise PipelineError("power iteration hit a zero vector")
        u /= norm
        residual = min(np.linalg.norm(u - v), np.linalg.norm(u + v))
        v = u
        if residual < _POWER_TOL:
            lam = float(np.linalg.norm(Xc @ v) ** 2 / divisor)
            return v, lam
    raise PipelineError(
        f"power iteration did not converge (residual {residual:.3e} after "
        f"{_POWER_MAX_ITERS} iterations)"
    )


def fit_zone(
    X_zone: np.ndarray, zone_name: str = "", zone_index: int = 0, indices: np.ndarray | None = None
) -> ZoneModel:
    """Fit the one-component PCA summary of a zone sub-matrix.

    Raises on all-identical rows: quantile predicates over a constant
    score column would be vacuous.
    """
    X = np.asarray(X_zone, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise ConfigError("zone matrix must be 2-D with at least 2 samples and 2 variables")
    if not np.all(np.isfinite(X)):
        raise ConfigError("zone matrix contains non-finite entries")
    n, d = X.shape
    mean = X.mean(axis=0)
    Xc = X - mean
    divisor = float(n - 1)
    total_var = float(np.sum(Xc * Xc) / divisor)
    if total_var == 0.0:
        raise PipelineError(f"degenerate zone '{zone_name}': all samples identical")

    if d <= _EIGH_MAX_DIM:
        cov = Xc.T @ Xc / divisor
        evals, evecs = np.linalg.eigh(cov)
        lam = float(evals[-1])
        loading = np.array(evecs[:, -1])
        ve = lam / float(evals.sum())
    else:
        loading, lam = _power_iteration(Xc, divisor)
        ve = lam / total_var

    loading = _fix_sign(loading)
    ve = min(max(ve, 0.0), 1.0)
    if indices is None:
        indices = np.arange(d)
    return ZoneModel(
        zone_name=zone_name,
        zone_index=zone_index,
        indices=np.asarray(indices, dtype=int),
        mean=mean,
        loading=loading,
        variance_explained=ve,
    )


def score_zone(model: ZoneModel, X_zone: np.ndarray) -> np.ndarray:
    """Project centred zone rows onto the loading: t_i = (x_i - mean) @ w."""
    X = np.asarray(X_zone, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.mean.size:
        raise ConfigError(
            f"zone width mismatch: expected {model.mean.size}, got {X.shape[1]}"
        )
    return (X - model.mean) @ model.loading


def threshold_spectrum(model: ZoneModel, tau: float) -> ThresholdSpectrum:
    """Back-project a score threshold into measurement units: mean + tau * loading."""
    profile = model.mean + float(tau) * model.loading
    return ThresholdSpectrum(zone_name=model.zone_name, tau=float(tau), profile=profile)


def fit_zone_models(
    ds: SpectralDataset, cfg: ZoneConfig
) -> tuple[list[ZoneModel], np.ndarray]:
    """Fit every configured zone on ``ds`` and return (models, n-by-M score matrix)."""
    sets = resolve_zones(cfg, ds)
    models = []
    columns = []
    for m, (zone, idx) in enumerate(zip(cfg.zones, sets)):
        model = fit_zone(ds.intensities[:, idx], zone_name=zone.name, zone_index=m, indices=idx)
        models.append(model)
        columns.append(score_zone(model, ds.intensities[:, idx]))
    return models, np.column_stack(columns)


def zone_model_to_json(model: ZoneModel) -> str:
    """Serialise one zone model with 17-significant-digit decimals."""
    parts = [
        f'"name": {json.dumps(model.zone_name)}',
        '"indices": [' + ", ".join(str(int(i)) for i in model.indices) + "]",
        '"mean": [' + ", ".join(_fmt(v) for v in model.mean) + "]",
        '"loading": [' + ", ".join(_fmt(v) for v in model.loading) + "]",
        f'"variance_explained": {_fmt(model.variance_explained)}',
    ]
    return "{" + ", ".join(parts) + "}"


def zone_models_to_json(models: list[ZoneModel]) -> str:
    return "[\n" + ",\n".join("  " + zone_model_to_json(m) for m in models) + "\n]\n"


def threshold_spectrum_csv(spectrum: ThresholdSpectrum, axis: np.ndarray, indices: np.ndarray) -> str:
    """CSV text (axis value, profile value) for overlaying on measured spectra."""
    lines = ["axis,value"]
    for j, v in zip(indices, spectrum.profile):
        lines.append(f"{_fmt(axis[j])},{_fmt(v)}")
    return "\n".join(lines) + "\n"


def write_threshold_spectrum(
    spectrum: ThresholdSpectrum, axis: np.ndarray, indices: np.ndarray, path: str | Path
) -> None:
    Path(path).write_text(threshold_spectrum_csv(spectrum, axis, indices))
