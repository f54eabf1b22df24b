"""Prediction interfaces the explainer queries, two built-in reference
classifiers, and a line-delimited JSON protocol for external models.

A continuous model answers ``predict`` (real-valued outputs, labels
encoded 0/1); a probabilistic model answers ``predict_proba`` with rows
over classes (0, 1) summing to 1.
"""

from __future__ import annotations

import json
import subprocess
import threading
from pathlib import Path

import numpy as np

from .dataio import SpectralDataset
from .errors import ConfigError, ModelError

CONTINUOUS = "continuous"
PROBABILISTIC = "probabilistic"

# Requests to external models are chunked below this serialized size.
_MAX_REQUEST_BYTES = 32 * 1024 * 1024


def _check_width(X: np.ndarray, expected: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != expected:
        raise ModelError(f"feature width {X.shape[1]} does not match model width {expected}")
    return X


class RidgeModel:
    """Linear model fit by closed-form regularized least squares."""

    kind = CONTINUOUS

    def __init__(self, weights: np.ndarray, intercept: float, lam: float = 0.0):
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.lam = float(lam)
        self.fitted_values: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        return self.weights.size

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = _check_width(X, self.n_features)
        return X @ self.weights + self.intercept


class LogisticModel:
    """Binary logistic model; probabilities from a numerically stable sigmoid."""

    kind = PROBABILISTIC

    def __init__(self, weights: np.ndarray, intercept: float, l2: float = 0.0):
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.l2 = float(l2)
        self.converged = True
        self.n_iters = 0

    @property
    def n_features(self) -> int:
        return self.weights.size

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = _check_width(X, self.n_features)
        return X @ self.weights + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        p1 = _sigmoid(self.decision(X))
        return np.column_stack([1.0 - p1, p1])


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _require_both_classes(train: SpectralDataset) -> None:
    present = set(np.unique(train.labels).tolist())
    if present != {0, 1}:
        raise ConfigError("training data must contain both classes")


def fit_ridge(train: SpectralDataset, lam: float = 1.0) -> RidgeModel:
    """Solve (Xc'Xc + lam I) w = Xc' yc on centered features, intercept from means."""
    _require_both_classes(train)
    if lam < 0:
        raise ConfigError("ridge lambda must be >= 0")
    X = train.intensities
    y = train.labels.astype(float)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    G = Xc.T @ Xc + lam * np.eye(X.shape[1])
    if lam == 0.0:
        evals = np.linalg.eigvalsh(G)
        if evals[0] <= max(evals[-1], 1.0) * 1e-12:
            raise ModelError("singular system at lambda 0; use lambda > 0")
    w = np.linalg.solve(G, Xc.T @ (y - y_mean))
    model = RidgeModel(weights=w, intercept=float(y_mean - x_mean @ w), lam=lam)
    model.fitted_values = model.predict(X)
    return model


def fit_logistic(
    train: SpectralDataset,
    l2: float = 0.01,
    max_iters: int = 2000,
    tol: float = 1e-7,
) -> LogisticModel:
    """Gradient descent on l2-regularized mean log-loss, zero-initialized.

    Weights and the (unpenalized) intercept are updated in alternating
    blocks, each with the step 1/L for its own Lipschitz bound, so every
    step is a monotone descent.
    """
    _require_both_classes(train)
    if l2 < 0:
        raise ConfigError("logistic l2 must be >= 0")
    X = train.intensities
    y = train.labels.astype(float)
    n, p = X.shape
    step_w = 1.0 / (float(np.sum(X * X)) / (4.0 * n) + l2)
    step_b = 4.0  # loss curvature in the intercept is at most 1/4
    w = np.zeros(p)
    b = 0.0
    model = LogisticModel(weights=w, intercept=b, l2=l2)
    for iteration in range(1, max_iters + 1):
        resid = _sigmoid(X @ w + b) - y
        grad_w = X.T @ resid / n + l2 * w
        grad_b = float(resid.mean())
        grad_norm = float(np.sqrt(grad_w @ grad_w + grad_b * grad_b))
        if grad_norm < tol:
            model.converged = True
            model.n_iters = iteration - 1
            break
        w = w - step_w * grad_w
        grad_b = float(np.mean(_sigmoid(X @ w + b) - y))
        b = b - step_b * grad_b
        z = X @ w + b
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
        if not np.isfinite(loss):
            raise ModelError("logistic loss overflowed; try a larger l2")
    else:
        model.converged = False
        model.n_iters = max_iters
    model.weights = w
    model.intercept = float(b)
    return model


def save_model(model, path: str | Path) -> None:
    """Dump builtin model weights as JSON."""
    if isinstance(model, RidgeModel):
        payload = {
            "kind": "ridge",
            "weights": [float(v) for v in model.weights],
            "intercept": model.intercept,
            "lambda": model.lam,
        }
    elif isinstance(model, LogisticModel):
        payload = {
            "kind": "logistic",
            "weights": [float(v) for v in model.weights],
            "intercept": model.intercept,
            "l2": model.l2,
        }
    else:
        raise ModelError("only builtin models can be saved")
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_model(spec: dict | str | Path):
    """Build a model handle from a spec dict or a JSON file path.

    Accepted kinds: "ridge" / "logistic" weight dumps and
    {"kind": "external", "argv": [...]} subprocess models.
    """
    if not isinstance(spec, dict):
        path = Path(spec)
        try:
            spec = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"model file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid model JSON ({exc})") from exc
    kind = spec.get("kind")
    try:
        if kind == "ridge":
            return RidgeModel(
                weights=np.asarray(spec["weights"], dtype=float),
                intercept=float(spec["intercept"]),
                lam=float(spec.get("lambda", 0.0)),
            )
        if kind == "logistic":
            return LogisticModel(
                weights=np.asarray(spec["weights"], dtype=float),
                intercept=float(spec["intercept"]),
                l2=float(spec.get("l2", 0.0)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad {kind} model spec: {exc}") from exc
    if kind == "external":
        argv = spec.get("argv")
        if not isinstance(argv, list) or not argv:
            raise ConfigError("external model spec requires a non-empty 'argv' list")
        return ExternalModel([str(a) for a in argv])
    raise ConfigError(f"unknown model kind {kind!r}")


class ExternalModel:
    """Child-process model speaking newline-delimited JSON over stdio.

    The handle is a serial channel: one in-flight request, guarded by a
    lock. Large matrices are split by rows to keep each request small.
    """

    def __init__(self, argv: list[str]):
        self.argv = list(argv)
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
            )
        except OSError as exc:
            raise ModelError(f"failed to start external model {self.argv}: {exc}") from exc
        self._lock = threading.Lock()
        info = self._request({"op": "info"})
        kind = info.get("kind")
        if kind not in (CONTINUOUS, PROBABILISTIC):
            self.close()
            raise ModelError(f"external model reported unknown kind {kind!r}")
        self.kind = kind
        try:
            self.n_features = int(info["n_features"])
        except (KeyError, TypeError, ValueError) as exc:
            self.close()
            raise ModelError("external model info lacks a valid 'n_features'") from exc
        if kind == PROBABILISTIC and int(info.get("n_classes", 0)) != 2:
            self.close()
            raise ModelError("probabilistic external models must report n_classes = 2")

    def _request(self, obj: dict) -> dict:
        line = json.dumps(obj)
        with self._lock:
            if self._proc.poll() is not None:
                raise ModelError(
                    f"external model {self.argv} exited with code {self._proc.returncode}"
                )
            try:
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
                reply = self._proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise ModelError(f"external model {self.argv} pipe failure: {exc}") from exc
        if not reply:
            code = self._proc.poll()
            raise ModelError(
                f"external model {self.argv} closed its stream (exit code {code})"
            )
        try:
            parsed = json.loads(reply)
        except json.JSONDecodeError as exc:
            self.close()
            raise ModelError(f"external model sent a malformed reply: {reply!r}") from exc
        if isinstance(parsed, dict) and "error" in parsed:
            raise ModelError(f"external model error: {parsed['error']}")
        if not isinstance(parsed, dict):
            self.close()
            raise ModelError(f"external model sent a non-object reply: {reply!r}")
        return parsed

    def _chunks(self, X: np.ndarray):
        rows = X.shape[0]
        if rows == 0:
            yield X
            return
        sample = json.dumps({"op": "predict", "x": [list(map(float, X[0]))]})
        per_row = max(len(sample), 1)
        rows_per_chunk = max(1, _MAX_REQUEST_BYTES // per_row)
        for start in range(0, rows, rows_per_chunk):
            yield X[start : start + rows_per_chunk]

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.kind != CONTINUOUS:
            raise ModelError("predict is only available on continuous models")
        X = _check_width(X, self.n_features)
        if X.shape[0] == 0:
            return np.zeros(0)
        parts = []
        for chunk in self._chunks(X):
            reply = self._request({"op": "predict", "x": [list(map(float, r)) for r in chunk]})
            y = reply.get("y")
            if not isinstance(y, list) or len(y) != chunk.shape[0]:
                raise ModelError("external model 'predict' reply has a wrong-sized 'y'")
            parts.append(np.asarray(y, dtype=float))
        return np.concatenate(parts)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.kind != PROBABILISTIC:
            raise ModelError("predict_proba is only available on probabilistic models")
        X = _check_width(X, self.n_features)
        if X.shape[0] == 0:
            return np.zeros((0, 2))
        parts = []
        for chunk in self._chunks(X):
            reply = self._request(
                {"op": "predict_proba", "x": [list(map(float, r)) for r in chunk]}
            )
            p = reply.get("p")
            if not isinstance(p, list) or len(p) != chunk.shape[0]:
                raise ModelError("external model 'predict_proba' reply has a wrong-sized 'p'")
            arr = np.asarray(p, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ModelError("external model probabilities must be m-by-2")
            if arr.size and np.max(np.abs(arr.sum(axis=1) - 1.0)) > 1e-9:
                raise ModelError("external model probability rows must sum to 1")
            parts.append(arr)
        return np.concatenate(parts)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
