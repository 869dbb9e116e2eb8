"""Sparse row-wise optimizer with per-token update scaling.

Both the gradient and the decoupled weight-decay rate of a row are
multiplied by that token's lambda coefficient; rows with lambda 0 are
skipped outright, which makes their bitwise invariance across a task a
structural property rather than a numerical accident. Updates are lazy:
only rows present in the gradient map are touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, NumericError


@dataclass(frozen=True)
class OptimConfig:
    kind: str = "adamw"  # "adamw" | "sgd"
    lr_peak: float = 5e-5
    weight_decay: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup_fraction: float = 0.1
    total_steps: int = 1

    def __post_init__(self):
        if self.lr_peak <= 0:
            raise InvalidInputError("OptimConfig: lr_peak must be positive")
        if self.weight_decay < 0:
            raise InvalidInputError("OptimConfig: weight_decay must be >= 0")
        if not 0 <= self.warmup_fraction < 1:
            raise InvalidInputError("OptimConfig: warmup_fraction in [0, 1)")
        if self.kind not in ("adamw", "sgd"):
            raise InvalidInputError(f"OptimConfig: unknown kind {self.kind!r}")


@dataclass
class OptimState:
    """Per-row moments (adaptive kind) plus the global step counter."""

    m: dict[int, np.ndarray] = field(default_factory=dict)
    v: dict[int, np.ndarray] = field(default_factory=dict)
    t: dict[int, int] = field(default_factory=dict)
    step_count: int = 0


def reset_state(state: OptimState) -> OptimState:
    state.m.clear()
    state.v.clear()
    state.t.clear()
    state.step_count = 0
    return state


def lr_at(step: int, cfg: OptimConfig) -> float:
    """Linear ramp from 0 to lr_peak over the warmup steps, then flat."""
    warmup = int(np.ceil(cfg.warmup_fraction * cfg.total_steps))
    if warmup <= 0 or step >= warmup:
        return cfg.lr_peak
    return cfg.lr_peak * (step / warmup)


def step(table, grads: dict[int, np.ndarray], lam: np.ndarray,
         cfg: OptimConfig, state: OptimState) -> None:
    """Apply one scheduled update to the rows present in `grads`."""
    lr = lr_at(state.step_count, cfg)
    state.step_count += 1
    mat = table.matrix
    for j in sorted(grads):
        g = np.asarray(grads[j], dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"step: non-finite gradient for row {j}")
        lam_j = float(lam[j])
        if lam_j == 0.0:
            continue
        theta = mat[j].astype(np.float64)
        if cfg.kind == "sgd":
            theta = theta * (1.0 - (lr * cfg.weight_decay) * lam_j) \
                - (lr * lam_j) * g
        else:
            g = lam_j * g
            theta = theta - ((lr * cfg.weight_decay) * lam_j) * theta
            m = state.m.get(j)
            if m is None:
                m = np.zeros_like(theta)
                v = np.zeros_like(theta)
                t = 0
            else:
                v = state.v[j]
                t = state.t[j]
            t += 1
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * (g * g)
            m_hat = m / (1.0 - cfg.beta1 ** t)
            v_hat = v / (1.0 - cfg.beta2 ** t)
            theta = theta - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
            state.m[j] = m
            state.v[j] = v
            state.t[j] = t
        mat[j] = theta.astype(np.float32)
