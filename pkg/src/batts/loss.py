"""The balancing loss: finite-sample value, gradients, optimal leaf weights,
the rebalancing constant, and the affinity split score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# e^x overflows double precision near 709; beyond this the model has diverged.
LOG_WEIGHT_LIMIT = 700.0


class DivergedModelError(RuntimeError):
    """Raised when |log w| exceeds the overflow guard."""


class DegenerateLeafError(ValueError):
    """Raised when a leaf has zero mass from one of the groups."""


def check_log_weights(*log_arrays) -> None:
    for a in log_arrays:
        if a.size and np.max(np.abs(a)) > LOG_WEIGHT_LIMIT:
            raise DivergedModelError(
                f"|log w| exceeded {LOG_WEIGHT_LIMIT}; the model has diverged"
            )


@dataclass(frozen=True)
class BalanceState:
    """Per-observation balancing weights: w^{-1} on group 0, w on group 1."""

    inv_w0: np.ndarray
    w1: np.ndarray

    def __post_init__(self):
        inv_w0 = np.asarray(self.inv_w0, dtype=np.float64)
        w1 = np.asarray(self.w1, dtype=np.float64)
        object.__setattr__(self, "inv_w0", inv_w0)
        object.__setattr__(self, "w1", w1)
        for name, a in (("inv_w0", inv_w0), ("w1", w1)):
            if a.size == 0:
                raise ValueError(f"{name} must be nonempty")
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError(f"{name} entries must be strictly positive and finite")

    @classmethod
    def from_log_weights(cls, logw0: np.ndarray, logw1: np.ndarray) -> "BalanceState":
        logw0 = np.asarray(logw0, dtype=np.float64)
        logw1 = np.asarray(logw1, dtype=np.float64)
        check_log_weights(logw0, logw1)
        return cls(np.exp(-logw0), np.exp(logw1))

    @property
    def n0(self) -> int:
        return self.inv_w0.size

    @property
    def n1(self) -> int:
        return self.w1.size


def finite_sample_loss(state: BalanceState) -> float:
    """l_n(w) = mean of w^{-1} over group 0 plus mean of w over group 1."""
    return float(np.mean(state.inv_w0) + np.mean(state.w1))


def optimal_leaf_value(p_mass: float, q_mass: float) -> float:
    """The beta minimizing p_mass*e^{-beta} + q_mass*e^{beta}.

    Closed form: beta = (log p_mass - log q_mass) / 2.
    """
    if p_mass <= 0 or q_mass <= 0:
        raise DegenerateLeafError(
            f"degenerate leaf: masses must be positive, got ({p_mass}, {q_mass})"
        )
    return 0.5 * (np.log(p_mass) - np.log(q_mass))


def rebalance_constant(state: BalanceState) -> float:
    """Scalar c equalizing the two empirical loss terms of c*w.

    Multiplying the balancing weights by c never increases the loss.
    """
    return float(np.sqrt(np.mean(state.inv_w0) / np.mean(state.w1)))


def pseudo_residuals(state: BalanceState):
    """Negative gradients of l_n with respect to the additive value F(x).

    Group-0 entries are positive, group-1 entries negative.
    """
    return state.inv_w0 / state.n0, -state.w1 / state.n1


def hellinger_split_score(pl: float, ql: float, pr: float, qr: float) -> float:
    """Affinity of a candidate split, with each group normalized over the
    two children. Ranges over [0, 1]; lower means a sharper separation."""
    if min(pl, ql, pr, qr) < 0:
        raise ValueError("leaf masses must be nonnegative")
    p_tot = pl + pr
    q_tot = ql + qr
    if p_tot <= 0 or q_tot <= 0:
        raise ValueError("each group must carry positive total mass across the split")
    return float(np.sqrt(pl / p_tot * ql / q_tot) + np.sqrt(pr / p_tot * qr / q_tot))
