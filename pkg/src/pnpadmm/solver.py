"""Plug-and-play ADMM with a residual-driven penalty schedule.

One iteration at penalty rho and denoising strength sigma = sqrt(lambda/rho):

    x' = argmin_x f(x) + (rho/2) ||x - (v - u)||^2
    v' = D_sigma(x' + u)
    u' = u + x' - v'

The progress residual delta_k is the triple metric between consecutive
iterates.  After each iteration (from the second one on) the penalty is
updated: if the new residual failed to drop below eta times the previous one
(condition C1) the penalty is raised by the factor gamma, otherwise it is
held (condition C2).  The very first update has no previous residual to
compare against, so the penalty is held and no flag is recorded.

Record k of a run trace carries delta_k, the post-update penalty rho_k (the
one the next iteration will use), sigma_k = sqrt(lambda/rho_k), and the
condition flag that produced rho_k.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .denoisers import Denoiser, ImageGrid, denoise
from .fidelity import FidelityTerm, prox_x_update
from .linalg import IterateTriple, metric_distance


class ConditionFlag(enum.Enum):
    C1 = "C1"  # residual ratio >= eta: penalty raised
    C2 = "C2"  # residual ratio < eta: penalty held

    def __str__(self):
        return self.value


class NonFiniteIterateError(RuntimeError):
    """An iterate picked up NaN/inf entries; names the failing iteration."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the loop and its penalty schedule.

    lam is the regularization strength, rho0 the initial penalty, gamma > 1
    the penalty growth factor, and eta in (0, 1) the residual-ratio
    threshold.  delta_tol stops the run early once the residual falls below
    it; max_iter always bounds the run since no convergence rate is
    guaranteed.
    """

    lam: float
    rho0: float
    gamma: float
    eta: float
    max_iter: int
    delta_tol: float = 1e-6
    seed: int = 0
    keep_iterates: bool = False

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.rho0 <= 0:
            raise ValueError("rho0 must be positive")
        if self.gamma <= 1:
            raise ValueError("gamma must be > 1")
        if not (0 < self.eta < 1):
            raise ValueError("eta must be in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.delta_tol < 0:
            raise ValueError("delta_tol must be >= 0")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    delta: float
    rho: float
    sigma: float
    condition: ConditionFlag | None
    fidelity_value: float


@dataclass
class RunTrace:
    """Per-iteration records plus the final state of a run."""

    records: list[TraceRecord]
    final_iterate: IterateTriple
    stop_reason: str  # "tolerance" | "max_iter"
    config: SolverConfig
    iterates: list[IterateTriple] | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.records)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([r.delta for r in self.records])

    @property
    def rhos(self) -> np.ndarray:
        return np.array([r.rho for r in self.records])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([r.sigma for r in self.records])

    @property
    def conditions(self) -> list[ConditionFlag | None]:
        return [r.condition for r in self.records]


@dataclass(frozen=True)
class FixedPointReport:
    """Distance moved by one frozen-parameter iteration from the final state."""

    residual: float


def update_rho(
    rho: float, delta_next: float, delta_prev: float, gamma: float, eta: float
) -> tuple[float, ConditionFlag]:
    """One penalty update: grow by gamma on C1, hold on C2.

    C1 fires when delta_next >= eta * delta_prev (boundary equality counts
    as C1).
    """
    if gamma <= 1:
        raise ValueError("gamma must be > 1")
    if not (0 < eta < 1):
        raise ValueError("eta must be in (0, 1)")
    if delta_next < 0 or delta_prev < 0:
        raise ValueError("residuals must be nonnegative")
    if delta_next >= eta * delta_prev:
        return gamma * rho, ConditionFlag.C1
    return rho, ConditionFlag.C2


def step(
    f: FidelityTerm,
    kind: Denoiser,
    rho: float,
    sigma: float,
    theta: IterateTriple,
) -> IterateTriple:
    """One plug-and-play iteration at fixed (rho, sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    h, w = f.op.in_shape
    x_new = prox_x_update(f, rho, theta.v - theta.u)
    noisy = ImageGrid(width=w, height=h, pixels=x_new + theta.u)
    v_new = denoise(kind, sigma, noisy).pixels
    u_new = theta.u + x_new - v_new
    return IterateTriple(x=x_new, v=v_new, u=u_new)


def run(
    f: FidelityTerm,
    kind: Denoiser,
    cfg: SolverConfig,
    theta0: IterateTriple,
) -> RunTrace:
    """Run the loop from theta0 until delta < delta_tol or max_iter.

    Deterministic given (f, kind, cfg, theta0).  With cfg.keep_iterates the
    trace also stores every iterate including theta0 (memory permitting),
    which enables residual-chain cross checks.
    """
    if theta0.dim != f.op.in_dim:
        raise ValueError(
            f"theta0 dimension {theta0.dim} != operator input dimension {f.op.in_dim}"
        )
    theta = theta0
    rho = cfg.rho0
    records: list[TraceRecord] = []
    iterates: list[IterateTriple] | None = [theta0] if cfg.keep_iterates else None
    prev_delta: float | None = None
    stop_reason = "max_iter"
    for k in range(1, cfg.max_iter + 1):
        sigma_step = math.sqrt(cfg.lam / rho)
        try:
            theta_next = step(f, kind, rho, sigma_step, theta)
        except ValueError as exc:
            raise NonFiniteIterateError(
                f"non-finite iterate at iteration {k}: {exc}"
            ) from exc
        delta = metric_distance(theta, theta_next)
        theta = theta_next
        if prev_delta is None:
            flag = None  # first update has no previous residual; hold rho
        else:
            rho, flag = update_rho(rho, delta, prev_delta, cfg.gamma, cfg.eta)
        records.append(
            TraceRecord(
                iteration=k,
                delta=delta,
                rho=rho,
                sigma=math.sqrt(cfg.lam / rho),
                condition=flag,
                fidelity_value=f.value(theta.x),
            )
        )
        if iterates is not None:
            iterates.append(theta)
        prev_delta = delta
        if delta < cfg.delta_tol:
            stop_reason = "tolerance"
            break
    return RunTrace(
        records=records,
        final_iterate=theta,
        stop_reason=stop_reason,
        config=cfg,
        iterates=iterates,
    )


def fixed_point_residual(
    f: FidelityTerm, kind: Denoiser, trace: RunTrace
) -> FixedPointReport:
    """Distance between the final iterate and one more frozen-parameter step."""
    last = trace.records[-1]
    theta_next = step(f, kind, last.rho, last.sigma, trace.final_iterate)
    return FixedPointReport(residual=metric_distance(trace.final_iterate, theta_next))
