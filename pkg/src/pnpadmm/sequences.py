"""Piecewise geometric envelopes for residual traces of the adaptive loop.

A piecewise geometric sequence (PGS) with rate beta in (0, 1) and chunk
start indices n_1 < n_2 < ... is a positive sequence whose terms inside
chunk j (indices n_j + 1 .. n_{j+1}) decay geometrically at rate beta, and
whose chunk-leading peaks y_{n_j + 1} = A * beta^(j-1) are themselves
geometric.  The first n_1 terms are unconstrained (the "head").  Such a
sequence is summable, which is what makes it useful as an upper envelope:
a residual sequence dominated by a PGS has summable tail, hence the iterate
sequence is Cauchy.

Traces fall into three classes by their condition flags:

  S1-like: the penalty is eventually always raised (no C2 in the tail);
           the residual is eventually bounded by A * beta^k with
           beta = 1/sqrt(gamma).
  S2-like: the penalty is eventually always held (no C1 in the tail);
           the residual is eventually bounded by A * eta^k.
  S3-like: raises and holds keep alternating; the residual is bounded by a
           PGS with beta = max(1/sqrt(gamma), eta), with one chunk per
           C1 onset.

A finite trace can never settle which class an infinite run belongs to, so
all classification here is explicitly heuristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .solver import ConditionFlag, RunTrace


class TraceInvariantError(ValueError):
    """A condition trace violates one of its structural invariants."""


class BoundConstructionError(ValueError):
    """The requested envelope cannot be built from this trace."""


@dataclass(frozen=True)
class PgsSpec:
    """Defining data of a PGS: rate, first peak, chunk starts, head terms.

    head, when given, must hold exactly the first chunk_starts[0] terms;
    when omitted those terms default to peak0.  chunk_starts may be a finite
    prefix: generation extends it with unit-length chunks, which continues
    the sequence as a plain geometric tail at rate beta.
    """

    beta: float
    peak0: float
    chunk_starts: tuple[int, ...]
    head: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (0 < self.beta < 1):
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if self.peak0 <= 0:
            raise ValueError("peak0 must be positive")
        starts = tuple(int(n) for n in self.chunk_starts)
        if not starts:
            raise ValueError("chunk_starts must be non-empty")
        if starts[0] < 1:
            raise ValueError("chunk starts must be positive integers")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("chunk_starts must be strictly increasing")
        object.__setattr__(self, "chunk_starts", starts)
        if self.head is not None:
            head = tuple(float(t) for t in self.head)
            if len(head) != starts[0]:
                raise ValueError(
                    f"head must hold the first n_1 = {starts[0]} terms, "
                    f"got {len(head)}"
                )
            if any(t <= 0 for t in head):
                raise ValueError("head terms must be positive")
            object.__setattr__(self, "head", head)

    @property
    def head_terms(self) -> tuple[float, ...]:
        if self.head is not None:
            return self.head
        return (self.peak0,) * self.chunk_starts[0]


def _extended_starts(starts: Sequence[int], length: int) -> list[int]:
    out = list(starts)
    while out[-1] < length:
        out.append(out[-1] + 1)
    return out


def pgs_generate(spec: PgsSpec, length: int) -> np.ndarray:
    """First ``length`` terms y_1 .. y_length of the sequence.

    Term k in chunk j is peak0 * beta^(j - 1) * beta^(k - n_j - 1); head
    terms are copied verbatim.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    y = np.empty(length)
    n1 = spec.chunk_starts[0]
    head = spec.head_terms
    used = min(n1, length)
    y[:used] = head[:used]
    if length <= n1:
        return y
    starts = _extended_starts(spec.chunk_starts, length)
    for j, (lo, hi) in enumerate(zip(starts, starts[1:])):
        # chunk j+1 covers indices lo+1 .. hi (1-based)
        if lo + 1 > length:
            break
        hi = min(hi, length)
        ks = np.arange(lo + 1, hi + 1)
        y[lo:hi] = spec.peak0 * spec.beta ** (j + ks - lo - 1)
    return y


def pgs_chunk_sum_bound(spec: PgsSpec, j: int) -> float:
    """Closed-form bound peak0 * beta^(j-1) / (1 - beta) on the chunk-j sum.

    The actual chunk sum is a finite geometric series and sits strictly
    below this value.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    return spec.peak0 * spec.beta ** (j - 1) / (1.0 - spec.beta)


def pgs_total_sum_bound(spec: PgsSpec) -> float:
    """Bound on the full series: head sum plus peak0 / (1 - beta)^2."""
    return float(sum(spec.head_terms)) + spec.peak0 / (1.0 - spec.beta) ** 2


@dataclass(frozen=True)
class CauchyCertificate:
    """Explicit tail-sum control for a PGS.

    k_index is the smallest positive integer K with
    beta^(K-1) < epsilon * (1-beta)^2 / peak0, and n_start = n_K + 1.  Every
    sum of consecutive terms from n_start onward stays below tail_bound =
    peak0 * beta^(K-1) / (1-beta)^2 < epsilon.
    """

    epsilon: float
    k_index: int
    n_start: int
    tail_bound: float


def cauchy_index(
    peak0: float, beta: float, epsilon: float, chunk_starts: Sequence[int]
) -> CauchyCertificate:
    """Find the chunk count K and start index N certifying tail sums < epsilon."""
    if not (0 < beta < 1):
        raise ValueError("beta must be in (0, 1)")
    if peak0 <= 0 or epsilon <= 0:
        raise ValueError("peak0 and epsilon must be positive")
    threshold = epsilon * (1.0 - beta) ** 2 / peak0
    k = 1
    while beta ** (k - 1) >= threshold:
        k += 1
    starts = list(chunk_starts)
    if len(starts) < k:
        starts = _extended_starts(starts, starts[-1] + (k - len(starts)))
    n_k = starts[k - 1]
    return CauchyCertificate(
        epsilon=epsilon,
        k_index=k,
        n_start=n_k + 1,
        tail_bound=peak0 * beta ** (k - 1) / (1.0 - beta) ** 2,
    )


@dataclass(frozen=True)
class ConditionTrace:
    """Residuals, penalties, and condition flags of a finished run.

    deltas[i] and rhos[i] are the residual and post-update penalty of
    iteration i+1.  flags[i] is the condition observed at iteration i+1,
    i.e. C1 iff deltas[i+1] >= eta * deltas[i]; a trace of n iterations
    therefore carries n-1 flags.
    """

    deltas: np.ndarray
    rhos: np.ndarray
    flags: tuple[ConditionFlag, ...]
    gamma: float
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "deltas", np.asarray(self.deltas, dtype=float))
        object.__setattr__(self, "rhos", np.asarray(self.rhos, dtype=float))
        object.__setattr__(self, "flags", tuple(self.flags))

    def __len__(self):
        return self.deltas.size

    def validate(self) -> None:
        """Check structural invariants; raise TraceInvariantError on failure."""
        n = len(self)
        if self.rhos.size != n:
            raise TraceInvariantError("deltas and rhos must have equal length")
        if len(self.flags) != n - 1:
            raise TraceInvariantError(
                f"expected {n - 1} condition flags for {n} iterations, "
                f"got {len(self.flags)}"
            )
        if np.any(self.deltas < 0) or not np.all(np.isfinite(self.deltas)):
            raise TraceInvariantError("residuals must be finite and nonnegative")
        if np.any(self.rhos <= 0):
            raise TraceInvariantError("penalties must be positive")
        if not (0 < self.eta < 1) or self.gamma <= 1:
            raise TraceInvariantError("need gamma > 1 and eta in (0, 1)")
        for i, flag in enumerate(self.flags):
            expected = (
                ConditionFlag.C1
                if self.deltas[i + 1] >= self.eta * self.deltas[i]
                else ConditionFlag.C2
            )
            if flag != expected:
                raise TraceInvariantError(
                    f"flag at iteration {i + 1} is {flag}, inconsistent with "
                    f"residuals and eta"
                )
            factor = self.gamma if flag == ConditionFlag.C1 else 1.0
            if not math.isclose(
                self.rhos[i + 1], factor * self.rhos[i], rel_tol=1e-12
            ):
                raise TraceInvariantError(
                    f"penalty at iteration {i + 2} inconsistent with flag "
                    f"at iteration {i + 1}"
                )

    @classmethod
    def from_run_trace(cls, trace: RunTrace) -> "ConditionTrace":
        # record k >= 2 stores the condition observed at iteration k-1
        flags = tuple(r.condition for r in trace.records[1:])
        return cls(
            deltas=trace.deltas,
            rhos=trace.rhos,
            flags=flags,
            gamma=trace.config.gamma,
            eta=trace.config.eta,
        )


def alternation_boundaries(
    flags: Sequence[ConditionFlag],
) -> tuple[list[int], list[int]]:
    """C1-onset iterations n_j and the C2 onsets m_j that follow each.

    Returned indices are 1-based iteration numbers; flags[i] is the
    condition at iteration i+1.
    """
    ns: list[int] = []
    ms: list[int] = []
    want_c1 = True
    for i, flag in enumerate(flags):
        if want_c1 and flag == ConditionFlag.C1:
            ns.append(i + 1)
            want_c1 = False
        elif not want_c1 and flag == ConditionFlag.C2:
            ms.append(i + 1)
            want_c1 = True
    return ns, ms


def estimate_growth_coefficient(trace: ConditionTrace) -> float:
    """Smallest c with delta_{k+1} <= c / sqrt(rho_k) at every C1 iteration.

    Computed as the max of delta_{k+1} * sqrt(rho_k) over C1 iterations, so
    the per-C1-iteration bound holds by construction; the substantive check
    is whether the envelope built from it also covers the C2 stretches.
    """
    best = None
    for i, flag in enumerate(trace.flags):
        if flag == ConditionFlag.C1:
            value = trace.deltas[i + 1] * math.sqrt(trace.rhos[i])
            best = value if best is None else max(best, value)
    if best is None:
        raise BoundConstructionError(
            "growth coefficient undefined on this trace: no C1 iterations"
        )
    return float(best)


@dataclass(frozen=True)
class PgsBound:
    """PGS envelope extracted from an alternating (S3-like) trace."""

    spec: PgsSpec
    c_used: float
    n1: int
    chunk_onsets: tuple[int, ...]  # the n_j
    hold_onsets: tuple[int, ...]  # the m_j

    def sequence(self, length: int) -> np.ndarray:
        return pgs_generate(self.spec, length)


def construct_s3_bound(trace: ConditionTrace, c: float) -> PgsBound:
    """Build the PGS envelope of an alternating trace.

    Uses rate beta = max(1/sqrt(gamma), eta), first peak c / sqrt(rho_{n_1})
    and one chunk per C1 onset; the head copies the observed residuals up to
    n_1.  With c at least the true growth coefficient the envelope dominates
    the residuals from iteration n_1 + 1 on.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    ns, ms = alternation_boundaries(trace.flags)
    if len(ns) < 2:
        raise BoundConstructionError(
            "trace is S1/S2-like (fewer than two C1 onsets); "
            "use the geometric bound"
        )
    beta = max(1.0 / math.sqrt(trace.gamma), trace.eta)
    n1 = ns[0]
    peak0 = c / math.sqrt(trace.rhos[n1 - 1])
    head = tuple(float(d) for d in trace.deltas[:n1])
    spec = PgsSpec(beta=beta, peak0=peak0, chunk_starts=tuple(ns), head=head)
    return PgsBound(
        spec=spec,
        c_used=c,
        n1=n1,
        chunk_onsets=tuple(ns),
        hold_onsets=tuple(ms),
    )


@dataclass(frozen=True)
class GeometricBound:
    """Eventual bound delta_{k+1} <= scale * rate^k, valid for k >= start."""

    scale: float
    rate: float
    start: int

    def sequence(self, length: int) -> np.ndarray:
        """Terms y_1 .. y_length with y_k = scale * rate^(k-1).

        Only indices k >= start + 1 carry the guarantee; earlier entries are
        emitted for alignment.
        """
        ks = np.arange(1, length + 1)
        return self.scale * self.rate ** (ks - 1.0)


def construct_s12_bound(
    trace: ConditionTrace, c: float | None, window: int | None = None
) -> GeometricBound:
    """Build the geometric bound for a trace with a single-condition tail.

    For a tail of C1 flags starting at iteration t the bound is
    (c / sqrt(rho_t)) * (1/sqrt(gamma))^(k - t); for a C2 tail it is the
    eta-decay chained from the anchor residual at t (itself bounded through
    c when a C1 iteration precedes the tail).  With ``window`` given, a tail
    window containing both flags is rejected.
    """
    flags = trace.flags
    if not flags:
        raise BoundConstructionError(
            "insufficient iterations for bound construction"
        )
    if window is not None:
        tail = flags[-window:]
        if ConditionFlag.C1 in tail and ConditionFlag.C2 in tail:
            raise BoundConstructionError(
                "mixed condition tail; use construct_s3_bound"
            )
    last = flags[-1]
    i = len(flags) - 1
    while i > 0 and flags[i - 1] == last:
        i -= 1
    t = i + 1  # iteration where the final single-condition run starts
    if last == ConditionFlag.C1:
        if c is None:
            raise ValueError("c is required for a C1 tail")
        rate = 1.0 / math.sqrt(trace.gamma)
        scale = (c / math.sqrt(trace.rhos[t - 1])) * rate ** (-t)
    else:
        rate = trace.eta
        if t >= 2 and c is not None:
            anchor = c / math.sqrt(trace.rhos[t - 2])
        else:
            anchor = float(trace.deltas[t - 1])
        scale = anchor * rate ** (1 - t)
    return GeometricBound(scale=scale, rate=rate, start=t)


@dataclass(frozen=True)
class CaseClassification:
    label: str  # "S1-like" | "S2-like" | "S3-like"
    caveat: str


_CLASSIFY_CAVEAT = (
    "finite-horizon classification is heuristic: a finite trace cannot "
    "settle which conditions occur infinitely often"
)


def classify_case(trace: ConditionTrace, window: int) -> CaseClassification:
    """Label the trace by the flags in its final window.

    S1-like if the window holds no C2, S2-like if it holds no C1, S3-like
    otherwise.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(trace.flags) < window:
        raise ValueError(
            f"trace has {len(trace.flags)} flags, need more than window={window}"
        )
    tail = trace.flags[-window:]
    has_c1 = ConditionFlag.C1 in tail
    has_c2 = ConditionFlag.C2 in tail
    if has_c1 and has_c2:
        label = "S3-like"
    elif has_c1:
        label = "S1-like"
    else:
        label = "S2-like"
    return CaseClassification(label=label, caveat=_CLASSIFY_CAVEAT)


@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    worst_margin: float


def verify_bound(
    deltas: Sequence[float],
    bound: Sequence[float],
    start: int,
    rel_slack: float = 1e-12,
) -> BoundCheck:
    """Check delta_k <= y_k * (1 + rel_slack) for every k >= start.

    Both sequences are indexed from k = 1; worst_margin is the largest
    observed ratio delta_k / y_k over the checked range.
    """
    d = np.asarray(deltas, dtype=float)
    y = np.asarray(bound, dtype=float)
    if d.size != y.size:
        raise ValueError("deltas and bound must have equal length")
    if not (1 <= start <= d.size):
        raise ValueError(f"start must be in [1, {d.size}]")
    d = d[start - 1 :]
    y = y[start - 1 :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where((y == 0) & (d == 0), 1.0, d / y)
    worst = float(np.max(ratios))
    return BoundCheck(holds=bool(np.all(d <= y * (1.0 + rel_slack))), worst_margin=worst)
