"""Continuous-time Markov engine for the 12-state availability model.

The model couples four subsystems (pump, controller, cloud, power) into
twelve composite states; state 1 is fully operational, state 12 is total
system failure, and availability is the probability of state 1.  The
generator matrix is assembled from a failure/recovery rate table whose
keys must lie on the fixed edge set of the model graph.

Two solvers are provided and cross-check each other: a fixed-step
classic 4th-order transient integrator for dp/dt = Q^T p, and a direct
dense linear solve for the stationary distribution.  Because the system
is linear and time-invariant, one RK4 step is exactly multiplication by
I + B + B^2/2 + B^3/6 + B^4/24 with B = h*Q^T; precomputing that
propagator makes million-step horizons cheap without changing the method.

Rates are treated as per-hour by default; the unit is a declared
convention carried by the table, not an assumption baked into the math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

__all__ = [
    "UnknownEdge",
    "NegativeRate",
    "SingularSystem",
    "StepTooLarge",
    "N_STATES",
    "FAILURE_EDGES",
    "RECOVERY_EDGES",
    "STATE_LABELS",
    "RateTable",
    "CtmcModel",
    "StateDistribution",
    "TransientSolution",
    "build_generator",
    "solve_transient",
    "steady_state",
    "availability",
    "initial_distribution",
    "parse_rate_lines",
    "load_rate_file",
    "bundled_rate_table",
    "REFERENCE_STATE_PROBABILITIES",
    "ReferenceComparison",
    "compare_with_reference",
]


class UnknownEdge(ValueError):
    """Rate supplied for a transition that does not exist in the graph."""


class NegativeRate(ValueError):
    """Failure and recovery rates must be non-negative."""


class SingularSystem(Exception):
    """Stationary solve failed; the chain is reducible or degenerate."""


class StepTooLarge(Exception):
    """Integration violated conservation/positivity tolerances; shrink the step."""


N_STATES = 12

# Edges of the model graph.  Failures flow away from state 1 and deepen
# toward state 12; recoveries climb back.  State 10 has no recovery edge:
# its only exit is total failure.
FAILURE_EDGES: frozenset[tuple[int, int]] = frozenset(
    {
        (1, 2), (1, 3), (1, 4), (1, 5),
        (2, 8), (2, 9),
        (3, 6), (3, 7),
        (5, 11),
        (6, 10), (7, 10),
        (8, 11), (9, 11),
        (10, 12), (11, 12),
    }
)

RECOVERY_EDGES: frozenset[tuple[int, int]] = frozenset(
    {
        (2, 1), (3, 1), (4, 1), (5, 1),
        (6, 3), (7, 3),
        (8, 2), (9, 2),
        (11, 1), (12, 1),
    }
)

ALL_EDGES = FAILURE_EDGES | RECOVERY_EDGES

STATE_LABELS = {
    1: "normal operation",
    2: "pump failure (hardware defects)",
    3: "cloud failure (connection)",
    4: "pump-controller data delivery failure",
    5: "power supply failure",
    6: "cloud software failure",
    7: "cloud hardware failure",
    8: "pump software failure",
    9: "pump hardware failure",
    10: "cloud component failure",
    11: "pump component failure",
    12: "system failure",
}


def _check_edges(rates: Mapping[tuple[int, int], float], allowed: frozenset, kind: str) -> None:
    for edge, rate in rates.items():
        if edge not in allowed:
            raise UnknownEdge(f"no {kind} transition {edge[0]}->{edge[1]} in the model graph")
        if rate < 0:
            raise NegativeRate(f"{kind} rate for {edge[0]}->{edge[1]} is negative: {rate}")


@dataclass(frozen=True)
class RateTable:
    """Failure and recovery rates keyed by (from, to), per ``time_unit``."""

    failure: Mapping[tuple[int, int], float]
    recovery: Mapping[tuple[int, int], float]
    time_unit: str = "hour"
    defaulted: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        failure = dict(self.failure)
        recovery = dict(self.recovery)
        _check_edges(failure, FAILURE_EDGES, "failure")
        _check_edges(recovery, RECOVERY_EDGES, "recovery")
        object.__setattr__(self, "failure", failure)
        object.__setattr__(self, "recovery", recovery)
        object.__setattr__(self, "defaulted", tuple(self.defaulted))

    def rate(self, edge: tuple[int, int]) -> float:
        if edge in FAILURE_EDGES:
            return float(self.failure.get(edge, 0.0))
        if edge in RECOVERY_EDGES:
            return float(self.recovery.get(edge, 0.0))
        raise UnknownEdge(f"no transition {edge[0]}->{edge[1]} in the model graph")


@dataclass(frozen=True)
class CtmcModel:
    """A generator matrix Q: off-diagonals are rates, rows sum to zero."""

    n_states: int
    q: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.q, dtype=float)
        if q.shape != (self.n_states, self.n_states):
            raise ValueError(f"generator must be {self.n_states}x{self.n_states}, got {q.shape}")
        off = q - np.diag(np.diag(q))
        if (off < 0).any():
            raise NegativeRate("off-diagonal generator entries must be non-negative")
        row_sums = q.sum(axis=1)
        if np.abs(row_sums).max() > 1e-12:
            raise ValueError(f"generator rows must sum to zero, worst {np.abs(row_sums).max():g}")
        q.flags.writeable = False
        object.__setattr__(self, "q", q)

    @classmethod
    def from_rates(cls, n_states: int, rates: Mapping[tuple[int, int], float]) -> "CtmcModel":
        """Generic chain from 1-based (from, to) -> rate, any state count."""
        q = np.zeros((n_states, n_states))
        for (i, j), rate in rates.items():
            if not (1 <= i <= n_states and 1 <= j <= n_states) or i == j:
                raise UnknownEdge(f"bad transition {i}->{j} for a {n_states}-state chain")
            if rate < 0:
                raise NegativeRate(f"rate for {i}->{j} is negative: {rate}")
            q[i - 1, j - 1] = rate
        np.fill_diagonal(q, 0.0)
        np.fill_diagonal(q, -q.sum(axis=1))
        return cls(n_states=n_states, q=q)


def build_generator(rates: RateTable) -> CtmcModel:
    """Assemble the 12-state generator; dp/dt = Q^T p reproduces the flow balance."""
    combined = {edge: rates.rate(edge) for edge in ALL_EDGES}
    return CtmcModel.from_rates(N_STATES, combined)


_CONSERVATION_TOL = 1e-9
_POSITIVITY_TOL = -1e-12
_HALVING_TOL = 1e-8


@dataclass(frozen=True)
class StateDistribution:
    """Probabilities over the chain's states at time ``t``."""

    p: np.ndarray
    t: float

    def __post_init__(self) -> None:
        p = np.array(self.p, dtype=float)
        total = p.sum()
        if abs(total - 1.0) > _CONSERVATION_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        if p.min() < _POSITIVITY_TOL or p.max() > 1.0 + _CONSERVATION_TOL:
            raise ValueError("probabilities outside [0, 1]")
        p = np.clip(p, 0.0, 1.0)
        p.flags.writeable = False
        object.__setattr__(self, "p", p)


def initial_distribution(n_states: int = N_STATES, state: int = 1) -> StateDistribution:
    """Point mass on ``state`` (1-based) at t = 0."""
    p = np.zeros(n_states)
    p[state - 1] = 1.0
    return StateDistribution(p=p, t=0.0)


def availability(dist: StateDistribution) -> float:
    """Probability of the fully operational state (state 1)."""
    return float(dist.p[0])


def _rk4_propagator(q: np.ndarray, step: float) -> np.ndarray:
    """Exact one-step matrix of classic RK4 on the linear system dp/dt = Q^T p."""
    b = step * q.T
    n = b.shape[0]
    m = np.eye(n) + b
    power = b
    for k in (2.0, 3.0, 4.0):
        power = power @ b / k
        m = m + power
    return m


@dataclass(frozen=True)
class TransientSolution:
    """Sampled trajectory plus the per-step health metrics of the full run."""

    times: np.ndarray
    probabilities: np.ndarray  # one sampled distribution per row
    final: StateDistribution
    step: float
    horizon: float
    max_conservation_error: float
    min_probability: float
    halving_gap: float | None

    def distributions(self) -> Iterator[StateDistribution]:
        for t, row in zip(self.times, self.probabilities):
            yield StateDistribution(p=row, t=float(t))

    def availability_series(self) -> np.ndarray:
        return self.probabilities[:, 0]


def _propagate_checked(
    m: np.ndarray, p0: np.ndarray, n_steps: int, step: float, sample_every: int
) -> tuple[list[float], list[np.ndarray], float, float]:
    times = [0.0]
    samples = [p0.copy()]
    p = p0.copy()
    max_err = abs(p.sum() - 1.0)
    min_p = float(p.min())
    for k in range(1, n_steps + 1):
        p = m @ p
        total = p.sum()
        err = total - 1.0 if total >= 1.0 else 1.0 - total
        if err > max_err:
            max_err = err
        low = p.min()
        if low < min_p:
            min_p = float(low)
        if err > _CONSERVATION_TOL or low < _POSITIVITY_TOL:
            raise StepTooLarge(
                f"invariants violated at t={k * step:g} "
                f"(|sum-1|={err:.3e}, min p={low:.3e}); use a smaller step"
            )
        if k % sample_every == 0 or k == n_steps:
            times.append(k * step)
            samples.append(p.copy())
    return times, samples, float(max_err), min_p


def solve_transient(
    model: CtmcModel,
    p0: StateDistribution,
    horizon: float,
    step: float,
    sample_every: int | None = None,
    check_halving: bool = True,
) -> TransientSolution:
    """Integrate dp/dt = Q^T p from ``p0`` to ``horizon`` with a fixed step.

    Conservation and positivity are checked at every step.  With
    ``check_halving`` the run is repeated at half the step and the two
    endpoints must agree to 1e-8 in max-norm, else the step is declared
    too large.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if horizon < step:
        raise ValueError("horizon must be at least one step")
    if len(p0.p) != model.n_states:
        raise ValueError("initial distribution size does not match the model")
    n_steps = max(1, round(horizon / step))
    if sample_every is None:
        sample_every = max(1, n_steps // 1000)
    m = _rk4_propagator(model.q, step)
    times, samples, max_err, min_p = _propagate_checked(m, p0.p, n_steps, step, sample_every)

    halving_gap: float | None = None
    if check_halving:
        m_half = _rk4_propagator(model.q, step / 2.0)
        p = p0.p.copy()
        for _ in range(2 * n_steps):
            p = m_half @ p
        halving_gap = float(np.abs(p - samples[-1]).max())
        if halving_gap >= _HALVING_TOL:
            raise StepTooLarge(
                f"endpoint moves {halving_gap:.3e} under step halving; use a smaller step"
            )

    actual_horizon = n_steps * step
    rows = np.clip(np.array(samples), 0.0, 1.0)
    return TransientSolution(
        times=np.array(times),
        probabilities=rows,
        final=StateDistribution(p=samples[-1], t=actual_horizon),
        step=step,
        horizon=actual_horizon,
        max_conservation_error=max_err,
        min_probability=min_p,
        halving_gap=halving_gap,
    )


def steady_state(model: CtmcModel) -> StateDistribution:
    """Solve Q^T p = 0 with sum(p) = 1 by replacing one equation with normalization."""
    n = model.n_states
    a = model.q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        p = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"stationary solve failed: {exc}") from exc
    residual = float(np.abs(model.q.T @ p).max())
    if residual >= 1e-10:
        raise SingularSystem(f"stationary residual {residual:.3e} too large; chain reducible?")
    if p.min() < -1e-9 or abs(p.sum() - 1.0) > 1e-9:
        raise SingularSystem("stationary solve produced an invalid distribution")
    return StateDistribution(p=np.clip(p, 0.0, 1.0), t=math.inf)


# --- rate-table files ---------------------------------------------------------

def parse_rate_lines(lines: Iterable[str], time_unit: str = "hour") -> RateTable:
    """Parse ``lambda i j value`` / ``mu i j value`` lines into a RateTable.

    Edges of the graph not present in the input are defaulted to rate 0
    and listed in ``defaulted`` so callers can report them.
    """
    failure: dict[tuple[int, int], float] = {}
    recovery: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4 or parts[0] not in ("lambda", "mu"):
            raise ValueError(f"line {lineno}: expected 'lambda|mu <i> <j> <rate>', got {raw!r}")
        kind, i_s, j_s, value_s = parts
        try:
            edge = (int(i_s), int(j_s))
            value = float(value_s)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        target = failure if kind == "lambda" else recovery
        if edge in target:
            raise ValueError(f"line {lineno}: duplicate rate for {kind} {edge}")
        target[edge] = value
    defaulted = tuple(sorted(FAILURE_EDGES - failure.keys())) + tuple(
        sorted(RECOVERY_EDGES - recovery.keys())
    )
    return RateTable(failure=failure, recovery=recovery, time_unit=time_unit, defaulted=defaulted)


def load_rate_file(path: str | Path, time_unit: str = "hour") -> RateTable:
    return parse_rate_lines(Path(path).read_text().splitlines(), time_unit=time_unit)


def bundled_rate_table(time_unit: str = "hour") -> RateTable:
    """The rate table shipped with the package (tableI.rates)."""
    text = resources.files("medguard").joinpath("data/tableI.rates").read_text()
    return parse_rate_lines(text.splitlines(), time_unit=time_unit)


# --- comparison against the case-study reference values -----------------------

# State probabilities published for this availability case study, kept
# for side-by-side reporting.  They are not a numerical target: a pure
# stationary reading of the shipped rate table contradicts them (flow
# balance at state 12 fails by orders of magnitude), so comparisons are
# advisory output, never an assertion.
REFERENCE_STATE_PROBABILITIES: tuple[float, ...] = (
    0.9925712,
    0.0002091,
    0.0005966,
    0.002998966,
    0.00009805,
    1.09e-06,
    2.99e-05,
    0.0019989,
    0.00049866,
    4.24e-07,
    0.0009958,
    3.00e-07,
)


@dataclass(frozen=True)
class ReferenceComparison:
    """Advisory report: when (if ever) transient availability meets the reference."""

    reference: tuple[float, ...]
    tolerance: float
    horizon: float
    step: float
    crossing_time: float | None
    crossing: StateDistribution | None
    steady: StateDistribution
    time_unit: str = "hour"

    def report_lines(self) -> list[str]:
        ref_avail = self.reference[0]
        lines = [
            f"reference availability: {ref_avail} (tolerance +/- {self.tolerance})",
        ]
        if self.crossing_time is None:
            lines.append(
                f"transient availability never enters the reference band within "
                f"{self.horizon:g} {self.time_unit}s"
            )
        else:
            lines.append(
                f"transient availability enters the reference band at "
                f"t* = {self.crossing_time:g} {self.time_unit}s "
                f"(P1 = {self.crossing.p[0]:.7f})"
            )
        lines.append(f"steady-state availability: {availability(self.steady):.7f}")
        lines.append("state  transient@t*  steady       reference")
        for idx in range(len(self.reference)):
            at_cross = "-" if self.crossing is None else f"{self.crossing.p[idx]:.6e}"
            lines.append(
                f"{idx + 1:>5}  {at_cross:>12}  {self.steady.p[idx]:.6e}  {self.reference[idx]:.6e}"
            )
        return lines


def compare_with_reference(
    model: CtmcModel,
    reference: tuple[float, ...] = REFERENCE_STATE_PROBABILITIES,
    tolerance: float = 0.005,
    horizon: float = 3_000_000.0,
    step: float = 1.0,
    time_unit: str = "hour",
) -> ReferenceComparison:
    """Scan the transient solution for the first time availability is within
    ``tolerance`` of the reference value, and report it next to the
    stationary solution.  Producing the report is the point; matching is not.
    """
    if len(reference) != model.n_states:
        raise ValueError("reference length does not match the model")
    target = reference[0]
    m = _rk4_propagator(model.q, step)
    p = initial_distribution(model.n_states).p.copy()
    crossing_time: float | None = None
    crossing: StateDistribution | None = None
    n_steps = max(1, round(horizon / step))
    if abs(p[0] - target) <= tolerance:
        crossing_time = 0.0
        crossing = StateDistribution(p=p, t=0.0)
    else:
        for k in range(1, n_steps + 1):
            p = m @ p
            if abs(p[0] - target) <= tolerance:
                crossing_time = k * step
                crossing = StateDistribution(p=p, t=crossing_time)
                break
    steady = steady_state(model)
    return ReferenceComparison(
        reference=tuple(reference),
        tolerance=tolerance,
        horizon=horizon,
        step=step,
        crossing_time=crossing_time,
        crossing=crossing,
        steady=steady,
        time_unit=time_unit,
    )
