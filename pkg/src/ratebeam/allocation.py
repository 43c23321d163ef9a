"""Rate allocation and sensor selection for a constrained beamformer.

Given the noise covariance of M sensors, a constraint set for the
beamformer, a channel model, and a noise-power budget ``beta / alpha``, the
allocator picks per-sensor bit rates minimizing the total transmission
energy ``sum_k d_k^2 V_k (4**b_k - 1)`` subject to the beamformer's output
noise power staying within budget.  The output noise power is made explicit
in the rates through the quantization-noise model and a matrix-inversion-
lemma expansion, and the resulting constraint is relaxed into two linear
matrix inequalities over ``t_k = 4**b_k`` plus an auxiliary Hermitian
matrix ``Z``:

    [[Z, f], [f^H, beta/alpha]]                                   PSD
    [[Rnn^-1 + diag(e * t), Rnn^-1 L], [L^H Rnn^-1, L^H Rnn^-1 L - Z]] PSD
    1 <= t_k <= 4**b0

with ``e_k = 12 / A_k**2``.  Solving the SDP and mapping ``b_k = log4 t_k``
gives continuous rates; randomized rounding recovers integers that are
re-verified against the exact noise-power formula.

The Boolean substitution ``p_k = t_k / 4**b0`` exposes the same program as
a relaxed selection problem, and full-rate sensor selection is exactly the
program with objective ``sum_k p_k d_k**2`` and box ``0 <= p_k <= 1``; a
threshold on the allocated rates reproduces the selected subset, which is
what :func:`bisection_threshold` computes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sdp
from .beamforming import LinearConstraintSet, output_noise_power
from .energy import ChannelModel, transmit_energy
from .exceptions import AllocationFailedError, IllConditionedError
from .quantization import QuantizerSpec, quant_noise_cov

__all__ = [
    "RateAllocationProblem",
    "RateVector",
    "SelectionVector",
    "OracleResult",
    "compute_beta",
    "build_rd_lcmv_sdp",
    "build_boolean_form",
    "build_md_lcmv_sdp",
    "solve_rd_lcmv",
    "randomized_round",
    "md_lcmv_select",
    "bisection_threshold",
    "exhaustive_oracle",
    "allocation_noise_power",
    "subset_noise_power",
]

#: Relative slack used when re-checking subset feasibility; keeps the
#: selection and thresholding paths consistent with each other.
DEFAULT_EPSILON = 1e-9

#: Rates closer than this (in bits) fall into the same threshold-grid cell,
#: so numerically tied sensors move in and out of a subset together.
RATE_GRID_TOL = 1e-6


def compute_beta(noise_cov, constraints: LinearConstraintSet, amplitudes,
                 b0: int) -> float:
    """Output noise power with every sensor transmitting at the maximum rate.

    This is the tightest budget the network can be held to; users scale it
    by ``1 / alpha`` to trade energy against noise.
    """
    amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    spec = QuantizerSpec(amplitudes=amplitudes,
                         bits=np.full(amplitudes.shape, float(b0)))
    r_q = quant_noise_cov(spec).as_matrix()
    return output_noise_power(np.asarray(noise_cov, dtype=complex) + r_q, constraints)


@dataclass(frozen=True)
class RateAllocationProblem:
    """Everything the allocator needs for one frequency bin.

    ``beta`` defaults to :func:`compute_beta` on the same data; supply it
    explicitly to decouple the budget from the scene.
    """

    noise_cov: np.ndarray
    constraints: LinearConstraintSet
    channel: ChannelModel
    amplitudes: np.ndarray
    b0: int
    alpha: float
    beta: float | None = None

    def __post_init__(self):
        r = np.atleast_2d(np.asarray(self.noise_cov, dtype=complex))
        r = (r + r.conj().T) / 2.0
        m = r.shape[0]
        if r.shape[1] != m:
            raise ValueError("noise covariance must be square")
        if self.constraints.n_sensors != m or self.channel.n_sensors != m:
            raise ValueError("constraints and channel must match the sensor count")
        amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        if amplitudes.size != m or np.any(amplitudes <= 0):
            raise ValueError("amplitudes must be positive and one per sensor")
        if not (isinstance(self.b0, (int, np.integer)) and self.b0 >= 1):
            raise ValueError("b0 must be an integer of at least 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        object.__setattr__(self, "noise_cov", r)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "b0", int(self.b0))
        if self.beta is None:
            beta = compute_beta(r, self.constraints, amplitudes, self.b0)
            object.__setattr__(self, "beta", beta)
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def n_sensors(self) -> int:
        return self.noise_cov.shape[0]

    @property
    def e(self) -> np.ndarray:
        """Inverse quantization-noise scale per sensor: ``12 / A_k**2``."""
        return 12.0 / self.amplitudes**2

    @property
    def bound(self) -> float:
        """The noise-power budget ``beta / alpha``."""
        return self.beta / self.alpha


@dataclass(frozen=True)
class RateVector:
    """Per-sensor bit rates, continuous after relaxation or integer after
    rounding."""

    b: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if np.any(b < 0):
            raise ValueError("rates must be non-negative")
        object.__setattr__(self, "b", b)

    @property
    def t(self) -> np.ndarray:
        """The SDP decision values ``4**b``."""
        return 4.0**self.b

    @property
    def is_integer(self) -> bool:
        return bool(np.all(self.b == np.round(self.b)))


@dataclass(frozen=True)
class SelectionVector:
    """Per-sensor selection weights; Boolean once rounding has run.

    Carries the row-selection semantics (a selected sensor keeps its rows
    and columns in the subset matrices, an unselected one is deleted)
    without materializing a selection matrix.
    """

    p: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("selection weights must lie in [0, 1]")
        object.__setattr__(self, "p", p)

    @property
    def is_boolean(self) -> bool:
        return bool(np.all((self.p == 0.0) | (self.p == 1.0)))

    @property
    def mask(self) -> np.ndarray:
        return self.p > 0.5

    @property
    def selected(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


@dataclass(frozen=True)
class OracleResult:
    """Outcome of the exhaustive search over integer allocations."""

    best_rates: RateVector | None
    best_energy: float
    evaluated: int
    feasible: bool


# ---------------------------------------------------------------------------
# noise-power evaluation
# ---------------------------------------------------------------------------

def allocation_noise_power(problem: RateAllocationProblem, rates) -> float:
    """Beamformer output noise power at the given rates, evaluated directly.

    Every sensor stays in the matrices; a zero-rate sensor contributes its
    full quantization noise ``A_k**2 / 12``, matching the model the
    optimizer saw.
    """
    b = np.atleast_1d(np.asarray(getattr(rates, "b", rates), dtype=float))
    spec = QuantizerSpec(amplitudes=problem.amplitudes, bits=b)
    r_q = quant_noise_cov(spec).as_matrix()
    return output_noise_power(problem.noise_cov + r_q, problem.constraints)


def subset_noise_power(problem: RateAllocationProblem, mask) -> float:
    """Output noise power using only the masked sensors, all at rate b0.

    Returns ``inf`` when the subset cannot satisfy the constraints (fewer
    sensors than constraints, or a rank-deficient restricted constraint
    matrix).
    """
    mask = np.asarray(mask, dtype=bool)
    k = int(np.count_nonzero(mask))
    u = problem.constraints.n_constraints
    if k < u:
        return np.inf
    lam_sub = problem.constraints.lam[mask, :]
    sv = np.linalg.svd(lam_sub, compute_uv=False)
    if sv[-1] <= 0 or sv[0] / sv[-1] > 1e12:
        return np.inf
    spec = QuantizerSpec(amplitudes=problem.amplitudes[mask],
                         bits=np.full(k, float(problem.b0)))
    r_sub = problem.noise_cov[np.ix_(mask, mask)] + quant_noise_cov(spec).as_matrix()
    try:
        return output_noise_power(
            r_sub, LinearConstraintSet(lam=lam_sub, f=problem.constraints.f))
    except IllConditionedError:
        return np.inf


def _subset_feasible(problem: RateAllocationProblem, mask,
                     epsilon: float = DEFAULT_EPSILON) -> bool:
    return subset_noise_power(problem, mask) <= problem.bound * (1.0 + epsilon)


# ---------------------------------------------------------------------------
# SDP construction
# ---------------------------------------------------------------------------

def _hermitian_basis(u: int):
    """Real parametrization of a Hermitian U x U matrix.

    Ordering: real parts of the upper triangle (row major, diagonal
    included), then imaginary parts of the strict upper triangle.
    """
    basis = []
    for a in range(u):
        for b in range(a, u):
            e = np.zeros((u, u), dtype=complex)
            e[a, b] = 1.0
            e[b, a] = 1.0
            basis.append(e)
    for a in range(u):
        for b in range(a + 1, u):
            e = np.zeros((u, u), dtype=complex)
            e[a, b] = 1.0j
            e[b, a] = -1.0j
            basis.append(e)
    return basis


def _build_sdp(problem: RateAllocationProblem, g: np.ndarray,
               box: tuple[float, float], objective: np.ndarray) -> sdp.SDPProblem:
    """Assemble the two-LMI program over (y, Z) with R_qq^-1 = diag(g * y).

    Variables 0..M-1 are the rate variables ``y`` (``t`` or ``p`` depending
    on the caller's change of variables), followed by the real
    parametrization of ``Z``.  Both blocks are congruence-scaled by a
    deterministic diagonal so their entries are O(1) for the solver.
    """
    m = problem.n_sensors
    u = problem.constraints.n_constraints
    lam = problem.constraints.lam
    f = problem.constraints.f
    r = problem.noise_cov

    r_inv = np.linalg.inv(r)
    r_inv = (r_inv + r_inv.conj().T) / 2.0
    r_inv_lam = r_inv @ lam
    gram = lam.conj().T @ r_inv_lam
    gram = (gram + gram.conj().T) / 2.0
    bound = problem.bound

    # reference point for the diagonal scaling: geometric middle of the box,
    # which is where allocated rates tend to live
    y_ref = np.full(m, np.sqrt(max(box[0], 1e-300) * box[1]))
    z_ref_diag = np.real(np.diag(gram)) / 2.0
    top_diag = np.real(np.diag(r_inv)) + g * y_ref
    d2 = 1.0 / np.sqrt(np.concatenate([top_diag, np.maximum(z_ref_diag, 1e-300)]))
    d2 = np.clip(d2, 1e-150, 1e150)
    d1 = 1.0 / np.sqrt(np.concatenate([np.maximum(z_ref_diag, 1e-300), [bound]]))
    d1 = np.clip(d1, 1e-150, 1e150)

    z_basis = _hermitian_basis(u)
    n_vars = m + len(z_basis)

    # block 1: [[Z, f], [f^H, bound]] scaled by diag(d1)
    f0_1 = np.zeros((u + 1, u + 1), dtype=complex)
    f0_1[:u, u] = f
    f0_1[u, :u] = f.conj()
    f0_1[u, u] = bound
    f0_1 = np.outer(d1, d1) * f0_1
    coeffs_1 = []
    for p_idx, e in enumerate(z_basis):
        mat = np.zeros((u + 1, u + 1), dtype=complex)
        mat[:u, :u] = e
        coeffs_1.append((m + p_idx, sdp.embed_hermitian(np.outer(d1, d1) * mat)))
    block1 = sdp.LMIBlock(f0=sdp.embed_hermitian(f0_1), coeffs=tuple(coeffs_1))

    # block 2: [[Rnn^-1 + diag(g*y), Rnn^-1 L], [L^H Rnn^-1, gram - Z]]
    f0_2 = np.zeros((m + u, m + u), dtype=complex)
    f0_2[:m, :m] = r_inv
    f0_2[:m, m:] = r_inv_lam
    f0_2[m:, :m] = r_inv_lam.conj().T
    f0_2[m:, m:] = gram
    dd2 = np.outer(d2, d2)
    coeffs_2 = []
    for k in range(m):
        mat = np.zeros((m + u, m + u))
        mat[k, k] = g[k] * dd2[k, k].real
        coeffs_2.append((k, sdp.embed_hermitian(mat)))
    for p_idx, e in enumerate(z_basis):
        mat = np.zeros((m + u, m + u), dtype=complex)
        mat[m:, m:] = -e
        coeffs_2.append((m + p_idx, sdp.embed_hermitian(dd2 * mat)))
    block2 = sdp.LMIBlock(f0=sdp.embed_hermitian(dd2 * f0_2), coeffs=tuple(coeffs_2))

    bounds = [(box[0], box[1])] * m + [(None, None)] * len(z_basis)
    c = np.concatenate([np.asarray(objective, dtype=float), np.zeros(len(z_basis))])
    return sdp.SDPProblem(n=n_vars, objective=c, lmi_blocks=(block1, block2),
                          bounds=tuple(bounds))


def build_rd_lcmv_sdp(problem: RateAllocationProblem) -> sdp.SDPProblem:
    """Rate-allocation SDP over ``t_k = 4**b_k``.

    The box is ``1 <= t_k <= 4**b0``: non-negative rates up to the channel
    maximum.  The objective is the transmission energy up to the constant
    ``-sum d^2 V`` (the solver reports ``sum d_k^2 V_k t_k``-like values;
    energies quoted elsewhere subtract the constant).
    """
    t_max = 4.0**problem.b0
    obj = problem.channel.distances**problem.channel.path_loss_exponent \
        * problem.channel.noise_psd
    return _build_sdp(problem, g=problem.e, box=(1.0, t_max), objective=obj)


def build_boolean_form(problem: RateAllocationProblem) -> sdp.SDPProblem:
    """The same program over ``p_k = t_k / 4**b0``.

    Optima map onto :func:`build_rd_lcmv_sdp` through ``t = 4**b0 * p``;
    the box becomes ``4**-b0 <= p_k <= 1`` and the quantization term
    ``4**b0 * diag(e * p)``.
    """
    t_max = 4.0**problem.b0
    obj = problem.channel.distances**problem.channel.path_loss_exponent \
        * problem.channel.noise_psd
    return _build_sdp(problem, g=problem.e * t_max, box=(1.0 / t_max, 1.0),
                      objective=obj)


def build_md_lcmv_sdp(problem: RateAllocationProblem) -> sdp.SDPProblem:
    """Relaxed full-rate sensor selection: objective ``sum p_k d_k^2``,
    box ``0 <= p_k <= 1``."""
    t_max = 4.0**problem.b0
    obj = problem.channel.distances**problem.channel.path_loss_exponent
    return _build_sdp(problem, g=problem.e * t_max, box=(0.0, 1.0), objective=obj)


# ---------------------------------------------------------------------------
# solving and rounding
# ---------------------------------------------------------------------------

def solve_rd_lcmv(problem: RateAllocationProblem, tol_feas: float = 1e-7,
                  tol_gap: float = 1e-7, max_iter: int = 200) -> RateVector:
    """Continuous rates from the relaxation; ``b_k = log4 t_k`` in [0, b0].

    The relaxation's energy lower-bounds every feasible integer
    allocation's energy.  A non-optimal solver status is an allocation
    failure, never silently degraded output.
    """
    program = build_rd_lcmv_sdp(problem)
    solution = sdp.solve(program, tol_feas=tol_feas, tol_gap=tol_gap,
                         max_iter=max_iter)
    if solution.status != "optimal":
        raise AllocationFailedError(
            f"rate allocation SDP ended with status {solution.status!r}",
            status=solution.status)
    t = np.clip(solution.x[:problem.n_sensors], 1.0, 4.0**problem.b0)
    return RateVector(b=np.log(t) / np.log(4.0))


def _allocation_energy(problem: RateAllocationProblem, b: np.ndarray) -> float:
    return float(np.sum(transmit_energy(
        b, problem.channel.distances, problem.channel.noise_psd,
        problem.channel.path_loss_exponent)))


def _rates_feasible(problem: RateAllocationProblem, b: np.ndarray) -> bool:
    return allocation_noise_power(problem, b) <= problem.bound


def randomized_round(b_cont: RateVector, problem: RateAllocationProblem,
                     draws: int = 64, seed: int = 0) -> RateVector:
    """Integer rates from continuous ones.

    Each draw independently rounds ``b_k`` up with probability equal to its
    fractional part; among the draws that satisfy the exact noise-power
    check, the cheapest is kept.  The componentwise ceiling is always a
    feasible fallback when the relaxation was feasible, because
    quantization noise only shrinks as rates grow.  Draw seeds are spawned
    per draw, so the result does not depend on evaluation order.
    """
    b = np.clip(b_cont.b, 0.0, float(problem.b0))
    rounded = np.round(b)
    if np.allclose(b, rounded, atol=1e-9):
        return RateVector(b=rounded)
    floor = np.floor(b)
    frac = b - floor
    ceiling = np.ceil(b)

    candidates = [ceiling]
    for child in np.random.SeedSequence(seed).spawn(draws):
        rng = np.random.default_rng(child)
        candidates.append(floor + (rng.random(b.size) < frac))

    best = None
    for cand in candidates:
        if not _rates_feasible(problem, cand):
            continue
        key = (_allocation_energy(problem, cand), tuple(cand))
        if best is None or key < best[0]:
            best = (key, cand)
    if best is None:
        raise AllocationFailedError(
            "no feasible rounding; the relaxation itself must have been infeasible")
    return RateVector(b=best[1])


def _prefix_masks(values: np.ndarray, tol: float = RATE_GRID_TOL):
    """Nested candidate subsets from sorting ``values`` descending.

    Consecutive values within ``tol`` share a grid cell, so tied sensors
    enter a subset together.  Yields (mask, threshold) pairs from the
    smallest subset to the full set.
    """
    order = np.argsort(-values, kind="stable")
    sorted_vals = values[order]
    cuts = []
    for k in range(1, values.size):
        if sorted_vals[k - 1] - sorted_vals[k] > tol:
            cuts.append(k)
    cuts.append(values.size)
    out = []
    for k in cuts:
        mask = np.zeros(values.size, dtype=bool)
        mask[order[:k]] = True
        out.append((mask, float(sorted_vals[k - 1])))
    return out


def md_lcmv_select(problem: RateAllocationProblem, draws: int = 64,
                   seed: int = 0, epsilon: float = DEFAULT_EPSILON) -> SelectionVector:
    """Boolean sensor selection at full rate via the relaxed SDP + rounding.

    Rounding candidates are Bernoulli draws on the relaxed weights plus
    every threshold subset of them (and the full set); the cheapest
    candidate whose subset noise power fits the budget wins.  Thresholds
    dominate the nested family, which keeps the selection consistent with
    :func:`bisection_threshold` on the allocation side.
    """
    program = build_md_lcmv_sdp(problem)
    solution = sdp.solve(program)
    if solution.status != "optimal":
        raise AllocationFailedError(
            f"selection SDP ended with status {solution.status!r}",
            status=solution.status)
    p = np.clip(solution.x[:problem.n_sensors], 0.0, 1.0)

    cost_vec = problem.channel.distances**problem.channel.path_loss_exponent
    candidates = [mask for mask, _ in _prefix_masks(p)]
    candidates.append(np.ones(p.size, dtype=bool))
    for child in np.random.SeedSequence(seed).spawn(draws):
        rng = np.random.default_rng(child)
        candidates.append(rng.random(p.size) < p)

    best = None
    for mask in candidates:
        if not mask.any():
            continue
        if not _subset_feasible(problem, mask, epsilon):
            continue
        key = (float(np.sum(cost_vec[mask])), int(np.count_nonzero(mask)),
               tuple(mask))
        if best is None or key < best[0]:
            best = (key, mask)
    if best is None:
        raise AllocationFailedError("even the full sensor set misses the noise budget")
    return SelectionVector(p=best[1].astype(float))


def bisection_threshold(rates: RateVector, problem: RateAllocationProblem,
                        epsilon: float = DEFAULT_EPSILON,
                        max_iter: int = 64) -> tuple[float, np.ndarray]:
    """Largest rate threshold whose subset still meets the noise budget.

    The subset ``{k : b_k >= T}`` is evaluated with every member at rate
    ``b0``.  Candidate thresholds are the distinct allocated rates (ties
    within a small grid tolerance collapse), and feasibility is monotone as
    the threshold drops, so a bisection over the sorted grid finds the
    boundary.  Returns ``(T, mask)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    grid = _prefix_masks(rates.b)
    lo, hi = 0, len(grid) - 1
    if not _subset_feasible(problem, grid[hi][0], epsilon):
        raise AllocationFailedError("even the full sensor set misses the noise budget")
    if _subset_feasible(problem, grid[lo][0], epsilon):
        return grid[lo][1], grid[lo][0]
    # invariant: grid[lo] infeasible, grid[hi] feasible
    iterations = 0
    while hi - lo > 1:
        iterations += 1
        if iterations > max_iter:
            raise AllocationFailedError("bisection failed to terminate")
        mid = (lo + hi) // 2
        if _subset_feasible(problem, grid[mid][0], epsilon):
            hi = mid
        else:
            lo = mid
    return grid[hi][1], grid[hi][0]


def exhaustive_oracle(problem: RateAllocationProblem,
                      max_evaluations: int = 10**6) -> OracleResult:
    """Exact integer optimum by enumerating all ``(b0+1)**M`` allocations.

    Refuses problem sizes beyond ``max_evaluations`` candidates.
    """
    m = problem.n_sensors
    count = (problem.b0 + 1) ** m
    if count > max_evaluations:
        raise ValueError(
            f"exhaustive search would evaluate {count} allocations "
            f"(cap {max_evaluations})")
    best_key = None
    best = None
    evaluated = 0
    for combo in np.ndindex(*([problem.b0 + 1] * m)):
        evaluated += 1
        b = np.asarray(combo, dtype=float)
        if not _rates_feasible(problem, b):
            continue
        key = (_allocation_energy(problem, b), combo)
        if best_key is None or key < best_key:
            best_key = key
            best = b
    if best is None:
        return OracleResult(best_rates=None, best_energy=np.inf,
                            evaluated=evaluated, feasible=False)
    return OracleResult(best_rates=RateVector(b=best), best_energy=best_key[0],
                        evaluated=evaluated, feasible=True)
