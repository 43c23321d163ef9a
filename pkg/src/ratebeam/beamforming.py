"""LCMV beamforming: closed-form weights, output noise power, and filtering.

The beamformer minimizes the output noise power ``w^H R w`` over all weight
vectors satisfying ``Lambda^H w = f``; the closed form is

    w = R^-1 Lambda (Lambda^H R^-1 Lambda)^-1 f

with output noise power ``f^H (Lambda^H R^-1 Lambda)^-1 f``.  The single
distortionless constraint ``Lambda = a, f = 1`` is the MVDR special case.
Solves go through a Hermitian factorization of ``R`` rather than explicit
inverses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import IllConditionedError

__all__ = [
    "LinearConstraintSet",
    "BeamformerWeights",
    "lcmv_weights",
    "output_noise_power",
    "mvdr_weights",
    "apply_beamformer",
]

#: Condition-number cutoff beyond which a solve is refused.
COND_LIMIT = 1e12

#: Relative residual the constraint must meet after a solve.
CONSTRAINT_TOL = 1e-8


@dataclass(frozen=True)
class LinearConstraintSet:
    """The constraint pair ``Lambda^H w = f`` over M sensors.

    ``lam`` is M x U with full column rank, ``f`` the U response values.
    """

    lam: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.lam, dtype=complex))
        f = np.atleast_1d(np.asarray(self.f, dtype=complex))
        if lam.ndim != 2 or f.ndim != 1 or lam.shape[1] != f.size:
            raise ValueError("lam must be M x U and f of length U")
        if lam.shape[1] > lam.shape[0]:
            raise ValueError("more constraints than sensors")
        sv = np.linalg.svd(lam, compute_uv=False)
        if sv[-1] <= 0 or sv[0] / sv[-1] > COND_LIMIT:
            raise IllConditionedError("constraint matrix is rank deficient")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "f", f)

    @property
    def n_constraints(self) -> int:
        return self.lam.shape[1]

    @property
    def n_sensors(self) -> int:
        return self.lam.shape[0]


@dataclass(frozen=True)
class BeamformerWeights:
    """Weights for one frequency bin."""

    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w", np.atleast_1d(np.asarray(self.w, dtype=complex)))


def _factor_noise_cov(noise_cov: np.ndarray):
    r = np.atleast_2d(np.asarray(noise_cov, dtype=complex))
    r = (r + r.conj().T) / 2.0
    eigs = np.linalg.eigvalsh(r)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > COND_LIMIT:
        raise IllConditionedError("noise covariance is singular or ill conditioned")
    try:
        return scipy.linalg.cho_factor(r, lower=True)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - guarded above
        raise IllConditionedError("noise covariance factorization failed") from exc


def _constraint_gram(noise_cov, constraints: LinearConstraintSet):
    cho = _factor_noise_cov(noise_cov)
    x = scipy.linalg.cho_solve(cho, constraints.lam)
    gram = constraints.lam.conj().T @ x
    return x, (gram + gram.conj().T) / 2.0


def lcmv_weights(noise_cov, constraints: LinearConstraintSet) -> BeamformerWeights:
    """Minimum-output-noise weights subject to ``Lambda^H w = f``."""
    x, gram = _constraint_gram(noise_cov, constraints)
    try:
        y = scipy.linalg.solve(gram, constraints.f, assume_a="pos")
    except scipy.linalg.LinAlgError as exc:
        raise IllConditionedError("constraint Gram matrix is singular") from exc
    w = x @ y
    resid = np.linalg.norm(constraints.lam.conj().T @ w - constraints.f)
    if resid > CONSTRAINT_TOL * max(np.linalg.norm(constraints.f), 1e-300):
        raise IllConditionedError("constraint residual exceeds tolerance")
    return BeamformerWeights(w=w)


def output_noise_power(noise_cov, constraints: LinearConstraintSet) -> float:
    """Noise power at the beamformer output: ``f^H (Lambda^H R^-1 Lambda)^-1 f``."""
    _, gram = _constraint_gram(noise_cov, constraints)
    try:
        y = scipy.linalg.solve(gram, constraints.f, assume_a="pos")
    except scipy.linalg.LinAlgError as exc:
        raise IllConditionedError("constraint Gram matrix is singular") from exc
    power = np.vdot(constraints.f, y)
    return float(power.real)


def mvdr_weights(noise_cov, steering) -> BeamformerWeights:
    """Distortionless response toward a single steering vector."""
    a = np.atleast_1d(np.asarray(steering, dtype=complex))
    constraints = LinearConstraintSet(lam=a[:, None], f=np.array([1.0 + 0.0j]))
    return lcmv_weights(noise_cov, constraints)


def apply_beamformer(spectra, weights) -> np.ndarray:
    """Filter per-bin sensor spectra: output bin = ``w^H y``.

    ``spectra`` is (bins, frames, M) or (bins, M); ``weights`` is a
    (bins, M) array or a sequence of :class:`BeamformerWeights`.
    """
    y = np.asarray(spectra, dtype=complex)
    if isinstance(weights, np.ndarray):
        w = np.atleast_2d(np.asarray(weights, dtype=complex))
    else:
        w = np.stack([bw.w for bw in weights])
    if y.ndim == 2:
        if y.shape != w.shape:
            raise ValueError("spectra and weights disagree in shape")
        return np.einsum("bm,bm->b", w.conj(), y)
    if y.ndim == 3:
        if y.shape[0] != w.shape[0] or y.shape[2] != w.shape[1]:
            raise ValueError("spectra and weights disagree in shape")
        return np.einsum("bm,blm->bl", w.conj(), y)
    raise ValueError("spectra must be (bins, M) or (bins, frames, M)")
