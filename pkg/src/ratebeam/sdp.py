"""Dense semidefinite programming kernel.

Solves problems of the form

    minimize    c^T x
    subject to  F0_b + sum_i x_i F_ib  PSD   for every block b,
                lo_i <= x_i <= hi_i          (optional, per variable)

with an infeasible-start primal-dual path-following interior-point method.
Directions use Nesterov-Todd scaling; the centering parameter follows a
Mehrotra-style predictor.  Box bounds are handled as 1x1 blocks, so the
whole constraint set is one list of PSD cones.

Complex Hermitian constraints enter through :func:`embed_hermitian`, the
standard ``[[Re, -Im], [Im, Re]]`` doubling, which preserves eigenvalues
(with multiplicity doubled) and hence positive semidefiniteness.

The solver equilibrates its input (variable shifts/scales to the unit box,
a diagonal congruence per block, objective normalization) but certifies the
returned point against the *original* data before reporting ``optimal``:
per-block minimum eigenvalues, bound violations, and the duality gap are
recomputed outside the iteration loop.  Feasibility residuals are
normalized by the size of the constraint value (``1 + ||F(x)||_F`` per
block), which is what makes the contract meaningful for badly scaled data.
Everything is deterministic: fixed iteration order, no randomization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "LMIBlock",
    "SDPProblem",
    "SDPResiduals",
    "SDPSolution",
    "embed_hermitian",
    "solve",
    "compute_residuals",
    "dump_problem",
    "load_problem",
]

_SYM_TOL = 1e-12
_HERM_TOL = 1e-10


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def embed_hermitian(h) -> np.ndarray:
    """Real symmetric embedding ``[[Re, -Im], [Im, Re]]`` of a Hermitian matrix.

    The embedding has the same spectrum as ``h`` with every eigenvalue
    doubled in multiplicity, so PSD-ness carries over both ways.
    """
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("input must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if np.max(np.abs(h - h.conj().T)) > _HERM_TOL * scale:
        raise ValueError("input is not Hermitian")
    h = (h + h.conj().T) / 2.0
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


@dataclass(frozen=True)
class LMIBlock:
    """One affine PSD constraint ``F0 + sum_i x_i F_i >= 0``.

    ``coeffs`` pairs variable indices with their (real symmetric)
    coefficient matrices.
    """

    f0: np.ndarray
    coeffs: tuple

    def __post_init__(self):
        f0 = np.atleast_2d(np.asarray(self.f0, dtype=float))
        if f0.shape[0] != f0.shape[1]:
            raise ValueError("block matrices must be square")
        norm = max(1.0, float(np.max(np.abs(f0))))
        if np.max(np.abs(f0 - f0.T)) > _SYM_TOL * norm:
            raise ValueError("F0 must be symmetric")
        coeffs = []
        for idx, mat in self.coeffs:
            mat = np.atleast_2d(np.asarray(mat, dtype=float))
            if mat.shape != f0.shape:
                raise ValueError("coefficient matrices must match the block size")
            norm = max(1.0, float(np.max(np.abs(mat))))
            if np.max(np.abs(mat - mat.T)) > _SYM_TOL * norm:
                raise ValueError("coefficient matrices must be symmetric")
            coeffs.append((int(idx), mat))
        object.__setattr__(self, "f0", _symmetrize(f0))
        object.__setattr__(self, "coeffs", tuple(coeffs))

    @property
    def size(self) -> int:
        return self.f0.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = self.f0.copy()
        for idx, mat in self.coeffs:
            out += x[idx] * mat
        return out


@dataclass(frozen=True)
class SDPProblem:
    """Linear objective over real variables under LMI and box constraints."""

    n: int
    objective: np.ndarray
    lmi_blocks: tuple
    bounds: tuple

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        if c.size != self.n:
            raise ValueError("objective length must equal the variable count")
        blocks = tuple(self.lmi_blocks)
        for block in blocks:
            for idx, _ in block.coeffs:
                if not 0 <= idx < self.n:
                    raise ValueError("coefficient variable index out of range")
        bounds = []
        for lo, hi in self.bounds:
            lo = -np.inf if lo is None else float(lo)
            hi = np.inf if hi is None else float(hi)
            if lo > hi:
                raise ValueError("lower bound exceeds upper bound")
            bounds.append((lo, hi))
        if len(bounds) != self.n:
            raise ValueError("bounds must cover every variable")
        if not blocks and not any(np.isfinite(lo) or np.isfinite(hi) for lo, hi in bounds):
            raise ValueError("problem has no constraints")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "lmi_blocks", blocks)
        object.__setattr__(self, "bounds", tuple(bounds))


@dataclass(frozen=True)
class SDPResiduals:
    """Independent re-check of a candidate solution.

    ``min_eigenvalues`` are raw per-block minimum eigenvalues of ``F(x)``;
    ``feasibility`` is the worst normalized violation
    ``max(0, -min_eig) / (1 + ||F(x)||_F)`` over blocks; ``bound_violation``
    is normalized by ``1 + |bound|``; ``rel_gap`` is the duality gap over
    ``1 + |primal| + |dual|``.
    """

    min_eigenvalues: tuple
    feasibility: float
    bound_violation: float
    rel_gap: float


@dataclass(frozen=True)
class SDPSolution:
    x: np.ndarray
    objective_value: float
    status: str
    residuals: SDPResiduals
    iterations: int
    dual_objective: float


def compute_residuals(problem: SDPProblem, x: np.ndarray,
                      dual_objective: float) -> SDPResiduals:
    """Recompute feasibility and gap residuals from raw problem data."""
    x = np.asarray(x, dtype=float)
    min_eigs = []
    feas = 0.0
    for block in problem.lmi_blocks:
        fx = _symmetrize(block.evaluate(x))
        lam = np.linalg.eigvalsh(fx)
        min_eigs.append(float(lam[0]))
        feas = max(feas, max(0.0, -lam[0]) / (1.0 + float(np.linalg.norm(fx))))
    bv = 0.0
    for xi, (lo, hi) in zip(x, problem.bounds):
        if np.isfinite(lo):
            bv = max(bv, (lo - xi) / (1.0 + abs(lo)))
        if np.isfinite(hi):
            bv = max(bv, (xi - hi) / (1.0 + abs(hi)))
    pobj = float(problem.objective @ x)
    gap = max(pobj - dual_objective, 0.0)
    rel_gap = gap / (1.0 + abs(pobj) + abs(dual_objective))
    return SDPResiduals(min_eigenvalues=tuple(min_eigs), feasibility=feas,
                        bound_violation=max(bv, 0.0), rel_gap=rel_gap)


# ---------------------------------------------------------------------------
# presolve: variable scaling, bound cones, block equilibration
# ---------------------------------------------------------------------------

class _Cone:
    __slots__ = ("f0", "idx", "mats")

    def __init__(self, f0, idx, mats):
        self.f0 = f0
        self.idx = idx          # active-variable indices, shape (k,)
        self.mats = mats        # stacked coefficients, shape (k, m, m)

    @property
    def size(self):
        return self.f0.shape[0]

    def evaluate(self, x):
        if self.idx.size == 0:
            return self.f0.copy()
        return self.f0 + np.tensordot(x[self.idx], self.mats, axes=1)


class _Presolved:
    """Scaled copy of a problem plus the map back to original variables."""

    def __init__(self, problem: SDPProblem):
        n = problem.n
        c = problem.objective
        lo = np.array([b[0] for b in problem.bounds])
        hi = np.array([b[1] for b in problem.bounds])

        fixed = np.isfinite(lo) & np.isfinite(hi) & (lo == hi)
        self.active = np.flatnonzero(~fixed)
        self.fixed_values = np.where(fixed, lo, 0.0)
        self.n_active = self.active.size

        shift = self.fixed_values.copy()
        scale = np.ones(n)
        kind = np.full(n, "free", dtype=object)
        for i in self.active:
            if np.isfinite(lo[i]) and np.isfinite(hi[i]):
                # shift to the lower bound, not the midpoint: objectives over
                # wide boxes would otherwise cancel catastrophically when
                # mapped back to original units
                shift[i] = lo[i]
                scale[i] = hi[i] - lo[i]
                kind[i] = "box"
            elif np.isfinite(lo[i]):
                shift[i], kind[i] = lo[i], "lower"
            elif np.isfinite(hi[i]):
                shift[i], scale[i], kind[i] = hi[i], -1.0, "lower"
            else:
                gnorm = 0.0
                for block in problem.lmi_blocks:
                    for idx, mat in block.coeffs:
                        if idx == i:
                            gnorm = max(gnorm, float(np.linalg.norm(mat)))
                scale[i] = 1.0 / max(gnorm, 1e-12)
        self.shift, self.scale, self.kind = shift, scale, kind

        pos_of = {int(g): p for p, g in enumerate(self.active)}
        cones = []
        for block in problem.lmi_blocks:
            f0 = block.f0.copy()
            per_var: dict[int, np.ndarray] = {}
            for idx, mat in block.coeffs:
                f0 = f0 + shift[idx] * mat
                if idx in pos_of:
                    per_var[pos_of[idx]] = per_var.get(pos_of[idx], 0.0) + scale[idx] * mat
            # diagonal congruence (Ruiz-style) to balance the block
            m = block.size
            g = np.abs(f0)
            for mat in per_var.values():
                g = g + np.abs(mat)
            d = np.ones(m)
            for _ in range(3):
                row = np.max(g * np.outer(d, d), axis=1)
                d /= np.sqrt(np.sqrt(np.maximum(row, 1e-16)))
            d = np.clip(d / np.exp(np.mean(np.log(d))), 1e-8, 1e8)
            dd = np.outer(d, d)
            idxs = np.array(sorted(per_var), dtype=int)
            mats = np.stack([_symmetrize(per_var[p] * dd) for p in idxs]) if idxs.size \
                else np.zeros((0, m, m))
            cones.append(_Cone(_symmetrize(f0 * dd), idxs, mats))

        # bound constraints become one vectorized diagonal cone:
        # rows f0 + coeff * x[idx] >= 0
        d_f0, d_idx, d_coeff = [], [], []
        for p, i in enumerate(self.active):
            if kind[i] == "box":
                # scaled variable lives in [0, 1]
                d_f0.extend([0.0, 1.0])
                d_idx.extend([p, p])
                d_coeff.extend([1.0, -1.0])
            elif kind[i] == "lower":
                d_f0.append(0.0)
                d_idx.append(p)
                d_coeff.append(1.0)

        self.blocks = cones
        self.diag_f0 = np.asarray(d_f0)
        self.diag_idx = np.asarray(d_idx, dtype=int)
        self.diag_coeff = np.asarray(d_coeff)
        self.obj_offset = float(c @ shift)
        c_act = c[self.active] * scale[self.active]
        self.obj_scale = max(float(np.max(np.abs(c_act))) if c_act.size else 0.0, 1e-300)
        self.c = c_act / self.obj_scale

    def restore(self, x_scaled: np.ndarray) -> np.ndarray:
        x = self.fixed_values.copy()
        x[self.active] = self.shift[self.active] + self.scale[self.active] * x_scaled
        return x

    def objective_value(self, pobj_scaled: float) -> float:
        return self.obj_scale * pobj_scaled + self.obj_offset


# ---------------------------------------------------------------------------
# interior-point core
# ---------------------------------------------------------------------------

def _chol(mat):
    return np.linalg.cholesky(_symmetrize(mat))


def _nt_scaling(x_mat, ls):
    """W with W S W = X, from S = Ls Ls^T."""
    inner = _symmetrize(ls.T @ x_mat @ ls)
    lam, q = np.linalg.eigh(inner)
    root = (q * np.sqrt(np.maximum(lam, 1e-300))) @ q.T
    tmp = scipy.linalg.solve_triangular(ls, root, trans="T", lower=True)
    w = scipy.linalg.solve_triangular(ls, tmp.T, trans="T", lower=True).T
    return _symmetrize(w)


def _step_to_boundary(chol_l, delta):
    """sup { a : P + a*D PSD } given P = L L^T."""
    tmp = scipy.linalg.solve_triangular(chol_l, delta, lower=True)
    a = scipy.linalg.solve_triangular(chol_l, tmp.T, lower=True)
    lam_min = float(np.linalg.eigvalsh(_symmetrize(a))[0])
    if lam_min >= -1e-14:
        return np.inf
    return -1.0 / lam_min


def _ipm(pre: _Presolved, tol_feas: float, tol_gap: float, max_iter: int,
         certify):
    """Run the path-following iteration.

    Matrix blocks carry dense PSD iterates; the bound constraints live in
    one vectorized diagonal cone where every operation is elementwise.
    ``certify(x_scaled, pobj, dobj)`` is consulted once the internal
    residual targets are met; if it rejects the point (re-check against the
    raw data failed) the targets tighten and the iteration continues from
    the current iterates.
    """
    c = pre.c
    n = c.size
    blocks = pre.blocks
    df0, didx, dco = pre.diag_f0, pre.diag_idx, pre.diag_coeff
    nd = df0.size
    total_dim = sum(b.size for b in blocks) + nd
    c_norm = 1.0 + float(np.max(np.abs(c))) if n else 1.0

    xs, ss = [], []
    for blk in blocks:
        s0 = 10.0 * (1.0 + float(np.linalg.norm(blk.f0)) / np.sqrt(blk.size))
        xs.append(s0 * np.eye(blk.size))
        ss.append(s0 * np.eye(blk.size))
    xv = 10.0 * (1.0 + np.abs(df0))
    sv = xv.copy()
    x = np.zeros(n)
    norm_x0 = np.sqrt(sum(float(np.sum(xm * xm)) for xm in xs) + float(xv @ xv))

    target_feas, target_gap = 0.5 * tol_feas, 0.5 * tol_gap
    state = None
    for it in range(1, max_iter + 1):
        rs = [blk.evaluate(x) - sm for blk, sm in zip(blocks, ss)]
        rv = (df0 + dco * x[didx] - sv) if nd else np.zeros(0)
        ax = np.zeros(n)
        for blk, xm in zip(blocks, xs):
            if blk.idx.size:
                ax[blk.idx] += np.tensordot(blk.mats, xm, axes=([1, 2], [0, 1]))
        if nd:
            np.add.at(ax, didx, dco * xv)
        rx = c - ax
        comp = sum(float(np.sum(xm * sm)) for xm, sm in zip(xs, ss)) + float(xv @ sv)
        mu = comp / total_dim
        pobj = float(c @ x)
        dobj = -sum(float(np.sum(blk.f0 * xm)) for blk, xm in zip(blocks, xs)) \
            - float(df0 @ xv)
        err_s = max((float(np.linalg.norm(r)) / (1.0 + float(np.linalg.norm(blk.f0)))
                     for blk, r in zip(blocks, rs)), default=0.0)
        if nd:
            err_s = max(err_s, float(np.max(np.abs(rv) / (1.0 + np.abs(df0)))))
        err_x = float(np.max(np.abs(rx))) / c_norm if n else 0.0
        rel_comp = comp / (1.0 + abs(pobj) + abs(dobj))
        state = (x.copy(), pobj, dobj, it, [xm.copy() for xm in xs], xv.copy())

        # attempt certification early: the refined dual bound often passes
        # well before the internal composite gap does, especially on
        # problems whose feasible set has an empty interior
        if err_s <= tol_feas and err_x <= tol_feas and rel_comp <= 50.0 * tol_gap:
            if certify(state):
                return "converged", state
            if err_s <= target_feas and err_x <= target_feas and rel_comp <= target_gap:
                target_feas, target_gap = target_feas * 0.1, target_gap * 0.1
                if target_feas < 1e-14:
                    return "numerical_failure", state

        norm_x = np.sqrt(sum(float(np.sum(xm * xm)) for xm in xs) + float(xv @ xv))
        if norm_x > 1e9 * norm_x0:
            cert_obj = sum(float(np.sum(blk.f0 * xm)) for blk, xm in zip(blocks, xs)) \
                + float(df0 @ xv)
            if cert_obj / norm_x < -1e-9 and float(np.max(np.abs(ax))) / norm_x < 1e-9:
                return "infeasible", state

        try:
            lxs = [_chol(xm) for xm in xs]
            lss = [_chol(sm) for sm in ss]
        except np.linalg.LinAlgError:
            return "numerical_failure", state
        if nd and (np.any(xv <= 0) or np.any(sv <= 0)):
            return "numerical_failure", state
        ws = [_nt_scaling(xm, ls) for xm, ls in zip(xs, lss)]
        sinvs = [scipy.linalg.cho_solve((ls, True), np.eye(ls.shape[0])) for ls in lss]
        w2v = xv / sv if nd else np.zeros(0)

        m_mat = np.zeros((n, n))
        u = np.zeros(n)
        v = np.zeros(n)
        for blk, w, xm, sinv, r in zip(blocks, ws, xs, sinvs, rs):
            if blk.idx.size == 0:
                continue
            wfw = np.matmul(np.matmul(w[None, :, :], blk.mats), w[None, :, :])
            mb = np.tensordot(blk.mats, wfw, axes=([1, 2], [1, 2]))
            ii = np.ix_(blk.idx, blk.idx)
            m_mat[ii] += (mb + mb.T) / 2.0
            base = -xm - w @ r @ w
            u[blk.idx] += np.tensordot(blk.mats, base, axes=([1, 2], [0, 1]))
            v[blk.idx] += np.tensordot(blk.mats, sinv, axes=([1, 2], [0, 1]))
        if nd:
            diag_m = np.zeros(n)
            np.add.at(diag_m, didx, dco * dco * w2v)
            m_mat[np.diag_indices(n)] += diag_m
            np.add.at(u, didx, dco * (-xv - w2v * rv))
            np.add.at(v, didx, dco / sv)

        # Jacobi-precondition the Schur system; it turns badly conditioned
        # near convergence, and the symmetric scaling plus one round of
        # iterative refinement keeps the directions usable
        jac = 1.0 / np.sqrt(np.maximum(np.diag(m_mat), 1e-300))
        m_pre = m_mat * np.outer(jac, jac)
        ridge = 0.0
        for attempt in range(4):
            try:
                m_fac = scipy.linalg.cho_factor(
                    m_pre + ridge * np.eye(n), lower=True)
                break
            except scipy.linalg.LinAlgError:
                ridge = max(ridge * 100.0, 1e-13)
        else:
            return "numerical_failure", state

        def solve_schur(rhs):
            scaled = rhs * jac
            sol = scipy.linalg.cho_solve(m_fac, scaled)
            sol += scipy.linalg.cho_solve(m_fac, scaled - m_pre @ sol)
            return sol * jac

        def direction(sigma):
            h = u + sigma * mu * v - rx
            dx = solve_schur(h)
            d_s, d_x = [], []
            for blk, w, xm, sinv, r in zip(blocks, ws, xs, sinvs, rs):
                ds = np.tensordot(dx[blk.idx], blk.mats, axes=1) + r \
                    if blk.idx.size else r.copy()
                dxm = sigma * mu * sinv - xm - w @ ds @ w
                d_s.append(_symmetrize(ds))
                d_x.append(_symmetrize(dxm))
            dsv = (dco * dx[didx] + rv) if nd else np.zeros(0)
            dxv = (sigma * mu / sv - xv - w2v * dsv) if nd else np.zeros(0)
            return dx, d_s, d_x, dsv, dxv

        def max_steps(d_x, d_s, dxv, dsv):
            ap = min((_step_to_boundary(l, d) for l, d in zip(lxs, d_x)),
                     default=np.inf)
            ad = min((_step_to_boundary(l, d) for l, d in zip(lss, d_s)),
                     default=np.inf)
            if nd:
                neg = dxv < 0
                if np.any(neg):
                    ap = min(ap, float(np.min(-xv[neg] / dxv[neg])))
                neg = dsv < 0
                if np.any(neg):
                    ad = min(ad, float(np.min(-sv[neg] / dsv[neg])))
            return ap, ad

        _, ds_a, dx_a, dsv_a, dxv_a = direction(0.0)
        ap, ad = max_steps(dx_a, ds_a, dxv_a, dsv_a)
        ap, ad = min(1.0, ap), min(1.0, ad)
        comp_aff = sum(float(np.sum((xm + ap * dxm) * (sm + ad * dsm)))
                       for xm, sm, dxm, dsm in zip(xs, ss, dx_a, ds_a))
        if nd:
            comp_aff += float((xv + ap * dxv_a) @ (sv + ad * dsv_a))
        sigma = float(np.clip((max(comp_aff, 0.0) / comp) ** 3, 1e-8, 1.0 - 1e-8))

        dx, d_s, d_x, dsv, dxv = direction(sigma)
        ap, ad = max_steps(d_x, d_s, dxv, dsv)
        ap = min(1.0, 0.98 * ap)
        ad = min(1.0, 0.98 * ad)
        if max(ap, ad) < 1e-10:
            return "numerical_failure", state

        x = x + ad * dx
        for i in range(len(blocks)):
            xs[i] = _symmetrize(xs[i] + ap * d_x[i])
            ss[i] = _symmetrize(ss[i] + ad * d_s[i])
        if nd:
            xv = xv + ap * dxv
            sv = sv + ad * dsv

    return "max_iter", state


def _refine_dual_bound(pre: _Presolved, state) -> float:
    """Tighten the dual bound carried by the multiplier iterates.

    The raw bound ``-<F0, X>`` is only valid when ``<F_i, X> = c_i`` holds
    exactly.  Residuals on free variables are repaired by moving ``X``
    inside the span of their coefficient matrices (restoring positive
    semidefiniteness with a diagonal shift when needed); residuals on
    box-scaled variables are absorbed into the bound, since the variable
    is confined to ``[0, 1]`` after presolve.  Returns the refined bound in
    scaled units; falls back to the raw value if the repair fails.
    """
    x_scaled, _, dobj_raw, _, xs, xv = state
    c = pre.c
    n = c.size
    blocks = pre.blocks
    free_pos = np.flatnonzero(pre.kind[pre.active] == "free")
    one_sided = np.flatnonzero(pre.kind[pre.active] == "lower")
    xs = [xm.copy() for xm in xs]

    if free_pos.size:
        gram = np.zeros((free_pos.size, free_pos.size))
        per_block = []
        for blk in blocks:
            sel = {int(i): blk.mats[k] for k, i in enumerate(blk.idx)}
            mats = [sel.get(int(p)) for p in free_pos]
            per_block.append(mats)
            for a, ma in enumerate(mats):
                if ma is None:
                    continue
                for b_i, mb in enumerate(mats):
                    if mb is not None:
                        gram[a, b_i] += float(np.sum(ma * mb))
        try:
            for _ in range(3):
                rz = np.zeros(free_pos.size)
                for blk, mats, xm in zip(blocks, per_block, xs):
                    for a, ma in enumerate(mats):
                        if ma is not None:
                            rz[a] += float(np.sum(ma * xm))
                rz = c[free_pos] - rz
                if float(np.max(np.abs(rz), initial=0.0)) < 1e-13 * (1 + np.max(np.abs(c))):
                    break
                beta = np.linalg.solve(gram, rz)
                for bi, (blk, mats) in enumerate(zip(blocks, per_block)):
                    delta = sum(beta[a] * ma for a, ma in enumerate(mats)
                                if ma is not None)
                    if isinstance(delta, np.ndarray):
                        xs[bi] = xs[bi] + delta
                        lam_min = float(np.linalg.eigvalsh(_symmetrize(xs[bi]))[0])
                        if lam_min < 0:
                            xs[bi] = xs[bi] - 2.0 * lam_min * np.eye(blk.size)
        except np.linalg.LinAlgError:
            return dobj_raw

    ax = np.zeros(n)
    for blk, xm in zip(blocks, xs):
        if blk.idx.size:
            ax[blk.idx] += np.tensordot(blk.mats, xm, axes=([1, 2], [0, 1]))
    if pre.diag_f0.size:
        np.add.at(ax, pre.diag_idx, pre.diag_coeff * xv)
    rx = c - ax
    if free_pos.size and float(np.max(np.abs(rx[free_pos]))) > 1e-11 * (1 + np.max(np.abs(c))):
        return dobj_raw
    if one_sided.size and float(np.min(rx[one_sided], initial=0.0)) < 0:
        return dobj_raw
    dobj = -sum(float(np.sum(blk.f0 * xm)) for blk, xm in zip(blocks, xs)) \
        - float(pre.diag_f0 @ xv)
    boxed = np.flatnonzero(pre.kind[pre.active] == "box")
    dobj += float(np.sum(np.minimum(rx[boxed], 0.0)))
    return max(dobj, dobj_raw)


def solve(problem: SDPProblem, tol_feas: float = 1e-7, tol_gap: float = 1e-7,
          max_iter: int = 200) -> SDPSolution:
    """Solve the SDP; ``optimal`` status is certified against the raw data.

    A solution is reported ``optimal`` only if the independently recomputed
    residuals (normalized per-block minimum eigenvalue, bound violation, and
    relative duality gap) meet the tolerances.  Failure modes surface as
    ``infeasible``, ``max_iter``, or ``numerical_failure`` with the best
    iterate attached, never as a silent wrong answer.
    """
    pre = _Presolved(problem)

    def finish(state):
        x = pre.restore(state[0])
        dobj_s = _refine_dual_bound(pre, state)
        dobj = pre.obj_scale * dobj_s + pre.obj_offset
        return x, pre.objective_value(state[1]), dobj

    def certify(state):
        x, _, dobj = finish(state)
        res = compute_residuals(problem, x, dobj)
        return (res.feasibility <= tol_feas
                and res.bound_violation <= tol_feas
                and res.rel_gap <= tol_gap)

    status, state = _ipm(pre, tol_feas, tol_gap, max_iter, certify)
    x, pobj, dobj = finish(state)
    residuals = compute_residuals(problem, x, dobj)
    if status == "converged" or (residuals.feasibility <= tol_feas
                                 and residuals.bound_violation <= tol_feas
                                 and residuals.rel_gap <= tol_gap):
        final = "optimal"
    else:
        final = status
    return SDPSolution(x=x, objective_value=pobj, status=final,
                       residuals=residuals, iterations=state[3],
                       dual_objective=dobj)


# ---------------------------------------------------------------------------
# sparse text dump/load for debugging and cross-solver comparison
# ---------------------------------------------------------------------------

def dump_problem(problem: SDPProblem, stream) -> None:
    """Write a problem in the line-oriented sparse text format.

    One ``ent`` line per stored nonzero: block index, row, column (upper
    triangle only), variable index (-1 for the constant term), coefficient.
    """
    close = False
    if isinstance(stream, (str, bytes)):
        stream = open(stream, "w", encoding="utf-8")
        close = True
    try:
        stream.write("sdp 1\n")
        stream.write(f"n {problem.n}\n")
        for i, ci in enumerate(problem.objective):
            if ci != 0.0:
                stream.write(f"c {i} {ci!r}\n")
        for i, (lo, hi) in enumerate(problem.bounds):
            if np.isfinite(lo) or np.isfinite(hi):
                lo_s = repr(lo) if np.isfinite(lo) else "-inf"
                hi_s = repr(hi) if np.isfinite(hi) else "inf"
                stream.write(f"bound {i} {lo_s} {hi_s}\n")
        for b, block in enumerate(problem.lmi_blocks):
            stream.write(f"block {b} {block.size}\n")
            mats = [(-1, block.f0)] + list(block.coeffs)
            for var, mat in mats:
                for i in range(block.size):
                    for j in range(i, block.size):
                        if mat[i, j] != 0.0:
                            stream.write(f"ent {b} {i} {j} {var} {mat[i, j]!r}\n")
    finally:
        if close:
            stream.close()


def load_problem(stream) -> SDPProblem:
    """Read a problem written by :func:`dump_problem`."""
    close = False
    if isinstance(stream, (str, bytes)):
        stream = open(stream, "r", encoding="utf-8")
        close = True
    try:
        header = stream.readline().split()
        if header[:2] != ["sdp", "1"]:
            raise ValueError("unrecognized dump header")
        n = None
        c = None
        bounds = {}
        sizes = {}
        entries = []
        for line in stream:
            parts = line.split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "n":
                n = int(parts[1])
                c = np.zeros(n)
            elif tag == "c":
                c[int(parts[1])] = float(parts[2])
            elif tag == "bound":
                bounds[int(parts[1])] = (float(parts[2]), float(parts[3]))
            elif tag == "block":
                sizes[int(parts[1])] = int(parts[2])
            elif tag == "ent":
                entries.append((int(parts[1]), int(parts[2]), int(parts[3]),
                                int(parts[4]), float(parts[5])))
            else:
                raise ValueError(f"unrecognized line tag {tag!r}")
        if n is None:
            raise ValueError("dump is missing the variable count")
        blocks = []
        for b in sorted(sizes):
            size = sizes[b]
            f0 = np.zeros((size, size))
            per_var: dict[int, np.ndarray] = {}
            for blk, i, j, var, coeff in entries:
                if blk != b:
                    continue
                target = f0 if var == -1 else per_var.setdefault(var, np.zeros((size, size)))
                target[i, j] = coeff
                target[j, i] = coeff
            coeffs = tuple((var, per_var[var]) for var in sorted(per_var))
            blocks.append(LMIBlock(f0=f0, coeffs=coeffs))
        bound_list = tuple(bounds.get(i, (-np.inf, np.inf)) for i in range(n))
        return SDPProblem(n=n, objective=c, lmi_blocks=tuple(blocks), bounds=bound_list)
    finally:
        if close:
            stream.close()
