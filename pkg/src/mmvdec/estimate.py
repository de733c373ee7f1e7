"""Decoupled signal estimation and baselines.

Given a covariance model (either the true one or a fitted atom-strength
vector), every signal sample is reconstructed from its own sketch alone:

* :func:`plug_in_mmse` applies the linear MMSE formula with the covariance
  model A diag(gamma) A^H in place of the true covariance;
* :func:`oracle_mmse` applies it with the true covariance (genie baseline);
* :func:`l21_ls_direct` minimizes the row-sparsity-regularized least-squares
  cost over the full coefficient matrix by proximal gradient descent, as an
  independent solution path used to cross-check the decoupling identities
  and as the single-sample LASSO when T = 1.

All estimators are pure functions; sample s of the output depends only on
sketch s once the covariance model is fixed.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .covsolve import GammaVector, SolverError
from .model import CovarianceModel, Dictionary, ProjectionSet, SketchSet


@dataclass(frozen=True)
class CoefficientMatrix:
    """G x T matrix of dictionary coefficients, one column per sample.

    Solver metadata (final objective, iteration count, convergence flag) is
    attached when produced by :func:`l21_ls_direct`.
    """

    values: np.ndarray
    objective: float | None = None
    iterations: int | None = None
    converged: bool | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 2:
            raise ValueError("coefficients must form a G x T matrix")
        if not np.all(np.isfinite(values.view(float))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "values", values)

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)


@dataclass(frozen=True)
class EstimateBatch:
    """n x T matrix of reconstructed signal samples plus the producing method."""

    signals: np.ndarray
    method_tag: str

    def __post_init__(self):
        signals = np.asarray(self.signals, dtype=complex)
        if signals.ndim != 2:
            raise ValueError("estimates must form an n x T matrix")
        if not np.all(np.isfinite(signals.view(float))):
            raise ValueError("estimates must be finite")
        object.__setattr__(self, "signals", signals)


@dataclass(frozen=True)
class DirectOptions:
    """Iteration budget, stopping tolerances and step rule of the direct solver.

    ``tolerance`` stops the proximal-gradient phase on relative objective
    change; ``polish_tolerance`` stops the exact row-coordinate polish phase
    on the largest coefficient change per sweep (relative to the coefficient
    scale).  Setting ``polish_max_sweeps`` to zero disables the polish.
    """

    max_iters: int = 200_000
    tolerance: float = 1e-10
    accelerate: bool = True
    polish_tolerance: float = 1e-12
    polish_max_sweeps: int = 500
    newton_polish: bool = True
    kkt_tolerance: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1 or self.tolerance <= 0:
            raise ValueError("direct solver options must be positive")
        if self.polish_tolerance <= 0 or self.polish_max_sweeps < 0:
            raise ValueError("polish options must be nonnegative")
        if self.kkt_tolerance <= 0:
            raise ValueError("kkt tolerance must be positive")


def plug_in_mmse(
    gamma: GammaVector,
    dictionary: Dictionary,
    proj: ProjectionSet,
    sketches: SketchSet,
) -> EstimateBatch:
    """Linear MMSE reconstruction with the fitted covariance A diag(gamma) A^H.

    Each sample is recovered individually through a Hermitian solve of its
    own m x m sketch covariance; the regularization weight of the sketch set
    takes the place of the noise variance.
    """
    rho = sketches.regularization
    if rho is None or rho <= 0:
        raise ValueError("sketch set must carry a positive regularization")
    if gamma.values.size != dictionary.size:
        raise ValueError("gamma length must match the dictionary size")
    if proj.num_samples != sketches.num_samples or proj.m != sketches.m:
        raise ValueError("projections and sketches disagree on dimensions")
    active = np.flatnonzero(gamma.values > 0)
    scaled = dictionary.atoms[:, active] * np.sqrt(gamma.values[active])
    t = sketches.num_samples
    out = np.zeros((dictionary.n, t), dtype=complex)
    eye = rho * np.eye(sketches.m)
    for s in range(t):
        bs = proj.project(s, scaled)
        factor = cho_factor(bs @ bs.conj().T + eye, lower=True)
        y = cho_solve(factor, sketches.sketches[:, s])
        out[:, s] = scaled @ (bs.conj().T @ y)
    return EstimateBatch(signals=out, method_tag="plug-in-mmse")


def oracle_mmse(
    cov: CovarianceModel,
    proj: ProjectionSet,
    sketches: SketchSet,
    noise_variance: float,
) -> EstimateBatch:
    """Linear MMSE reconstruction with the true signal covariance."""
    if proj.num_samples != sketches.num_samples or proj.m != sketches.m:
        raise ValueError("projections and sketches disagree on dimensions")
    if proj.n != cov.n:
        raise ValueError("projections and covariance disagree on dimension")
    t = sketches.num_samples
    out = np.empty((cov.n, t), dtype=complex)
    eye = noise_variance * np.eye(sketches.m)
    for s in range(t):
        proj_cov = proj.project(s, cov.sigma_h)  # Psi Sigma_h, shape (m, n)
        m_s = proj.project(s, proj_cov.conj().T).conj().T + eye
        factor = cho_factor(m_s, lower=True)
        y = cho_solve(factor, sketches.sketches[:, s])
        out[:, s] = proj_cov.conj().T @ y
    return EstimateBatch(signals=out, method_tag="oracle-mmse")


def group_soft_threshold(coeffs: CoefficientMatrix, threshold: float) -> CoefficientMatrix:
    """Row-wise group shrinkage, the proximal map of threshold * sum of row norms.

    Rows with norm at most the threshold are zeroed; the rest are scaled by
    1 - threshold / norm.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return CoefficientMatrix(values=_group_shrink(coeffs.values, threshold))


def _group_shrink(values: np.ndarray, threshold: float) -> np.ndarray:
    norms = np.linalg.norm(values, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > threshold, 1.0 - threshold / norms, 0.0)
    return values * scale[:, None]


def l21_objective(
    values: np.ndarray,
    projected_atoms: np.ndarray,
    sketches_mt: np.ndarray,
    weight: float,
) -> float:
    """0.5 * sum of squared residuals + weight * sum of coefficient row norms."""
    residual = np.einsum("tmg,gt->mt", projected_atoms, values) - sketches_mt
    fit = 0.5 * float(np.sum(np.abs(residual) ** 2))
    return fit + weight * float(np.sum(np.linalg.norm(values, axis=1)))


def _row_minimizer(z: np.ndarray, betas: np.ndarray, weight: float) -> np.ndarray:
    """Exact minimizer of one decoupled row subproblem.

    Minimizes sum_s [0.5 beta_s |c_s|^2 - Re(conj(z_s) c_s)] + weight ||c||_2.
    The row is zero iff ||z|| <= weight; otherwise c_s = z_s / (beta_s + nu)
    with nu > 0 solving nu ||c(nu)|| = weight^{-1}... i.e. the scalar secular
    equation nu^2 sum_s |z_s|^2 / (beta_s + nu)^2 = weight^2, which is
    monotone in nu and bracketed by the uniform-beta closed forms.
    """
    znorm = float(np.linalg.norm(z))
    if znorm <= weight:
        return np.zeros_like(z)
    positive = betas > 0
    bmin = float(betas[positive].min())
    bmax = float(betas[positive].max())
    lo = weight * bmin / (znorm - weight)
    hi = weight * bmax / (znorm - weight)
    if hi - lo <= 1e-15 * hi:
        return z * ((znorm - weight) / (znorm * bmax) if bmax > 0 else 0.0)

    z2 = np.abs(z) ** 2

    def secular(nu):
        return nu * nu * float(np.sum(z2 / (betas + nu) ** 2)) - weight * weight

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if secular(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    nu = 0.5 * (lo + hi)
    return z / (betas + nu)


def _row_polish(
    values: np.ndarray,
    projected_atoms: np.ndarray,
    sketches_mt: np.ndarray,
    weight: float,
    opts: "DirectOptions",
) -> tuple[np.ndarray, int]:
    """Cyclic exact row minimization until coefficient changes stall.

    Each sweep solves every row's subproblem exactly against the running
    residual, so the objective is monotone non-increasing; used as the
    terminal phase where proximal gradient steps are objective-flat but the
    row masses have not settled.
    """
    num_atoms = values.shape[0]
    residual = sketches_mt - np.einsum("tmg,gt->mt", projected_atoms, values)
    residual_t = np.ascontiguousarray(residual.T)  # (T, m), row s is sample s
    betas_all = np.sum(np.abs(projected_atoms) ** 2, axis=1)  # (T, G)
    sweeps = 0
    for sweep in range(opts.polish_max_sweeps):
        sweeps = sweep + 1
        max_change = 0.0
        scale = max(float(np.max(np.abs(values))), 1e-30)
        for i in range(num_atoms):
            atom = projected_atoms[:, :, i]  # (T, m)
            betas = betas_all[:, i]
            z = np.einsum("tm,tm->t", atom.conj(), residual_t) + betas * values[i]
            new_row = _row_minimizer(z, betas, weight)
            delta = new_row - values[i]
            change = float(np.max(np.abs(delta)))
            if change > 0.0:
                residual_t -= atom * delta[:, None]
                values[i] = new_row
                max_change = max(max_change, change)
        if max_change <= opts.polish_tolerance * scale:
            break
    return values, sweeps


def _real_dot(a: np.ndarray, b: np.ndarray) -> float:
    """Real inner product on complex arrays viewed as real vector spaces."""
    return float(np.real(np.vdot(a, b)))


def _active_newton_polish(
    values: np.ndarray,
    projected_atoms: np.ndarray,
    sketches_mt: np.ndarray,
    weight: float,
    opts: "DirectOptions",
) -> np.ndarray:
    """Newton-CG refinement of the nonzero rows.

    Away from zero rows the objective is smooth; its Hessian (in the real
    vector space underlying the complex coefficients) is the per-column
    normal operator plus, per row i, weight/||C_i|| times the projection
    complement of the row direction.  Coordinate sweeps stall along
    ill-conditioned valleys of coherent atoms; a handful of inexact Newton
    steps settles the small row masses the identity checks compare.
    Support changes are left to the exact row sweeps that alternate with
    the Newton steps in the caller.
    """
    active = np.flatnonzero(np.linalg.norm(values, axis=1) > 0)
    if active.size == 0:
        return values
    atoms = projected_atoms[:, :, active]  # (T, m, |S|)
    block = np.ascontiguousarray(values[active])
    betas_mean = float(np.mean(np.sum(np.abs(atoms) ** 2, axis=1)))
    scale = max(1.0, float(np.linalg.norm(sketches_mt)))

    def ls_residual(b):
        return np.einsum("tma,at->mt", atoms, b) - sketches_mt

    def objective(b):
        fit = 0.5 * float(np.sum(np.abs(ls_residual(b)) ** 2))
        return fit + weight * float(np.sum(np.linalg.norm(b, axis=1)))

    f_current = objective(block)
    for _ in range(30):
        norms = np.linalg.norm(block, axis=1)
        if np.any(norms == 0):
            break  # a row collapsed; let the row sweeps renegotiate support
        grad = np.einsum("tma,mt->at", atoms.conj(), ls_residual(block))
        grad += weight * block / norms[:, None]
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= opts.kkt_tolerance * scale:
            break
        directions = block / norms[:, None]
        curvatures = weight / norms

        def hessian(p):
            out = np.einsum(
                "tma,mt->at", atoms.conj(), np.einsum("tma,at->mt", atoms, p)
            )
            dots = np.real(np.sum(directions.conj() * p, axis=1))
            out += curvatures[:, None] * (p - directions * dots[:, None])
            out += (1e-12 * betas_mean) * p
            return out

        # Conjugate gradients on the (real) Newton system.
        step = np.zeros_like(block)
        residual = -grad
        direction = residual.copy()
        rho = _real_dot(residual, residual)
        target = max(rho * 1e-8, (opts.kkt_tolerance * scale) ** 2 * 1e-4)
        for _ in range(200):
            if rho <= target:
                break
            h_dir = hessian(direction)
            denom = _real_dot(direction, h_dir)
            if denom <= 0:
                break
            alpha = rho / denom
            step += alpha * direction
            residual -= alpha * h_dir
            rho_next = _real_dot(residual, residual)
            direction = residual + (rho_next / rho) * direction
            rho = rho_next
        if not np.any(step):
            break
        improved = False
        alpha = 1.0
        for _ in range(40):
            trial = block + alpha * step
            f_trial = objective(trial)
            if f_trial <= f_current:
                block, f_current, improved = trial, f_trial, True
                break
            alpha *= 0.5
        if not improved:
            break
    values = values.copy()
    values[active] = block
    return values


def l21_ls_direct(
    sketches: SketchSet,
    proj: ProjectionSet,
    dictionary: Dictionary,
    regularization: float | None = None,
    opts: DirectOptions | None = None,
) -> CoefficientMatrix:
    """Minimize the row-sparse least-squares cost over the coefficient matrix.

    The cost is 0.5 * sum_s ||x(s) - Psi(s) A c(s)||^2 plus
    rho * sqrt(T) times the sum of row norms of the coefficient matrix.
    Proximal gradient iterations with step 1/L (L the squared largest
    singular value over the per-sample operators) alternate a gradient step
    per column with the row-wise group shrinkage; optional momentum is kept
    monotone by falling back to a plain proximal step whenever the
    accelerated candidate would increase the objective.  Once the objective
    change stalls below the tolerance, exact row-coordinate sweeps polish
    the iterate: with a small regularization the objective is flat long
    before the row masses settle, and the polish closes that gap without
    losing monotonicity.

    Raises
    ------
    SolverError
        If the relative objective change has not fallen below the tolerance
        within the iteration budget; the objective trace is attached.
    """
    opts = opts or DirectOptions()
    rho = sketches.regularization if regularization is None else regularization
    if rho is None or rho <= 0:
        raise ValueError("regularization must be positive")
    t, m = sketches.num_samples, sketches.m
    if proj.num_samples != t or proj.m != m:
        raise ValueError("projections and sketches disagree on dimensions")
    if proj.n != dictionary.n:
        raise ValueError("projections and dictionary disagree on dimension")

    projected = np.stack([proj.project(s, dictionary.atoms) for s in range(t)], axis=0)
    x = sketches.sketches
    lipschitz = max(
        float(np.linalg.svd(projected[s], compute_uv=False)[0]) ** 2 for s in range(t)
    )
    tau = 1.0 / lipschitz
    weight = rho * np.sqrt(t)

    def gradient(values):
        residual = np.einsum("tmg,gt->mt", projected, values) - x
        return np.einsum("tmg,mt->gt", projected.conj(), residual)

    current = np.zeros((dictionary.size, t), dtype=complex)
    momentum = current
    t_k = 1.0
    f_current = l21_objective(current, projected, x, weight)
    trace = [f_current]

    for iteration in range(1, opts.max_iters + 1):
        if opts.accelerate:
            candidate = _group_shrink(momentum - tau * gradient(momentum), tau * weight)
            f_candidate = l21_objective(candidate, projected, x, weight)
            if f_candidate > f_current:
                # Momentum overshoot: restart from the last monotone iterate.
                candidate = _group_shrink(
                    current - tau * gradient(current), tau * weight
                )
                f_candidate = l21_objective(candidate, projected, x, weight)
                t_k = 1.0
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
            momentum = candidate + ((t_k - 1.0) / t_next) * (candidate - current)
            t_k = t_next
        else:
            candidate = _group_shrink(current - tau * gradient(current), tau * weight)
            f_candidate = l21_objective(candidate, projected, x, weight)
        change = abs(f_current - f_candidate)
        current, f_current = candidate, f_candidate
        trace.append(f_current)
        if change <= opts.tolerance * max(1.0, abs(f_current)):
            if opts.polish_max_sweeps > 0:
                # Exact row solves settle the support, Newton-CG settles the
                # masses; alternate until neither moves the iterate.
                current, _ = _row_polish(current.copy(), projected, x, weight, opts)
                for _ in range(5 if opts.newton_polish else 0):
                    current = _active_newton_polish(current, projected, x, weight, opts)
                    current, sweeps_used = _row_polish(current, projected, x, weight, opts)
                    if sweeps_used <= 1:
                        break
                f_current = l21_objective(current, projected, x, weight)
                trace.append(f_current)
            return CoefficientMatrix(
                values=current,
                objective=f_current,
                iterations=iteration,
                converged=True,
            )
    raise SolverError(
        f"direct solver did not converge within {opts.max_iters} iterations",
        objective_trace=tuple(trace),
    )


def coefficients_to_signals(
    coeffs: CoefficientMatrix, dictionary: Dictionary
) -> EstimateBatch:
    """Synthesize signal estimates from dictionary coefficients."""
    if coeffs.values.shape[0] != dictionary.size:
        raise ValueError("coefficient rows must match the dictionary size")
    return EstimateBatch(
        signals=dictionary.atoms @ coeffs.values, method_tag="l21-direct"
    )
