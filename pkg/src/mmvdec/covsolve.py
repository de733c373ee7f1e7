"""Coupled covariance-estimation phase.

Two coordinate-wise steepest-descent solvers estimate the nonnegative atom
strengths gamma parametrizing the covariance model A diag(gamma) A^H:

* :func:`solve_g` minimizes the convex cost

      g(gamma) = (1/T) sum_s x(s)^H Sigma_s(gamma)^{-1} x(s) + sum_i gamma_i,

  whose minimizer reproduces the row norms of the l2,1-regularized
  least-squares solution (see :mod:`mmvdec.verify`);

* :func:`solve_ml` minimizes the (nonconvex) Gaussian negative
  log-likelihood

      l(gamma) = (1/T) sum_s [ x(s)^H Sigma_s(gamma)^{-1} x(s)
                               + log det Sigma_s(gamma) ],

  converging to a stationary point, not necessarily the global minimum.

Here Sigma_s(gamma) = Psi(s) A diag(gamma) A^H Psi(s)^H + rho I_m.  Both
solvers sweep coordinates cyclically, solve each one-dimensional problem
exactly (bisection on the restricted derivative), and maintain the T cached
m x m inverses Sigma_s^{-1} through rank-1 updates, with periodic full
refactorizations to bound drift.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import Dictionary, ProjectionSet, SketchSet

DRIFT_TOLERANCE = 1e-8
_UPDATE_DENOM_FLOOR = 1e-12


class SolverError(RuntimeError):
    """Raised when a one-dimensional solve or a sweep loop fails to converge."""

    def __init__(self, message, coordinate=None, objective_trace=None):
        super().__init__(message)
        self.coordinate = coordinate
        self.objective_trace = objective_trace


@dataclass(frozen=True)
class SolveOptions:
    """Stopping and numerics knobs shared by both coordinate solvers."""

    max_sweeps: int = 200
    coordinate_tolerance: float = 1e-8
    bisection_tolerance: float = 1e-12
    bisection_max_iters: int = 200
    inverse_refresh_period: int = 50
    shuffle_seed: int | None = None  # None keeps the deterministic cyclic order
    # Visit only currently-active coordinates between full sweeps; 1 makes
    # every sweep full.  Convergence is always declared on a full sweep.
    full_sweep_period: int = 1
    # Terminal active-set Newton polish of the convex cost: cyclic sweeps
    # zigzag-stall on coherent atoms long before small strengths settle.
    final_polish: bool = True
    kkt_tolerance: float = 1e-11

    def __post_init__(self):
        if (
            self.max_sweeps < 1
            or self.coordinate_tolerance <= 0
            or self.bisection_tolerance <= 0
            or self.bisection_max_iters < 1
            or self.inverse_refresh_period < 1
            or self.full_sweep_period < 1
        ):
            raise ValueError("solver options must be positive")


@dataclass(frozen=True)
class SolveInfo:
    """Outcome metadata attached to a solver result."""

    sweeps: int
    converged: bool
    cost: float
    cost_history: tuple
    refreshes: int
    multiple_root_events: int = 0
    guarded_steps: int = 0
    newton_iterations: int = 0
    kkt_residual: float = np.nan


@dataclass(frozen=True)
class GammaVector:
    """Nonnegative atom-strength vector, optionally carrying solve metadata."""

    values: np.ndarray
    info: SolveInfo | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("gamma must be a vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("gamma must be finite")
        if np.any(values < 0):
            raise ValueError("gamma must be nonnegative")
        object.__setattr__(self, "values", values)


@dataclass
class SolverState:
    """Mutable per-solve caches: gamma, Sigma_s^{-1}, and projected atoms."""

    gamma: np.ndarray
    sigma_inv: np.ndarray  # (T, m, m), cached inverses of Sigma_s(gamma)
    projected_atoms: np.ndarray  # (T, m, G), column k of sample s is Psi(s) A[:, k]
    regularization: float
    cost: float
    accepted_since_refresh: int = 0
    refreshes: int = 0

    @classmethod
    def initialize(
        cls,
        sketches: SketchSet,
        proj: ProjectionSet,
        dictionary: Dictionary,
        regularization: float,
    ) -> "SolverState":
        """State at gamma = 0, where Sigma_s = rho I is trivially invertible."""
        if regularization <= 0:
            raise ValueError("regularization must be positive")
        t, m = sketches.num_samples, sketches.m
        if proj.num_samples != t or proj.m != m:
            raise ValueError("sketches and projections disagree on dimensions")
        if proj.n != dictionary.n:
            raise ValueError("projections and dictionary disagree on dimension")
        projected = np.stack(
            [proj.project(s, dictionary.atoms) for s in range(t)], axis=0
        )
        sigma_inv = np.broadcast_to(
            np.eye(m, dtype=complex) / regularization, (t, m, m)
        ).copy()
        return cls(
            gamma=np.zeros(dictionary.size),
            sigma_inv=sigma_inv,
            projected_atoms=projected,
            regularization=regularization,
            cost=np.nan,
        )


def _build_sigmas(state: SolverState) -> np.ndarray:
    """Dense Sigma_s(gamma) for every sample, built from the active atoms."""
    t, m, _ = state.projected_atoms.shape
    active = np.flatnonzero(state.gamma > 0)
    scaled = state.projected_atoms[:, :, active] * np.sqrt(state.gamma[active])
    sigmas = scaled @ scaled.conj().transpose(0, 2, 1)
    sigmas += state.regularization * np.eye(m)
    return sigmas


def _sigma_factors(state: SolverState, sigmas: np.ndarray | None = None) -> list:
    """Cholesky factor of every Sigma_s(gamma)."""
    if sigmas is None:
        sigmas = _build_sigmas(state)
    return [cho_factor(sigmas[s], lower=True) for s in range(sigmas.shape[0])]


def _stacked_inv_cholesky(sigmas: np.ndarray) -> np.ndarray:
    """Inverse Cholesky factors L^{-1} of a stack of Hermitian PD matrices."""
    return np.linalg.inv(np.linalg.cholesky(sigmas))


def _inverses_from_inv_cholesky(inv_chol: np.ndarray) -> np.ndarray:
    return inv_chol.conj().transpose(0, 2, 1) @ inv_chol


def _quadratic_terms(factors, sketches_t: np.ndarray) -> float:
    total = 0.0
    for s, factor in enumerate(factors):
        x = sketches_t[s]
        total += float(np.real(x.conj() @ cho_solve(factor, x)))
    return total


def eval_g(
    gamma: GammaVector,
    sketches: SketchSet,
    proj: ProjectionSet,
    dictionary: Dictionary,
) -> float:
    """Convex covariance-fitting cost: data term plus trace regularizer.

    Evaluated through Hermitian solves of the m x m systems Sigma_s(gamma),
    never through explicit inversion.
    """
    rho = sketches.regularization
    if rho is None or rho <= 0:
        raise ValueError("sketch set must carry a positive regularization")
    if gamma.values.size != dictionary.size:
        raise ValueError("gamma length must match the dictionary size")
    state = SolverState.initialize(sketches, proj, dictionary, rho)
    state.gamma = np.asarray(gamma.values, dtype=float)
    factors = _sigma_factors(state)
    quad = _quadratic_terms(factors, np.ascontiguousarray(sketches.sketches.T))
    return quad / sketches.num_samples + float(np.sum(state.gamma))


def eval_l(
    gamma: GammaVector,
    sketches: SketchSet,
    proj: ProjectionSet,
    dictionary: Dictionary,
    noise_variance: float,
) -> float:
    """Gaussian negative log-likelihood of gamma (up to constants).

    The log-determinants come from Cholesky factorizations; the noise
    variance plays the role of the regularization in Sigma_s.
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    if gamma.values.size != dictionary.size:
        raise ValueError("gamma length must match the dictionary size")
    state = SolverState.initialize(sketches, proj, dictionary, noise_variance)
    state.gamma = np.asarray(gamma.values, dtype=float)
    factors = _sigma_factors(state)
    xt = np.ascontiguousarray(sketches.sketches.T)
    quad = _quadratic_terms(factors, xt)
    logdet = sum(
        2.0 * float(np.sum(np.log(np.real(np.diag(f[0]))))) for f in factors
    )
    return (quad + logdet) / sketches.num_samples


def _coordinate_data(state: SolverState, sketches_t: np.ndarray, k: int):
    """Per-sample scalars for coordinate k.

    Returns (u, q, r) with u_s = Sigma_s^{-1} a_s(k), q_s = a_s(k)^H u_s and
    r_s = |a_s(k)^H Sigma_s^{-1} x(s)|^2, all from the cached inverses.
    """
    ak = state.projected_atoms[:, :, k]
    u = np.einsum("tij,tj->ti", state.sigma_inv, ak)
    q = np.einsum("ti,ti->t", ak.conj(), u).real
    b = np.einsum("ti,ti->t", u.conj(), sketches_t)
    np.clip(q, 0.0, None, out=q)  # a^H Sigma^{-1} a is nonnegative up to roundoff
    return u, q, np.abs(b) ** 2


def gk_derivative(d: float, k: int, state: SolverState, sketches: SketchSet) -> float:
    """Derivative of the convex cost restricted to gamma_k + d.

    Requires 1 + d q_s > 0 for every sample, i.e. the step keeps all
    Sigma_s positive definite.
    """
    xt = np.ascontiguousarray(sketches.sketches.T)
    _, q, r = _coordinate_data(state, xt, k)
    den = 1.0 + d * q
    if np.any(den <= 0):
        raise ValueError("step leaves the admissible region (1 + d q <= 0)")
    return 1.0 - float(np.mean(r / den**2))


def lk_derivative(d: float, k: int, state: SolverState, sketches: SketchSet) -> float:
    """Derivative of the likelihood cost restricted to gamma_k + d."""
    xt = np.ascontiguousarray(sketches.sketches.T)
    _, q, r = _coordinate_data(state, xt, k)
    den = 1.0 + d * q
    if np.any(den <= 0):
        raise ValueError("step leaves the admissible region (1 + d q <= 0)")
    return float(np.mean(q / den - r / den**2))


def _bisect(deriv, lo, hi, opts: SolveOptions, k: int):
    """Root of an increasing-crossing derivative on [lo, hi]."""
    for _ in range(opts.bisection_max_iters):
        mid = 0.5 * (lo + hi)
        if deriv(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= opts.bisection_tolerance * (1.0 + abs(hi)):
            return 0.5 * (lo + hi)
    raise SolverError(
        f"bisection did not converge for coordinate {k}", coordinate=k
    )


def _min_step_g(q, r, gamma_k, num_samples, opts: SolveOptions, k: int) -> float:
    """Exact minimizer of the convex restricted cost, as a step d.

    The derivative is increasing on (d_min, inf) with
    d_min = max(-1/max_s q_s, -gamma_k); when it has no root there the
    minimizer sits at the clamp d = -gamma_k.
    """
    qmax = q.max(initial=0.0)
    if qmax <= 0.0:
        return -gamma_k
    dmin1 = -1.0 / qmax

    def deriv(d):
        den = 1.0 + d * q
        with np.errstate(divide="ignore", over="ignore"):
            val = 1.0 - np.sum(r / den**2) / num_samples
        return val if np.isfinite(val) else -np.inf

    lo = max(dmin1, -gamma_k)
    if deriv(lo) >= 0.0:
        return -gamma_k
    hi = max(1.0, -dmin1)
    for _ in range(200):
        if deriv(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise SolverError(
            f"no positive-derivative bracket for coordinate {k}", coordinate=k
        )
    root = _bisect(deriv, lo, hi, opts, k)
    return max(root, -gamma_k)


def _min_step_l(q, r, gamma_k, opts: SolveOptions, k: int):
    """Largest root of the restricted likelihood derivative, clamped.

    The derivative tends to -inf at the left end of the admissible region
    and is positive for large steps, so at least one root exists; the
    largest one is located by expanding an upper bracket and scanning
    downward for the last sign change.  Returns (step, sign_changes).
    """
    qmax = q.max(initial=0.0)
    if qmax <= 0.0:
        return -gamma_k, 0
    dmin1 = -1.0 / qmax
    dmin = max(dmin1, -gamma_k)

    def deriv(d):
        den = 1.0 + d * q
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            val = np.sum(q / den - r / den**2)
        return val if np.isfinite(val) else -np.inf

    hi0 = max(1.0, -dmin1)
    hi = hi0
    while deriv(hi) <= 0.0:
        hi *= 2.0
        if hi > hi0 * 2.0**60:
            raise SolverError(
                f"upper bracket expansion exceeded 2^60 for coordinate {k}",
                coordinate=k,
            )

    span = hi - dmin
    prev_d, prev_positive = hi, True
    bracket = None
    sign_changes = 0
    step = span
    for _ in range(200):
        step *= 0.5
        d = dmin + step
        if d >= prev_d:
            break
        positive = deriv(d) > 0.0
        if positive != prev_positive:
            sign_changes += 1
            if bracket is None and not positive:
                bracket = (d, prev_d)
        prev_d, prev_positive = d, positive
        if step <= opts.bisection_tolerance * (1.0 + abs(dmin)):
            break
    if bracket is None:
        # Derivative positive on the whole admissible region: the restricted
        # cost is increasing there, so shrink the coordinate to zero.
        return -gamma_k, sign_changes
    root = _bisect(deriv, bracket[0], bracket[1], opts, k)
    return max(root, -gamma_k), sign_changes


def coordinate_min_g(
    k: int, state: SolverState, sketches: SketchSet, opts: SolveOptions
) -> float:
    """Optimal step for coordinate k of the convex cost."""
    xt = np.ascontiguousarray(sketches.sketches.T)
    _, q, r = _coordinate_data(state, xt, k)
    return _min_step_g(q, r, state.gamma[k], sketches.num_samples, opts, k)


def coordinate_min_l(
    k: int, state: SolverState, sketches: SketchSet, opts: SolveOptions
) -> float:
    """Largest-root step for coordinate k of the likelihood cost."""
    xt = np.ascontiguousarray(sketches.sketches.T)
    _, q, r = _coordinate_data(state, xt, k)
    step, _ = _min_step_l(q, r, state.gamma[k], opts, k)
    return step


def rank_one_inverse_update(
    sigma_inv: np.ndarray, a: np.ndarray, d: float
) -> np.ndarray:
    """Inverse of Sigma + d a a^H given Sigma^{-1} (Sherman-Morrison)."""
    u = sigma_inv @ a
    den = 1.0 + d * float(np.real(a.conj() @ u))
    if den <= 0:
        raise np.linalg.LinAlgError("rank-1 update leaves the PD cone")
    return sigma_inv - (d / den) * np.outer(u, u.conj())


def _apply_rank_one(state: SolverState, u: np.ndarray, q: np.ndarray, d: float) -> bool:
    """Update all cached inverses for a step d on one coordinate.

    Returns False when some update denominator is too close to zero to be
    trusted, in which case the caller should refactorize instead.
    """
    den = 1.0 + d * q
    if den.min(initial=np.inf) < _UPDATE_DENOM_FLOOR:
        return False
    scaled = u * (d / den)[:, None]
    state.sigma_inv -= scaled[:, :, None] * u.conj()[:, None, :]
    return True


def _refresh(state: SolverState) -> None:
    """Refactorize every Sigma_s and rebuild the cached inverses."""
    inv_chol = _stacked_inv_cholesky(_build_sigmas(state))
    state.sigma_inv = _inverses_from_inv_cholesky(inv_chol)
    state.accepted_since_refresh = 0
    state.refreshes += 1


def _exact_cost(state: SolverState, sketches_t: np.ndarray, with_logdet: bool):
    """Exact objective from fresh factorizations; refreshes drifted inverses."""
    sigmas = _build_sigmas(state)
    t, m, _ = state.sigma_inv.shape
    chol = np.linalg.cholesky(sigmas)
    inv_chol = np.linalg.inv(chol)
    whitened = np.einsum("tij,tj->ti", inv_chol, sketches_t)
    cost = float(np.sum(np.abs(whitened) ** 2)) / t
    if with_logdet:
        diag = np.real(np.diagonal(chol, axis1=1, axis2=2))
        cost += 2.0 * float(np.sum(np.log(diag))) / t
    else:
        cost += float(np.sum(state.gamma))
    residual = sigmas @ state.sigma_inv
    residual -= np.eye(m)
    if float(np.max(np.abs(residual))) > DRIFT_TOLERANCE:
        state.sigma_inv = _inverses_from_inv_cholesky(inv_chol)
        state.accepted_since_refresh = 0
        state.refreshes += 1
    return cost


def _delta_l(d, q, r, num_samples):
    den = 1.0 + d * q
    return float(np.sum(np.log(den) - d * r / den)) / num_samples


def _cost_g(state: SolverState, sketches_t: np.ndarray) -> float:
    inv_chol = _stacked_inv_cholesky(_build_sigmas(state))
    whitened = np.einsum("tij,tj->ti", inv_chol, sketches_t)
    quad = float(np.sum(np.abs(whitened) ** 2))
    return quad / sketches_t.shape[0] + float(np.sum(state.gamma))


def _g_gradient_terms(state: SolverState, sketches_t: np.ndarray, active=None):
    """Gradient of the convex cost over all atoms, plus an active-set Hessian.

    With w_s = Sigma_s^{-1} x(s) and h_i = a_s(i)^H w_s, the gradient is
    1 - mean_s |h_i|^2 and the Hessian over active atoms (i, j) is
    2 mean_s Re[conj(h_i) (a_s(i)^H Sigma_s^{-1} a_s(j)) h_j].
    """
    t = sketches_t.shape[0]
    sigma_inv = _inverses_from_inv_cholesky(
        _stacked_inv_cholesky(_build_sigmas(state))
    )
    w = np.einsum("tij,tj->ti", sigma_inv, sketches_t)
    h_all = np.einsum("tmi,tm->ti", state.projected_atoms.conj(), w)
    grad = 1.0 - np.sum(np.abs(h_all) ** 2, axis=0) / t
    hessian = None
    if active is not None:
        b_act = state.projected_atoms[:, :, active]
        u = sigma_inv @ b_act
        m_act = np.einsum("tma,tmb->tab", b_act.conj(), u)
        h_act = h_all[:, active]
        hessian = (2.0 / t) * np.real(
            np.einsum("ta,tb,tab->ab", h_act.conj(), h_act, m_act)
        )
    return grad, hessian


def _newton_polish(
    state: SolverState, sketches_t: np.ndarray, opts: SolveOptions
) -> tuple[int, float]:
    """Active-set projected Newton refinement of the convex cost.

    Returns (newton iterations, final KKT residual).  Each step solves the
    damped Newton system on the currently positive coordinates plus any
    gradient-violating zero coordinates, backtracks to keep both feasibility
    and descent, and stops when the scaled KKT residual is below tolerance.
    """
    cost = _cost_g(state, sketches_t)
    iterations = 0
    residual = np.inf
    for _ in range(40):
        gamma = state.gamma
        positive = gamma > 0
        grad, _ = _g_gradient_terms(state, sketches_t)
        violating = (~positive) & (grad < -opts.kkt_tolerance)
        residual = max(
            float(np.max(np.abs(grad[positive]), initial=0.0)),
            float(np.max(-grad[~positive], initial=0.0)),
        )
        if residual <= opts.kkt_tolerance:
            break
        active = np.flatnonzero(positive | violating)
        if active.size == 0:
            break
        _, hessian = _g_gradient_terms(state, sketches_t, active)
        damping = 1e-13 * max(np.trace(hessian) / active.size, 1.0)
        hessian[np.diag_indices_from(hessian)] += damping
        try:
            step = np.linalg.solve(hessian, -grad[active])
        except np.linalg.LinAlgError:
            break
        # Largest feasible step, then backtrack on the exact cost.
        alpha = 1.0
        negative = step < 0
        if np.any(negative):
            alpha = min(
                1.0, float(np.min(-gamma[active][negative] / step[negative]))
            )
        improved = False
        trial = gamma
        for _ in range(30):
            trial = gamma.copy()
            trial[active] = np.clip(gamma[active] + alpha * step, 0.0, None)
            state.gamma = trial
            trial_cost = _cost_g(state, sketches_t)
            if trial_cost <= cost + 1e-15 * max(1.0, abs(cost)):
                cost = trial_cost
                improved = True
                break
            alpha *= 0.5
        if not improved:
            state.gamma = gamma
            break
        iterations += 1
    _refresh(state)
    state.cost = cost
    return iterations, residual


def _sweep(
    sketches: SketchSet,
    proj: ProjectionSet,
    dictionary: Dictionary,
    regularization: float,
    opts: SolveOptions,
    likelihood: bool,
) -> GammaVector:
    state = SolverState.initialize(sketches, proj, dictionary, regularization)
    xt = np.ascontiguousarray(sketches.sketches.T)
    t = sketches.num_samples
    num_atoms = dictionary.size
    order_rng = (
        np.random.default_rng(opts.shuffle_seed)
        if opts.shuffle_seed is not None
        else None
    )

    state.cost = _exact_cost(state, xt, with_logdet=likelihood)
    history = [state.cost]
    converged = False
    sweeps = 0
    multiple_root_events = 0
    guarded_steps = 0
    # Whitened sketches Sigma_s^{-1} x(s), kept in lockstep with sigma_inv;
    # they make the no-move test for zero coordinates an O(T m) check.
    whitened = np.einsum("tij,tj->ti", state.sigma_inv, xt)

    for sweep in range(opts.max_sweeps):
        sweeps = sweep + 1
        max_delta = 0.0
        full_sweep = sweep % opts.full_sweep_period == 0
        if full_sweep:
            order = np.arange(num_atoms)
        else:
            order = np.flatnonzero(state.gamma > 0)
            if order.size == 0:
                continue
        if order_rng is not None:
            order_rng.shuffle(order)
        for k in order:
            atom = state.projected_atoms[:, :, k]
            gamma_k = state.gamma[k]
            b = np.einsum("tm,tm->t", atom.conj(), whitened)
            r = np.abs(b) ** 2
            if not likelihood and gamma_k == 0.0 and np.mean(r) <= 1.0:
                continue  # restricted derivative at zero is nonnegative
            u = (state.sigma_inv @ atom[:, :, None])[:, :, 0]
            q = np.einsum("tm,tm->t", atom.conj(), u).real
            np.clip(q, 0.0, None, out=q)
            if likelihood:
                d, changes = _min_step_l(q, r, gamma_k, opts, k)
                if changes > 1:
                    multiple_root_events += 1
                if d != 0.0 and _delta_l(d, q, r, t) > 0.0:
                    # The largest-root rule can climb in rare multi-root
                    # cases; fall back to the best descent candidate.
                    clamp = -gamma_k
                    candidates = [(0.0, 0.0), (_delta_l(clamp, q, r, t), clamp)]
                    d = min(candidates)[1]
                    guarded_steps += 1
            else:
                d = _min_step_g(q, r, gamma_k, t, opts, k)
            new_gamma = max(gamma_k + d, 0.0)
            d = new_gamma - gamma_k
            if d == 0.0:
                continue
            if not _apply_rank_one(state, u, q, d):
                state.gamma[k] = new_gamma
                _refresh(state)
                whitened = np.einsum("tij,tj->ti", state.sigma_inv, xt)
            else:
                state.gamma[k] = new_gamma
                whitened -= u * ((d / (1.0 + d * q)) * b)[:, None]
                state.accepted_since_refresh += 1
                if state.accepted_since_refresh >= opts.inverse_refresh_period:
                    _refresh(state)
                    whitened = np.einsum("tij,tj->ti", state.sigma_inv, xt)
            max_delta = max(max_delta, abs(d))
        if full_sweep:
            # Exact objective (and cached-inverse drift check) at full-sweep
            # cadence; the recorded history is a descent certificate.
            refreshes_before = state.refreshes
            state.cost = _exact_cost(state, xt, with_logdet=likelihood)
            if state.refreshes != refreshes_before:
                whitened = np.einsum("tij,tj->ti", state.sigma_inv, xt)
            history.append(state.cost)
            if max_delta < opts.coordinate_tolerance:
                converged = True
                break

    if sweeps and (sweeps - 1) % opts.full_sweep_period != 0:
        # Budget ran out on an active-only sweep; settle the exact cost.
        state.cost = _exact_cost(state, xt, with_logdet=likelihood)
        history.append(state.cost)

    newton_iterations = 0
    kkt_residual = np.nan
    if not likelihood and opts.final_polish:
        newton_iterations, kkt_residual = _newton_polish(state, xt, opts)
        history.append(state.cost)

    info = SolveInfo(
        sweeps=sweeps,
        converged=converged,
        cost=state.cost,
        cost_history=tuple(history),
        refreshes=state.refreshes,
        multiple_root_events=multiple_root_events,
        guarded_steps=guarded_steps,
        newton_iterations=newton_iterations,
        kkt_residual=kkt_residual,
    )
    return GammaVector(values=state.gamma, info=info)


def solve_g(
    sketches: SketchSet,
    proj: ProjectionSet,
    dictionary: Dictionary,
    opts: SolveOptions | None = None,
) -> GammaVector:
    """Minimize the convex covariance-fitting cost by coordinate descent.

    Starts from gamma = 0 and sweeps coordinates cyclically, applying the
    exact one-dimensional minimizer and a rank-1 update of every cached
    inverse; stops when the largest per-sweep coordinate change falls below
    the configured tolerance.  The objective is monotone non-increasing
    across accepted steps.
    """
    rho = sketches.regularization
    if rho is None or rho <= 0:
        raise ValueError("sketch set must carry a positive regularization")
    return _sweep(sketches, proj, dictionary, rho, opts or SolveOptions(), False)


def solve_ml(
    sketches: SketchSet,
    proj: ProjectionSet,
    dictionary: Dictionary,
    noise_variance: float,
    opts: SolveOptions | None = None,
) -> GammaVector:
    """Minimize the Gaussian likelihood cost by coordinate descent.

    Same sweep structure as :func:`solve_g` with the largest-root coordinate
    rule.  Converges to a stationary point; global optimality is not
    guaranteed.
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    return _sweep(
        sketches, proj, dictionary, noise_variance, opts or SolveOptions(), True
    )
