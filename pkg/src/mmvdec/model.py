"""Signal model: grid dictionaries, diffuse covariances, sampling and sketching.

The model is a uniform linear array observed through per-sample projection
operators.  A signal sample is an n-vector h(s); its sketch is the noisy
m-dimensional projection x(s) = Psi(s) h(s) + z(s).  All sampling routines
take an explicit ``numpy.random.Generator`` and are pure functions of it.

Conventions fixed here and relied on everywhere else:

* complex Gaussians are circularly symmetric with E[z z^H] = variance * I
  (variance/2 per real and imaginary part);
* the diffuse covariance has unit diagonal, so SNR in dB maps to a noise
  variance of 10**(-snr_db / 10) per sketch component;
* grid labels are xi_i = 2 i / G - 1 for i = 1..G, which makes the size-n
  grid dictionary a Fourier matrix up to row phases and the size-2n grid its
  2x oversampled variant.
"""

from dataclasses import dataclass

import numpy as np

NORM_RTOL = 1e-12
HERMITIAN_ATOL = 1e-12
PSD_RTOL = 1e-10
ORTHONORMALITY_ATOL = 1e-12


@dataclass(frozen=True)
class Dictionary:
    """Labelled grid of array-response atoms.

    Attributes
    ----------
    atom_labels : (G,) float array
        Strictly increasing grid points in [-1, 1].
    atoms : (n, G) complex array
        Atom matrix; column i is the array response at ``atom_labels[i]``.
    atom_norm : float
        Common l2-norm of all columns (sqrt(n) for array responses).
    """

    atom_labels: np.ndarray
    atoms: np.ndarray
    atom_norm: float

    def __post_init__(self):
        labels = np.asarray(self.atom_labels, dtype=float)
        atoms = np.asarray(self.atoms, dtype=complex)
        if atoms.ndim != 2 or labels.ndim != 1 or atoms.shape[1] != labels.size:
            raise ValueError("atoms must be n x G with one label per column")
        if labels.size > 1 and not np.all(np.diff(labels) > 0):
            raise ValueError("atom labels must be strictly increasing")
        norms = np.linalg.norm(atoms, axis=0)
        if not np.allclose(norms, self.atom_norm, rtol=NORM_RTOL, atol=0.0):
            raise ValueError("all atoms must share the declared l2-norm")
        object.__setattr__(self, "atom_labels", labels)
        object.__setattr__(self, "atoms", atoms)

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def size(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True)
class CovarianceModel:
    """Hermitian PSD signal covariance together with its angular support."""

    sigma_h: np.ndarray
    angular_support: tuple[float, float]

    def __post_init__(self):
        sigma = np.asarray(self.sigma_h, dtype=complex)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("covariance must be square")
        if np.max(np.abs(sigma - sigma.conj().T)) >= HERMITIAN_ATOL * max(
            1.0, np.max(np.abs(sigma))
        ):
            raise ValueError("covariance must be Hermitian")
        eigs = np.linalg.eigvalsh(sigma)
        if eigs.size and eigs[0] < -PSD_RTOL * max(eigs[-1], 0.0):
            raise ValueError("covariance must be positive semidefinite")
        object.__setattr__(self, "sigma_h", sigma)

    @property
    def n(self) -> int:
        return self.sigma_h.shape[0]


@dataclass(frozen=True)
class SignalBatch:
    """n x T matrix of signal samples, one sample per column."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 2 or samples.shape[1] < 1:
            raise ValueError("samples must be an n x T matrix with T >= 1")
        if not np.all(np.isfinite(samples.view(float))):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class ProjectionSet:
    """Per-sample projection operators with Psi(s) Psi(s)^H = I_m.

    Each operator is either an index array of m distinct antenna positions
    (row-selection operator) or an explicit m x n complex matrix with
    orthonormal rows.
    """

    operators: tuple
    n: int

    def __post_init__(self):
        ops = []
        m = None
        for op in self.operators:
            arr = np.asarray(op)
            if np.issubdtype(arr.dtype, np.integer):
                if arr.ndim != 1:
                    raise ValueError("selection operator must be a 1-d index list")
                if np.unique(arr).size != arr.size:
                    raise ValueError("selection indices must be distinct")
                if arr.min(initial=0) < 0 or arr.max(initial=-1) >= self.n:
                    raise ValueError("selection indices out of range")
                ops.append(arr.astype(np.intp))
                rows = arr.size
            else:
                mat = np.asarray(arr, dtype=complex)
                if mat.ndim != 2 or mat.shape[1] != self.n:
                    raise ValueError("projection matrix must be m x n")
                gram = mat @ mat.conj().T
                if np.max(np.abs(gram - np.eye(mat.shape[0]))) >= ORTHONORMALITY_ATOL:
                    raise ValueError("projection rows must be orthonormal")
                ops.append(mat)
                rows = mat.shape[0]
            if m is None:
                m = rows
            elif rows != m:
                raise ValueError("all operators must have the same output dimension")
        if m is None:
            raise ValueError("at least one operator is required")
        object.__setattr__(self, "operators", tuple(ops))

    @property
    def m(self) -> int:
        op = self.operators[0]
        return op.size if np.issubdtype(op.dtype, np.integer) else op.shape[0]

    @property
    def num_samples(self) -> int:
        return len(self.operators)

    def project(self, s: int, arr: np.ndarray) -> np.ndarray:
        """Apply Psi(s) to a vector or to the rows of a matrix."""
        op = self.operators[s]
        if np.issubdtype(op.dtype, np.integer):
            return arr[op]
        return op @ arr

    def adjoint(self, s: int, arr: np.ndarray) -> np.ndarray:
        """Apply Psi(s)^H, scattering back into n-dimensional space."""
        op = self.operators[s]
        if np.issubdtype(op.dtype, np.integer):
            out = np.zeros((self.n,) + arr.shape[1:], dtype=complex)
            out[op] = arr
            return out
        return op.conj().T @ arr

    def matrix(self, s: int) -> np.ndarray:
        """Dense m x n matrix of operator s."""
        op = self.operators[s]
        if np.issubdtype(op.dtype, np.integer):
            dense = np.zeros((op.size, self.n), dtype=complex)
            dense[np.arange(op.size), op] = 1.0
            return dense
        return op.copy()


@dataclass(frozen=True)
class SketchSet:
    """m x T sketch matrix with its noise variance and regularization weight.

    ``regularization`` defaults to the noise variance when sketches are
    produced by :func:`sketch`; it must be positive whenever it is set, and
    the covariance solvers require it to be set.
    """

    sketches: np.ndarray
    noise_variance: float
    regularization: float | None = None

    def __post_init__(self):
        sk = np.asarray(self.sketches, dtype=complex)
        if sk.ndim != 2 or sk.shape[1] < 1:
            raise ValueError("sketches must be an m x T matrix")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")
        if self.regularization is not None and not self.regularization > 0:
            raise ValueError("regularization must be positive when set")
        object.__setattr__(self, "sketches", sk)

    @property
    def m(self) -> int:
        return self.sketches.shape[0]

    @property
    def num_samples(self) -> int:
        return self.sketches.shape[1]

    def with_regularization(self, regularization: float) -> "SketchSet":
        return SketchSet(self.sketches, self.noise_variance, regularization)


def array_response(xi: float, n: int) -> np.ndarray:
    """Array response of an n-element uniform linear array.

    Component p (1-based) is exp(j pi p xi); the l2-norm is sqrt(n).

    Parameters
    ----------
    xi : float
        Angle parameter sin(theta), must lie in [-1, 1].
    n : int
        Number of array elements.
    """
    if n < 1:
        raise ValueError("array size must be positive")
    if not -1.0 <= xi <= 1.0:
        raise ValueError(f"angle parameter {xi} outside [-1, 1]")
    p = np.arange(1, n + 1)
    return np.exp(1j * np.pi * p * xi)


def build_grid_dictionary(n: int, grid_size: int) -> Dictionary:
    """Uniform grid dictionary of array responses.

    Grid points are xi_i = 2 i / G - 1 for i = 1..G.  For G = n the atoms
    form the standard Fourier matrix up to row phases; G = 2n gives the
    2x oversampled variant.
    """
    if grid_size < 1:
        raise ValueError("grid size must be positive")
    labels = 2.0 * np.arange(1, grid_size + 1) / grid_size - 1.0
    atoms = np.exp(1j * np.pi * np.outer(np.arange(1, n + 1), labels))
    return Dictionary(atom_labels=labels, atoms=atoms, atom_norm=float(np.sqrt(n)))


def diffuse_covariance(n: int, angular_support: tuple[float, float]) -> CovarianceModel:
    """Covariance of a diffuse field uniform over an angular interval.

    Entry (p, q) is the normalized integral of exp(j pi (p - q) xi) over
    [a, b], evaluated in closed form.  The diagonal is exactly one; the full
    interval [-1, 1] yields the identity exactly.
    """
    a, b = float(angular_support[0]), float(angular_support[1])
    if not (-1.0 <= a < b <= 1.0):
        raise ValueError("angular support must be a nondegenerate interval in [-1, 1]")
    if b - a == 2.0:
        # Full band: the off-diagonal integrals vanish identically.
        sigma = np.eye(n, dtype=complex)
    else:
        delta = np.arange(n, dtype=float)
        col = np.empty(n, dtype=complex)
        col[0] = 1.0
        d = delta[1:]
        col[1:] = (np.exp(1j * np.pi * d * b) - np.exp(1j * np.pi * d * a)) / (
            1j * np.pi * d * (b - a)
        )
        idx = np.arange(n)
        diff = idx[:, None] - idx[None, :]
        sigma = np.where(diff >= 0, col[np.abs(diff)], col[np.abs(diff)].conj())
    return CovarianceModel(sigma_h=sigma, angular_support=(a, b))


def sample_signals(
    cov: CovarianceModel, num_samples: int, rng: np.random.Generator
) -> SignalBatch:
    """Draw i.i.d. circularly symmetric Gaussian samples with the given covariance.

    Samples are generated through the Hermitian PSD square root of the
    covariance, so a fixed generator state reproduces the batch bit for bit.
    """
    if num_samples < 1:
        raise ValueError("need at least one sample")
    eigvals, eigvecs = np.linalg.eigh(cov.sigma_h)
    if eigvals.size and eigvals[0] < -PSD_RTOL * max(eigvals[-1], 0.0):
        raise np.linalg.LinAlgError("covariance is indefinite")
    root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.conj().T
    n = cov.n
    white = rng.standard_normal((n, num_samples)) + 1j * rng.standard_normal(
        (n, num_samples)
    )
    return SignalBatch(samples=root @ (white / np.sqrt(2.0)))


def sample_selection_projections(
    n: int, m: int, num_samples: int, rng: np.random.Generator
) -> ProjectionSet:
    """Draw independent antenna-selection operators, one per sample.

    Each operator selects m distinct positions out of n uniformly at random
    (without replacement), which guarantees orthonormal rows.
    """
    if m > n:
        raise ValueError("cannot select more antennas than available")
    if m < 1:
        raise ValueError("selection size must be positive")
    ops = tuple(rng.choice(n, size=m, replace=False) for _ in range(num_samples))
    return ProjectionSet(operators=ops, n=n)


def sketch(
    signals: SignalBatch,
    proj: ProjectionSet,
    noise_variance: float,
    rng: np.random.Generator,
    regularization: float | None = None,
) -> SketchSet:
    """Project every signal sample and add white complex Gaussian noise.

    The sketch of sample s is Psi(s) h(s) + z(s) with per-component noise
    variance ``noise_variance``.  Unless overridden, the regularization
    weight of the returned set equals the noise variance (left unset when
    the noise variance is zero).
    """
    if proj.num_samples != signals.num_samples:
        raise ValueError("projection set and signal batch disagree on sample count")
    if proj.n != signals.n:
        raise ValueError("projection set and signal batch disagree on dimension")
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    m, t = proj.m, signals.num_samples
    noise = rng.standard_normal((m, t)) + 1j * rng.standard_normal((m, t))
    noise *= np.sqrt(noise_variance / 2.0)
    sketches = np.empty((m, t), dtype=complex)
    for s in range(t):
        sketches[:, s] = proj.project(s, signals.samples[:, s]) + noise[:, s]
    if regularization is None and noise_variance > 0:
        regularization = noise_variance
    return SketchSet(
        sketches=sketches,
        noise_variance=float(noise_variance),
        regularization=regularization,
    )
