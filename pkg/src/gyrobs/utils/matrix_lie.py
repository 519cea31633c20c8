"""Dense 3x3 matrix algebra on so(3) and SO(3).

All functions operate on float64 numpy arrays: vectors of shape ``(3,)`` and
matrices of shape ``(3, 3)``. The inner product and norm are the Frobenius
ones, ``<A, B> = tr(A^T B)``, for vectors and matrices alike.
"""

import numpy as np
from numpy.typing import ArrayLike, NDArray

Vector3 = NDArray[np.float64]
Matrix3 = NDArray[np.float64]
Rotation3 = NDArray[np.float64]  # Matrix3 with R^T R = I and det R = 1

SKEW_TOL = 1e-9
ROTATION_TOL = 1e-9
DET_TOL = 1e-12
POLAR_TOL = 1e-12
POLAR_MAX_ITER = 50


class LieAlgebraError(ValueError):
    """Invalid input to an so(3)/SO(3) operation."""

    pass


def as_vector3(v: ArrayLike) -> Vector3:
    """Coerce input to a finite float64 vector of shape (3,)."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (3,):
        raise LieAlgebraError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise LieAlgebraError("vector has non-finite entries")
    return arr


def as_matrix3(M: ArrayLike) -> Matrix3:
    """Coerce input to a finite float64 matrix of shape (3, 3)."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.shape != (3, 3):
        raise LieAlgebraError(f"expected a 3x3 matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise LieAlgebraError("matrix has non-finite entries")
    return arr


def hat(v: ArrayLike) -> Matrix3:
    """Map a vector to the skew-symmetric matrix with ``hat(v) @ w == cross(v, w)``.

    Examples:
        >>> hat([1.0, 2.0, 3.0])
        array([[ 0., -3.,  2.],
               [ 3.,  0., -1.],
               [-2.,  1.,  0.]])

    """
    x, y, z = np.asarray(v, dtype=np.float64)
    return np.array(
        [
            [0.0, -z, y],
            [z, 0.0, -x],
            [-y, x, 0.0],
        ]
    )


def is_skew(M: ArrayLike, tol: float = SKEW_TOL) -> bool:
    """Check whether ``M + M^T`` vanishes within ``tol`` (Frobenius)."""
    arr = np.asarray(M, dtype=np.float64)
    return bool(np.linalg.norm(arr + arr.T) <= tol)


def vee(M: ArrayLike, tol: float = SKEW_TOL) -> Vector3:
    """Inverse of :func:`hat`.

    Raises:
        LieAlgebraError: If ``M`` is not skew-symmetric within ``tol``

    """
    arr = np.asarray(M, dtype=np.float64)
    if arr.shape != (3, 3):
        raise LieAlgebraError(f"expected a 3x3 matrix, got shape {arr.shape}")
    if not is_skew(arr, tol):
        raise LieAlgebraError(
            f"not skew-symmetric: |M + M^T| = {np.linalg.norm(arr + arr.T):.3e}"
        )
    # Read the skew part so tiny symmetric residue does not leak in
    k = 0.5 * (arr - arr.T)
    return np.array([k[2, 1], k[0, 2], k[1, 0]])


def sym(M: ArrayLike) -> Matrix3:
    """Symmetric part ``(M + M^T) / 2``."""
    arr = np.asarray(M, dtype=np.float64)
    return 0.5 * (arr + arr.T)


def skew(M: ArrayLike) -> Matrix3:
    """Skew-symmetric part ``(M - M^T) / 2``."""
    arr = np.asarray(M, dtype=np.float64)
    return 0.5 * (arr - arr.T)


def sym_skew_split(M: ArrayLike) -> tuple[Matrix3, Matrix3]:
    """Split ``M`` into its orthogonal symmetric and skew-symmetric parts."""
    return sym(M), skew(M)


def frobenius_inner(A: ArrayLike, B: ArrayLike) -> float:
    """Euclidean inner product ``sum_ij A_ij B_ij = tr(A^T B)``."""
    a = np.asarray(A, dtype=np.float64)
    b = np.asarray(B, dtype=np.float64)
    return float(np.sum(a * b))


def frobenius_norm(A: ArrayLike) -> float:
    """Norm induced by :func:`frobenius_inner`."""
    return float(np.linalg.norm(np.asarray(A, dtype=np.float64)))


def exp_so3(v: ArrayLike) -> Rotation3:
    """Rotation ``exp(hat(v))`` by the closed-form Rodrigues formula."""
    vec = as_vector3(v)
    theta = float(np.linalg.norm(vec))
    K = hat(vec)
    if theta < 1e-4:
        theta2 = theta * theta
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * (K @ K)


def is_rotation(M: ArrayLike, tol: float = ROTATION_TOL) -> bool:
    """Check ``R^T R = I`` and ``det R = 1`` within ``tol``."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.shape != (3, 3) or not np.all(np.isfinite(arr)):
        return False
    orthogonal = np.linalg.norm(arr.T @ arr - np.eye(3)) <= tol
    return bool(orthogonal and abs(np.linalg.det(arr) - 1.0) <= tol)


def validate_rotation(M: ArrayLike, tol: float = ROTATION_TOL) -> Rotation3:
    """Return ``M`` as a rotation matrix, rejecting anything off SO(3).

    Raises:
        LieAlgebraError: If ``M`` violates ``R^T R = I`` or ``det R = 1``

    """
    arr = as_matrix3(M)
    if not is_rotation(arr, tol):
        drift = np.linalg.norm(arr.T @ arr - np.eye(3))
        raise LieAlgebraError(
            f"not a rotation: |R^T R - I| = {drift:.3e}, det = {np.linalg.det(arr):.6f}"
        )
    return arr


def polar_rotation_factors(
    Ms: ArrayLike,
    tol: float = POLAR_TOL,
    max_iter: int = POLAR_MAX_ITER,
) -> NDArray[np.float64]:
    """Rotation factors of a stack of matrices of shape ``(n, 3, 3)``.

    Runs the scaled Newton iteration ``X <- (g X + (g X)^-T) / 2`` with
    ``g = |det X|^(-1/3)`` until every matrix moves less than ``tol``. The
    orthogonal factor of a matrix with negative determinant is turned into a
    rotation by reflecting the axis of its smallest singular value, which
    matches ``U diag(1, 1, det(U V^T)) V^T`` from the SVD.

    Raises:
        LieAlgebraError: If some ``|det M| <= 1e-12`` or the iteration stalls

    """
    stack = np.asarray(Ms, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[1:] != (3, 3):
        raise LieAlgebraError(f"expected shape (n, 3, 3), got {stack.shape}")
    if not np.all(np.isfinite(stack)):
        raise LieAlgebraError("degenerate polar decomposition: non-finite input")

    dets = np.linalg.det(stack)
    if np.any(np.abs(dets) <= DET_TOL):
        worst = float(np.min(np.abs(dets)))
        raise LieAlgebraError(f"degenerate polar decomposition: |det M| = {worst:.3e}")

    X = stack.copy()
    for _ in range(max_iter):
        gamma = np.abs(np.linalg.det(X)) ** (-1.0 / 3.0)
        Y = gamma[:, None, None] * X
        X_next = 0.5 * (Y + np.linalg.inv(Y).transpose(0, 2, 1))
        delta = float(np.max(np.linalg.norm(X_next - X, axis=(1, 2))))
        X = X_next
        if delta <= tol:
            break
    else:
        raise LieAlgebraError(f"polar iteration did not converge in {max_iter} steps")

    negative = dets < 0.0
    if np.any(negative):
        Xn = X[negative]
        P = Xn.transpose(0, 2, 1) @ stack[negative]
        _, vecs = np.linalg.eigh(0.5 * (P + P.transpose(0, 2, 1)))
        v = vecs[:, :, 0]  # eigh sorts ascending
        reflect = np.eye(3) - 2.0 * np.einsum("ni,nj->nij", v, v)
        X[negative] = Xn @ reflect
    return X


def polar_rotation_factor(M: ArrayLike) -> Rotation3:
    """Rotation factor of the polar decomposition of ``M``.

    For ``det M > 0`` this is the rotation closest to ``M`` in the Frobenius
    norm. The result is idempotent: a rotation is its own factor.

    Raises:
        LieAlgebraError: If ``|det M| <= 1e-12`` ("degenerate polar decomposition")

    """
    return polar_rotation_factors(as_matrix3(M)[np.newaxis])[0]


def polar_rotation_factor_svd(M: ArrayLike) -> Rotation3:
    """SVD construction of the rotation factor, ``U diag(1, 1, d) V^T``."""
    U, _, Vt = np.linalg.svd(as_matrix3(M))
    d = np.sign(np.linalg.det(U @ Vt))
    return U @ np.diag([1.0, 1.0, d]) @ Vt


def lambda_min_sym(M: ArrayLike) -> float:
    """Smallest eigenvalue of the symmetric part of ``M``."""
    return float(np.linalg.eigvalsh(sym(M))[0])


def lambda_max_sym(M: ArrayLike) -> float:
    """Largest eigenvalue of the symmetric part of ``M``."""
    return float(np.linalg.eigvalsh(sym(M))[-1])


def _generator(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_rotations(n: int, seed: int | np.random.Generator) -> NDArray[np.float64]:
    """Draw ``n`` Haar-uniform rotations, shape ``(n, 3, 3)``.

    Each sample is the polar factor of a matrix with independent standard
    normal entries, negated when its determinant is negative.
    """
    rng = _generator(seed)
    gaussians = rng.standard_normal((n, 3, 3))
    # Resample the (measure-zero) near-singular draws
    bad = np.abs(np.linalg.det(gaussians)) <= DET_TOL
    while np.any(bad):
        gaussians[bad] = rng.standard_normal((int(bad.sum()), 3, 3))
        bad = np.abs(np.linalg.det(gaussians)) <= DET_TOL
    gaussians[np.linalg.det(gaussians) < 0] *= -1.0
    return polar_rotation_factors(gaussians)


def random_rotation(seed: int | np.random.Generator) -> Rotation3:
    """Draw one Haar-uniform rotation; deterministic for an integer seed."""
    return random_rotations(1, seed)[0]
