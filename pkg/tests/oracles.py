"""Independent reference implementations used only by the tests."""
import numpy as np


def jacobi_eig(A, tol=1e-14, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * np.linalg.norm(A):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                R = np.eye(n)
                R[p, p] = R[q, q] = c
                R[p, q], R[q, p] = s, -s
                A = R.T @ A @ R
    return np.sort(np.diag(A))


def jacobi_pencil_eig(A, B):
    """Generalized eigenvalues of (A, B) with B SPD, via B = L L^T."""
    L = np.linalg.cholesky(B)
    Li = np.linalg.inv(L)
    C = Li @ A @ Li.T
    return jacobi_eig(0.5 * (C + C.T))


def triangle_rule(n=8):
    """Collapsed Gauss-Legendre rule on the reference triangle (points, weights)."""
    t, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(t, t, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    x = u.ravel()
    y = (v * (1.0 - u)).ravel()
    return np.stack([x, y], axis=1), (wu * wv * (1.0 - u)).ravel()


def affine_triangle(verts):
    """Map from the reference triangle and the barycentric functions with gradients."""
    x0, x1, x2 = (np.asarray(v, dtype=float) for v in verts)
    J = np.stack([x1 - x0, x2 - x0], axis=1)
    det = abs(np.linalg.det(J))
    Jinv = np.linalg.inv(J)
    grads = np.vstack([-Jinv.sum(axis=0), Jinv])  # rows: grad lambda_i
    return J, det, grads
