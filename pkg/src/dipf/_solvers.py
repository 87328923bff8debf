"""Multigrid-preconditioned conjugate gradient for 5-point weighted Laplacians.

The operator is ``Id + Dx' Wx Dx + Dy' Wy Dy`` on an H x W grid with
Neumann borders, stored as three flat arrays: the diagonal, the coupling to
the right neighbour and the coupling to the neighbour below.

The preconditioner is one V-cycle of aggregation multigrid: 2x2 blocks are
merged into one coarse unknown, and the Galerkin coarse operator keeps the
same 5-point layout, so setup is a single pass per level. A forward
Gauss-Seidel sweep before the coarse correction and a backward sweep after
it keep the cycle symmetric, as CG requires. Everything runs
single-threaded in a fixed order, so results are bit-reproducible.
"""

import numba
import numpy as np

COARSEST_SIZE = 64
COARSEST_SWEEPS = 20


@numba.njit(cache=True)
def _residual(diag, cx, cy, b, x, r, h, w):
    """``r = b - A x``."""
    for i in range(h):
        for j in range(w):
            k = i * w + j
            s = diag[k] * x[k]
            if j + 1 < w:
                s -= cx[k] * x[k + 1]
            if j > 0:
                s -= cx[k - 1] * x[k - 1]
            if i + 1 < h:
                s -= cy[k] * x[k + w]
            if i > 0:
                s -= cy[k - w] * x[k - w]
            r[k] = b[k] - s


@numba.njit(cache=True)
def _gauss_seidel(inv, cx, cy, b, x, h, w, forward):
    n = h * w
    for t in range(n):
        k = t if forward else n - 1 - t
        j = t % w if forward else w - 1 - t % w
        s = b[k]
        if j + 1 < w:
            s += cx[k] * x[k + 1]
        if j > 0:
            s += cx[k - 1] * x[k - 1]
        if k + w < n:
            s += cy[k] * x[k + w]
        if k >= w:
            s += cy[k - w] * x[k - w]
        x[k] = s * inv[k]


@numba.njit(cache=True)
def _coarsen(diag, cx, cy, h, w):
    """Galerkin operator for piecewise-constant 2x2 aggregation."""
    hc = (h + 1) // 2
    wc = (w + 1) // 2
    dc = np.zeros(hc * wc)
    cxc = np.zeros(hc * wc)
    cyc = np.zeros(hc * wc)
    for i in range(h):
        for j in range(w):
            k = i * w + j
            a = (i // 2) * wc + j // 2
            dc[a] += diag[k]
            if j + 1 < w:
                if (j + 1) // 2 == j // 2:
                    dc[a] -= 2.0 * cx[k]
                else:
                    cxc[a] += cx[k]
            if i + 1 < h:
                if (i + 1) // 2 == i // 2:
                    dc[a] -= 2.0 * cy[k]
                else:
                    cyc[a] += cy[k]
    return dc, cxc, cyc, hc, wc


@numba.njit(cache=True)
def _restrict(r, h, w, rc, wc):
    rc[:] = 0.0
    for i in range(h):
        for j in range(w):
            rc[(i // 2) * wc + j // 2] += r[i * w + j]


@numba.njit(cache=True)
def _prolong_add(x, h, w, xc, wc):
    for i in range(h):
        for j in range(w):
            x[i * w + j] += xc[(i // 2) * wc + j // 2]


class _Multigrid:
    def __init__(self, diag, cx, cy, h, w):
        self.levels = [(diag, cx, cy, h, w)]
        while h * w > COARSEST_SIZE and h > 2 and w > 2:
            diag, cx, cy, h, w = _coarsen(diag, cx, cy, h, w)
            self.levels.append((diag, cx, cy, h, w))
        self.inverse = [1.0 / lev[0] for lev in self.levels]

    def vcycle(self, b, level=0):
        diag, cx, cy, h, w = self.levels[level]
        inv = self.inverse[level]
        x = np.zeros(h * w)
        if level == len(self.levels) - 1:
            for _ in range(COARSEST_SWEEPS):
                _gauss_seidel(inv, cx, cy, b, x, h, w, True)
                _gauss_seidel(inv, cx, cy, b, x, h, w, False)
            return x
        _gauss_seidel(inv, cx, cy, b, x, h, w, True)
        r = np.empty(h * w)
        _residual(diag, cx, cy, b, x, r, h, w)
        hc, wc = self.levels[level + 1][3:]
        rc = np.empty(hc * wc)
        _restrict(r, h, w, rc, wc)
        _prolong_add(x, h, w, self.vcycle(rc, level + 1), wc)
        _gauss_seidel(inv, cx, cy, b, x, h, w, False)
        return x


def laplacian_coefficients(weight):
    """Diagonal and neighbour couplings of ``Id + Dx' W Dx + Dy' W Dy``.

    ``weight[i, j]`` multiplies the forward differences leaving pixel (i, j).
    """
    weight = np.asarray(weight, dtype=np.float64)
    h, w = weight.shape
    cx = weight.copy()
    cx[:, -1] = 0.0
    cy = weight.copy()
    cy[-1, :] = 0.0
    cx = cx.ravel()
    cy = cy.ravel()
    diag = 1.0 + cx + cy
    diag[1:] += cx[:-1]
    diag[w:] += cy[:-w]
    return diag, cx, cy


def apply_operator(weight, x):
    weight = np.asarray(weight, dtype=np.float64)
    h, w = weight.shape
    diag, cx, cy = laplacian_coefficients(weight)
    out = np.empty(h * w)
    _residual(diag, cx, cy, np.zeros(h * w), np.ascontiguousarray(x, dtype=np.float64).ravel(), out, h, w)
    return -out.reshape(h, w)


def solve_weighted_laplacian(rhs, weight, x0=None, rtol=1e-6, maxiter=500):
    """Solve ``(Id + Dx' W Dx + Dy' W Dy) x = rhs`` by preconditioned CG.

    Stops once ``||r|| <= rtol * ||rhs||`` or after ``maxiter`` iterations.
    Returns ``(x, iterations, relative_residual)``.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    h, w = rhs.shape
    diag, cx, cy = laplacian_coefficients(weight)
    b = np.ascontiguousarray(rhs).ravel()
    x = b.copy() if x0 is None else np.array(x0, dtype=np.float64).ravel()
    bnorm = float(np.linalg.norm(b))
    r = np.empty_like(b)
    _residual(diag, cx, cy, b, x, r, h, w)
    rnorm = float(np.linalg.norm(r))
    if bnorm == 0.0 or rnorm <= rtol * bnorm:
        return x.reshape(h, w), 0, rnorm / max(bnorm, 1e-300)

    mg = _Multigrid(diag, cx, cy, h, w)
    zero = np.zeros_like(b)
    ap = np.empty_like(b)
    z = mg.vcycle(r)
    p = z.copy()
    rz = float(r @ z)
    it = 0
    while it < maxiter:
        it += 1
        _residual(diag, cx, cy, zero, p, ap, h, w)
        ap = -ap
        pap = float(p @ ap)
        if pap <= 0.0:
            raise ArithmeticError("conjugate gradient breakdown: operator not positive definite")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rnorm = float(np.linalg.norm(r))
        if rnorm <= rtol * bnorm:
            break
        z = mg.vcycle(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x.reshape(h, w), it, rnorm / bnorm
