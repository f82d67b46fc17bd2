"""Hot kernels for per-particle flow-map updates."""

import numpy as np

from .backend import njit, prange

# relative determinant threshold below which a neighborhood counts as
# rank deficient (collinear or too few neighbors)
RANK_TOL = 1e-20


@njit(cache=True, parallel=True)
def fit_jacobians(nbr_off, nbr_idx, x_init, x_now, T_prev, T_out, bad):
    """Least-squares backward Jacobians T = (sum ds dr^T)(sum dr dr^T)^-1.

    dr is the current-position offset to each neighbor, ds the offset at
    the flow-map start time. Rank-deficient neighborhoods keep T_prev and
    get flagged in bad.
    """
    nf = nbr_off.shape[0] - 1
    for i in prange(nf):
        c00 = 0.0; c01 = 0.0; c11 = 0.0
        m00 = 0.0; m01 = 0.0; m10 = 0.0; m11 = 0.0
        cnt = 0
        for t in range(nbr_off[i], nbr_off[i + 1]):
            j = nbr_idx[t]
            drx = x_now[j, 0] - x_now[i, 0]
            dry = x_now[j, 1] - x_now[i, 1]
            dsx = x_init[j, 0] - x_init[i, 0]
            dsy = x_init[j, 1] - x_init[i, 1]
            c00 += drx * drx
            c01 += drx * dry
            c11 += dry * dry
            m00 += dsx * drx
            m01 += dsx * dry
            m10 += dsy * drx
            m11 += dsy * dry
            cnt += 1
        det = c00 * c11 - c01 * c01
        tr = c00 + c11
        if cnt < 3 or det <= RANK_TOL * tr * tr:
            T_out[i, 0, 0] = T_prev[i, 0, 0]
            T_out[i, 0, 1] = T_prev[i, 0, 1]
            T_out[i, 1, 0] = T_prev[i, 1, 0]
            T_out[i, 1, 1] = T_prev[i, 1, 1]
            bad[i] = True
        else:
            i00 = c11 / det
            i01 = -c01 / det
            i11 = c00 / det
            T_out[i, 0, 0] = m00 * i00 + m01 * i01
            T_out[i, 0, 1] = m00 * i01 + m01 * i11
            T_out[i, 1, 0] = m10 * i00 + m11 * i01
            T_out[i, 1, 1] = m10 * i01 + m11 * i11
            bad[i] = False


@njit(cache=True, parallel=True)
def fit_velocity_gradients(nbr_off, nbr_idx, x_now, u, grad_out, bad):
    """Least-squares velocity gradients nabla u per particle (ODE T variant)."""
    nf = nbr_off.shape[0] - 1
    for i in prange(nf):
        c00 = 0.0; c01 = 0.0; c11 = 0.0
        m00 = 0.0; m01 = 0.0; m10 = 0.0; m11 = 0.0
        cnt = 0
        for t in range(nbr_off[i], nbr_off[i + 1]):
            j = nbr_idx[t]
            drx = x_now[j, 0] - x_now[i, 0]
            dry = x_now[j, 1] - x_now[i, 1]
            dux = u[j, 0] - u[i, 0]
            duy = u[j, 1] - u[i, 1]
            c00 += drx * drx
            c01 += drx * dry
            c11 += dry * dry
            m00 += dux * drx
            m01 += dux * dry
            m10 += duy * drx
            m11 += duy * dry
            cnt += 1
        det = c00 * c11 - c01 * c01
        tr = c00 + c11
        if cnt < 3 or det <= RANK_TOL * tr * tr:
            grad_out[i, 0, 0] = 0.0
            grad_out[i, 0, 1] = 0.0
            grad_out[i, 1, 0] = 0.0
            grad_out[i, 1, 1] = 0.0
            bad[i] = True
        else:
            i00 = c11 / det
            i01 = -c01 / det
            i11 = c00 / det
            # row 0 is nabla u_x, row 1 nabla u_y
            grad_out[i, 0, 0] = m00 * i00 + m01 * i01
            grad_out[i, 0, 1] = m00 * i01 + m01 * i11
            grad_out[i, 1, 0] = m10 * i00 + m11 * i01
            grad_out[i, 1, 1] = m10 * i01 + m11 * i11
            bad[i] = False
