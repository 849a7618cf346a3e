"""Pure-numpy kernels for TNC profit evaluation.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable.

Margins follow the per-trip form of the platform objective after the fleet
conservation law is substituted in: fare minus pickup and occupied
vehicle-hours priced at ``c_av``. Idle-vehicle cost is added by the caller.
"""

import numpy as np

_A, _P, _B1, _B2, _B3, _O = range(6)


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _costs_and_margins(base, la, di, dj, alpha, gamma, c_av, v_a, b, ri, rj, wi, wj):
    shape = np.broadcast_shapes(base.shape[:-1], np.shape(wi), np.shape(wj), np.shape(ri), np.shape(rj))
    c = np.array(np.broadcast_to(base, shape + base.shape[-1:]))
    c[..., _A] += alpha * wi + gamma * (b + ri * la)
    c[..., _B1] += alpha * wi + gamma * (b + ri * di)
    c[..., _B2] += alpha * wj + gamma * (b + rj * dj)
    c[..., _B3] += alpha * (wi + wj) + gamma * (2.0 * b + ri * di + rj * dj)
    k = c_av / v_a
    ma = b + (ri - k) * la - c_av * wi
    mb1 = b + (ri - k) * di - c_av * wi
    mb2 = b + (rj - k) * dj - c_av * wj
    mb3 = 2.0 * b + (ri - k) * di + (rj - k) * dj - c_av * (wi + wj)
    return c, ma, mb1, mb2, mb3


def tnc_objective(lam0, base, la, d, alpha, gamma, eps, c_av, v_a, b, r, w, origin_w, dest_w, want_grad=True):
    """Weighted platform margin sum over OD pairs and classes.

    Returns ``(value, g_b, g_r, g_w)``: the value and its partial derivatives
    with respect to the base fare, per-zone rates and per-zone AMoD waits.
    ``value = sum_ij origin_w[i] * dest_w[j] * sum_k lam0 * sum_t P_t m_t``.
    """
    ri, rj = r[:, None, None], r[None, :, None]
    wi, wj = w[:, None, None], w[None, :, None]
    di, dj = d[:, None, None], d[None, :, None]
    la3 = la[:, :, None]
    c, ma, mb1, mb2, mb3 = _costs_and_margins(base, la3, di, dj, alpha, gamma, c_av, v_a, b, ri, rj, wi, wj)
    p = _softmax(-eps * c)
    pa, pb1, pb2, pb3 = p[..., _A], p[..., _B1], p[..., _B2], p[..., _B3]
    s = pa * ma + pb1 * mb1 + pb2 * mb2 + pb3 * mb3
    wgt = lam0 * (origin_w[:, None, None] * dest_w[None, :, None])
    value = float(np.sum(wgt * s))
    if not want_grad:
        return value, None, None, None

    # derivative of sum_t P_t m_t w.r.t. a local variable u:
    #   D_m - eps * (D_mc - S * D_c)
    def local(dm_a, dm_b1, dm_b2, dm_b3, dc_scale):
        d_m = pa * dm_a + pb1 * dm_b1 + pb2 * dm_b2 + pb3 * dm_b3
        d_mc = pa * ma * dm_a + pb1 * mb1 * dm_b1 + pb2 * mb2 * dm_b2 + pb3 * mb3 * dm_b3
        return wgt * (d_m - eps * dc_scale * (d_mc - s * d_m))

    zero = 0.0
    g_b = local(1.0, 1.0, 1.0, 2.0, gamma)
    g_ri = local(la3, di, zero, di, gamma)
    g_rj = local(zero, zero, dj, dj, gamma)
    # for waits the cost slope is alpha and the margin slope is -c_av
    e_i = pa + pb1 + pb3
    em_i = pa * ma + pb1 * mb1 + pb3 * mb3
    e_j = pb2 + pb3
    em_j = pb2 * mb2 + pb3 * mb3
    g_wi = wgt * (-c_av * e_i - eps * alpha * (em_i - s * e_i))
    g_wj = wgt * (-c_av * e_j - eps * alpha * (em_j - s * e_j))

    g_r = g_ri.sum(axis=(1, 2)) + g_rj.sum(axis=(0, 2))
    g_w = g_wi.sum(axis=(1, 2)) + g_wj.sum(axis=(0, 2))
    return value, float(g_b.sum()), g_r, g_w


def origin_grid(lam0, base, la, d_orig, d_dest, alpha, gamma, eps, c_av, v_a, b, r_dest, w_dest, r_vals, w_vals):
    """Margin sums for a batch of origins over candidate (rate, wait) points.

    Shapes: ``lam0`` (nI, nJ, K), ``base`` (nI, nJ, K, 6), ``la`` (nI, nJ),
    ``r_vals``/``w_vals`` (nI, G). Origins must not be among the destinations.
    Returns (nI, G) values summed over destinations and classes.
    """
    ri = r_vals[:, :, None, None]
    wi = w_vals[:, :, None, None]
    di = d_orig[:, None, None, None]
    dj = d_dest[None, None, :, None]
    rj = r_dest[None, None, :, None]
    wj = w_dest[None, None, :, None]
    la4 = la[:, None, :, None]
    c, ma, mb1, mb2, mb3 = _costs_and_margins(
        base[:, None], la4, di, dj, alpha, gamma, c_av, v_a, b, ri, rj, wi, wj
    )
    p = _softmax(-eps * c)
    s = p[..., _A] * ma + p[..., _B1] * mb1 + p[..., _B2] * mb2 + p[..., _B3] * mb3
    return np.sum(lam0[:, None] * s, axis=(2, 3))
