"""Pure-numpy element kernels (fallback backend).

Element gradients are formed from nodal differences, so a constant nodal
vector yields an exactly zero gradient on every element.
"""

import numpy as np


def _element_gradients(conn, bgrads, u):
    """Per-element gradient of the P1 interpolant, shape (ne, dim)."""
    ue = u[conn]
    du = ue[:, 1:] - ue[:, :1]
    return np.einsum("ei,eid->ed", du, bgrads)


def p_energy_raw(conn, bgrads, meas, u, p):
    """Sum over elements of measure * |grad u|^p."""
    g = _element_gradients(conn, bgrads, u)
    g2 = np.einsum("ed,ed->e", g, g)
    return float(np.dot(meas, g2 ** (0.5 * p)))


def p2_gradient(conn, bgrads, meas, u, p, eps, alpha_p, alpha_2, out):
    """Accumulate the weighted-gradient scatter into ``out``.

    Adds, for every element e and local vertex i,
        (alpha_p * w_e + alpha_2) * measure_e * (grad u . grad phi_i)
    where w_e = (|grad u|^2 + eps^2)^((p-2)/2), defined as 0 when the base
    vanishes (continuous extension of |grad u|^{p-2} grad u for p > 1).
    """
    ne, nv = conn.shape
    g = _element_gradients(conn, bgrads, u)
    g2 = np.einsum("ed,ed->e", g, g)
    base = g2 + eps * eps
    w = np.zeros_like(base)
    nz = base > 0.0
    w[nz] = base[nz] ** (0.5 * (p - 2.0))
    coef = (alpha_p * w + alpha_2) * meas
    s = np.einsum("ed,eid->ei", g, bgrads)
    vals = np.empty((ne, nv))
    vals[:, 1:] = s
    vals[:, 0] = -np.sum(s, axis=1)
    out += np.bincount(conn.ravel(), weights=(coef[:, None] * vals).ravel(),
                       minlength=out.shape[0])
