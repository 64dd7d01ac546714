"""Pure-numpy fallback kernels for the equilibrium-layer sweeps."""

import numpy as np

ACT_RELU = 0
ACT_TANH = 1


def equilibrium_sweep(D11, bw, act):
    """Row-by-row solve of w = sigma(D11 w + bw) for strictly lower-triangular D11.

    `bw` has shape (batch, q); rows are independent samples.
    """
    B, q = bw.shape
    w = np.empty_like(bw)
    for i in range(q):
        acc = bw[:, i] + w[:, :i] @ D11[i, :i]
        if act == ACT_TANH:
            w[:, i] = np.tanh(acc)
        else:
            w[:, i] = np.maximum(acc, 0.0)
    return w


def sweep_backward(D11, lam, g):
    """Adjoint of the sweep: solves (I - D11^T Lambda) t = g per sample.

    `lam` holds the activation slopes at the solution, shape (batch, q) like
    `g`. The system is unit upper-triangular, solved by back-substitution.
    """
    B, q = g.shape
    t = np.empty_like(g)
    for i in range(q - 1, -1, -1):
        t[:, i] = g[:, i] + (lam[:, i + 1 :] * t[:, i + 1 :]) @ D11[i + 1 :, i]
    return t
