"""Direct parameterizations of robustly-stable discrete-time LTI systems.

Free, unconstrained parameter vectors are mapped to explicit state-space
realizations that satisfy a contraction or incremental-gain linear matrix
inequality by construction. The map is surjective onto the model class and
accepts every finite parameter value, so gradient-based training never needs
a projection step.

All constructors accept either plain float64 ndarrays or autodiff Tensors,
so the same code path is used for fast inference and for training.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import value
from .errors import DimensionError, IllConditionedError, ParameterError

COND_LIMIT = 1e12
DEFAULT_EPS = 1e-4
DEFAULT_EPS_R = 0.01


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass
class ContractionFreeParams:
    """Free variables of the contracting parameterization.

    `X, Y, B1c, C1` shape the stability certificate; the remaining matrices
    and the stacked bias `b` (length n+q+p) pass through unconstrained.
    `Xbar`/`delta` optionally replace the dense Gram term X^T X with a
    low-rank-plus-diagonal term.
    """

    X: object
    Y: object
    B1c: object
    C1: object
    eps: float
    B2: object
    D12: object
    C2: object
    D21: object
    D22: object
    b: object
    Xbar: Optional[object] = None
    delta: Optional[object] = None

    @property
    def dims(self):
        n = value(self.Y).shape[0]
        l = value(self.B1c).shape[1]
        q = value(self.C1).shape[0]
        m = value(self.B2).shape[1]
        p = value(self.C2).shape[0]
        return n, m, p, q, l


@dataclass
class LipschitzFreeParams:
    """Free variables of the incremental-gain-bounded parameterization.

    Extends the contracting set with `B2c, C2` and two Cayley parameter
    pairs that realize the semi-orthogonal factors of D12 and D21.
    """

    X: object
    Y: object
    B1c: object
    C1: object
    B2c: object
    C2: object
    X12: object
    Y12: object
    X21: object
    Y21: object
    gamma: float
    eps: float
    eps_R: float
    b: object
    m: int = 0
    p: int = 0
    Xbar: Optional[object] = None
    delta: Optional[object] = None

    @property
    def dims(self):
        n = value(self.Y).shape[0]
        l = value(self.B1c).shape[1]
        q = value(self.C1).shape[0]
        return n, self.m, self.p, q, l


@dataclass
class ExplicitLTI:
    """Explicit state-space realization with its stability certificate.

    The direct feedthrough from the network channel w to v is structurally
    absent. `E` and `P` certify the dissipation inequality used by the
    verification module.
    """

    A: object
    B1: object
    B2: object
    C1: object
    C2: object
    D12: object
    D21: object
    D22: object
    bx: object
    bv: object
    by: object
    E: object
    P: object

    @property
    def dims(self):
        n = value(self.A).shape[0]
        l = value(self.B1).shape[1]
        m = value(self.B2).shape[1]
        q = value(self.C1).shape[0]
        p = value(self.C2).shape[0]
        return n, m, p, q, l

    def detach(self):
        """Copy with all fields as plain ndarrays."""
        return ExplicitLTI(
            **{k: value(getattr(self, k)).copy() for k in self.__dataclass_fields__}
        )


@dataclass
class LMISpec:
    """Target incremental quadratic constraint for an LTI system.

    `kind` is "contraction" or "lipschitz"; the (barQ, barS, barR) triple
    must satisfy barQ < 0 and barR + barS barQ^-1 barS^T > 0.
    """

    kind: str
    barQ: np.ndarray
    barS: np.ndarray
    barR: np.ndarray
    gamma: float = field(default=float("nan"))

    def is_valid(self, tol=1e-10):
        q_neg = np.max(np.linalg.eigvalsh(_symmetrize(self.barQ))) < tol
        schur = self.barR + self.barS @ np.linalg.solve(self.barQ, self.barS.T)
        r_pos = np.min(np.linalg.eigvalsh(_symmetrize(schur))) > -tol
        return bool(q_neg and r_pos)


def contraction_spec(q: int, l: int) -> LMISpec:
    """IQC triple for the internal w -> v channel: barQ=-I, barS=0, barR=I."""
    return LMISpec("contraction", -np.eye(q), np.zeros((l, q)), np.eye(l))


def lipschitz_spec(gamma: float, q: int, l: int, m: int, p: int) -> LMISpec:
    """IQC triple certifying both the internal channel and a gain bound.

    Outputs are stacked (v, y), inputs (w, u): barQ = diag(-I, -I/gamma),
    barS = 0, barR = diag(I, gamma I).
    """
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    barQ = _blockdiag(-np.eye(q), -np.eye(p) / gamma)
    barR = _blockdiag(np.eye(l), gamma * np.eye(m))
    return LMISpec("lipschitz", barQ, np.zeros((l + m, q + p)), barR, gamma=gamma)


class LMIResidual(NamedTuple):
    """Result of re-checking the stability LMI on an explicit system."""

    matrix: Optional[np.ndarray]
    eigmin: float
    r_posdef: bool
    r_eigmin: float


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _symmetrize(M):
    return 0.5 * (M + M.T)


def _blockdiag(a, b):
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0] :, a.shape[1] :] = b
    return out


def _block2x2(a11, a12, a21, a22):
    """Assemble [[a11, a12], [a21, a22]], Tensor-aware."""
    top = ad.concat([a11, a12], axis=1)
    bot = ad.concat([a21, a22], axis=1)
    return ad.concat([top, bot], axis=0)


def _check_shape(name, mat, shape):
    got = value(mat).shape
    if got != shape:
        raise DimensionError(f"{name} has shape {got}, expected {shape}")


def _check_condition(E):
    c = np.linalg.cond(value(E))
    if not np.isfinite(c) or c > COND_LIMIT:
        raise IllConditionedError(f"E condition number estimate {c:.3e} exceeds {COND_LIMIT:.0e}")


def _gram_term(X, Xbar, delta, two_n):
    """X^T X, or the low-rank surrogate when (Xbar, delta) are given."""
    if Xbar is not None:
        return low_rank_H_term(Xbar, delta)
    _check_shape("X", X, (two_n, two_n))
    return ad.matmul(ad.transpose(X), X)


def _split_bias(b, n, q, p):
    if value(b).shape != (n + q + p,):
        raise DimensionError(f"bias has shape {value(b).shape}, expected ({n + q + p},)")
    return b[:n], b[n : n + q], b[n + q :]


def _partition_H(H, n, Y, eps_name="eps"):
    """E, A, P from the assembled 2n x 2n matrix H (shared by both modes)."""
    H11 = H[:n, :n]
    H21 = H[n:, :n]
    H22 = H[n:, n:]
    E = 0.5 * (H11 + H22 + Y - Y.T)
    _check_condition(E)
    Einv = ad.inv(E)
    A = ad.matmul(Einv, H21)
    return E, Einv, A, H22


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def cayley(Xf, Yf, rows: int, cols: int):
    """Semi-orthogonal matrix from unconstrained parameters.

    For rows >= cols, builds Z = Xf - Xf^T + Yf^T Yf and returns

        D = [(I + Z)^-1 (I - Z);  -2 Yf (I + Z)^-1]

    which satisfies D^T D = I. For rows < cols the transpose construction is
    used, giving D D^T = I. `I + Z` is always invertible in exact arithmetic
    since Z + Z^T = 2 Yf^T Yf >= 0; a condition estimate guards round-off.
    """
    if rows < cols:
        return ad.transpose(cayley(Xf, Yf, cols, rows))
    if cols == 0:
        return np.zeros((rows, 0))
    _check_shape("Xf", Xf, (cols, cols))
    if rows > cols:
        _check_shape("Yf", Yf, (rows - cols, cols))
    Z = Xf - ad.transpose(Xf)
    if rows > cols:
        Z = Z + ad.matmul(ad.transpose(Yf), Yf)
    eye = np.eye(cols)
    M = eye + Z
    c = np.linalg.cond(value(M))
    if not np.isfinite(c) or c > COND_LIMIT:
        raise IllConditionedError(f"I + Z condition number estimate {c:.3e}")
    Minv = ad.inv(M)
    top = ad.matmul(Minv, eye - Z)
    if rows == cols:
        return top
    bottom = ad.matmul(-2.0 * (Yf if ad.is_tensor(Yf) else np.asarray(Yf, float)), Minv)
    return ad.concat([top, bottom], axis=0)


def low_rank_H_term(Xbar, delta):
    """Low-rank-plus-diagonal surrogate for the dense Gram term.

    `Xbar` is nu x 2n, `delta` a raw 2n-vector mapped through exp to keep
    the diagonal strictly positive. The result is positive definite and is a
    drop-in replacement for X^T X in both constructors.
    """
    two_n = value(Xbar).shape[1]
    nu = value(Xbar).shape[0]
    if value(delta).shape != (two_n,):
        raise DimensionError(
            f"delta has shape {value(delta).shape}, expected ({two_n},)"
        )
    if nu > two_n:
        warnings.warn(f"rank term nu={nu} exceeds 2n={two_n}; no longer low-rank")
    gram = ad.matmul(ad.transpose(Xbar), Xbar)
    d = ad.exp(delta)
    return gram + d * np.eye(two_n)


def construct_contracting(params: ContractionFreeParams) -> ExplicitLTI:
    """Explicit LTI system whose internal-channel LMI holds by construction.

    Assembles H = X^T X + eps I + blockdiag(C1^T C1, B1c B1c^T), partitions
    it into the certificate (E, P) and transition matrix A, and copies the
    unconstrained output-side matrices through.
    """
    if params.eps <= 0:
        raise ParameterError("eps must be positive")
    n, m, p, q, l = params.dims
    _check_shape("Y", params.Y, (n, n))
    _check_shape("C1", params.C1, (q, n))
    _check_shape("B1c", params.B1c, (n, l))
    _check_shape("D12", params.D12, (q, m))
    _check_shape("D21", params.D21, (p, l))
    _check_shape("D22", params.D22, (p, m))

    C1, B1c = params.C1, params.B1c
    gram = _gram_term(params.X, params.Xbar, params.delta, 2 * n)
    corner = _block2x2(
        ad.matmul(ad.transpose(C1), C1),
        np.zeros((n, n)),
        np.zeros((n, n)),
        ad.matmul(B1c, ad.transpose(B1c)),
    )
    H = gram + params.eps * np.eye(2 * n) + corner
    E, Einv, A, P = _partition_H(H, n, params.Y)
    B1 = ad.matmul(Einv, B1c)
    bx, bv, by = _split_bias(params.b, n, q, p)
    return ExplicitLTI(
        A=A, B1=B1, B2=params.B2, C1=C1, C2=params.C2,
        D12=params.D12, D21=params.D21, D22=params.D22,
        bx=bx, bv=bv, by=by, E=E, P=P,
    )


def construct_lipschitz(params: LipschitzFreeParams) -> ExplicitLTI:
    """Explicit LTI system with a certified incremental gain bound.

    D12 and D21 are scaled semi-orthogonal factors, D12 = sqrt((1-eps_R)
    gamma) D12o with D12o^T D12o = I (and likewise D21), which keeps the
    channel matrix R = diag(I - D21^T D21 / gamma, gamma I - D12^T D12)
    uniformly positive definite: R >= eps_R diag(I, gamma I). H is then
    assembled so the full gain LMI holds with margin eps. D22 is zero.
    """
    gamma, eps, eps_R = params.gamma, params.eps, params.eps_R
    if gamma <= 0:
        raise ParameterError("gamma must be positive")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    if not 0.0 < eps_R < 1.0:
        raise ParameterError("eps_R must lie in (0, 1)")
    n, m, p, q, l = params.dims
    _check_shape("Y", params.Y, (n, n))
    _check_shape("C1", params.C1, (q, n))
    _check_shape("C2", params.C2, (p, n))
    _check_shape("B1c", params.B1c, (n, l))
    _check_shape("B2c", params.B2c, (n, m))

    scale = np.sqrt((1.0 - eps_R) * gamma)
    D12 = scale * cayley(params.X12, params.Y12, q, m)
    D21 = scale * cayley(params.X21, params.Y21, p, l)
    D22 = np.zeros((p, m))

    # channel matrix of the gain LMI; block-diagonal because D22 = 0
    R_w = np.eye(l) - ad.matmul(ad.transpose(D21), D21) * (1.0 / gamma)
    R_u = gamma * np.eye(m) - ad.matmul(ad.transpose(D12), D12)
    Rmat = _block2x2(R_w, np.zeros((l, m)), np.zeros((m, l)), R_u)

    C1, C2, B1c, B2c = params.C1, params.C2, params.B1c, params.B2c
    Gamma = _block2x2(
        ad.matmul(ad.transpose(C2), D21) * (-1.0 / gamma),
        -ad.matmul(ad.transpose(C1), D12),
        B1c,
        B2c,
    )
    GRG = ad.matmul(ad.matmul(Gamma, ad.inv(Rmat)), ad.transpose(Gamma))
    # output-channel term -C^T barQ C = C1^T C1 + C2^T C2 / gamma
    Cterm = _block2x2(
        ad.matmul(ad.transpose(C1), C1)
        + ad.matmul(ad.transpose(C2), C2) * (1.0 / gamma),
        np.zeros((n, n)),
        np.zeros((n, n)),
        np.zeros((n, n)),
    )
    gram = _gram_term(params.X, params.Xbar, params.delta, 2 * n)
    H = gram + eps * np.eye(2 * n) + GRG + Cterm
    E, Einv, A, P = _partition_H(H, n, params.Y)
    B1 = ad.matmul(Einv, B1c)
    B2 = ad.matmul(Einv, B2c)
    bx, bv, by = _split_bias(params.b, n, q, p)
    return ExplicitLTI(
        A=A, B1=B1, B2=B2, C1=C1, C2=C2,
        D12=D12, D21=D21, D22=D22,
        bx=bx, bv=bv, by=by, E=E, P=P,
    )


def lmi_residual(sys: ExplicitLTI, spec: LMISpec) -> LMIResidual:
    """Recheck the stability/gain LMI on an explicit system.

    H is reassembled from the certificate (E, P) and the transition matrix,
    the channel matrices are recomputed from the spec triple, and the
    left-minus-right side of the LMI is returned with its minimum
    eigenvalue. A positive eigmin certifies the property. If the channel
    matrix R is not positive definite the result flags a certified failure
    instead of raising.
    """
    n, m, p, q, l = sys.dims
    A = value(sys.A)
    E = value(sys.E)
    P = value(sys.P)
    if spec.kind == "contraction":
        C = value(sys.C1)
        B = E @ value(sys.B1)
        D = np.zeros((q, l))
    elif spec.kind == "lipschitz":
        C = np.vstack([value(sys.C1), value(sys.C2)])
        B = E @ np.hstack([value(sys.B1), value(sys.B2)])
        D = np.vstack(
            [
                np.hstack([np.zeros((q, l)), value(sys.D12)]),
                np.hstack([value(sys.D21), value(sys.D22)]),
            ]
        )
    else:
        raise ParameterError(f"unknown LMI spec kind {spec.kind!r}")

    if spec.barQ.shape[0] != C.shape[0] or spec.barR.shape[0] != D.shape[1]:
        raise DimensionError("spec triple does not match the system's channel dims")

    Rmat = spec.barR + spec.barS @ D + D.T @ spec.barS.T + D.T @ spec.barQ @ D
    r_eigmin = float(np.min(np.linalg.eigvalsh(_symmetrize(Rmat))))
    if r_eigmin <= 0:
        return LMIResidual(None, -np.inf, False, r_eigmin)

    H = np.block([[E.T + E - P, (E @ A).T], [E @ A, P]])
    Cc = (D.T @ spec.barQ + spec.barS) @ C
    G = np.vstack([Cc.T, B])
    Czero = np.vstack([C.T, np.zeros((n, C.shape[0]))])
    residual = H - G @ np.linalg.solve(Rmat, G.T) + Czero @ spec.barQ @ Czero.T
    residual = _symmetrize(residual)
    eigmin = float(np.min(np.linalg.eigvalsh(residual)))
    return LMIResidual(residual, eigmin, True, r_eigmin)
