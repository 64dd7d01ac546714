"""Recurrent baseline with a scalar-activation equilibrium layer.

Structurally faithful recurrent-equilibrium baseline for the timing and
expressivity comparisons: the network channel is w = sigma(D11 w + b_w) with
D11 strictly lower-triangular, so the fixed point is solved exactly in one
row-by-row sweep. The LTI part reuses the contracting construction from
`lti_param`; no contraction certificate is claimed for the assembled model
(the certified equilibrium parameterization is out of scope here), which is
sufficient for the structural cost comparisons this baseline serves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as kernels
from . import autodiff as ad
from .autodiff import Tensor, value
from .errors import DimensionError, ParameterError, StructureError
from .lti_param import DEFAULT_EPS, ExplicitLTI, construct_contracting
from .model import (
    DirectParams,
    R2DNConfig,
    _affine,
    _add,
    _free_lti,
    simulate as _simulate,
)

_ACT_IDS = {"relu": kernels.ACT_RELU, "tanh": kernels.ACT_TANH}
_ACT_FNS = {"relu": lambda z: np.maximum(z, 0.0), "tanh": np.tanh}


# ---------------------------------------------------------------------------
# configuration and parameter schema
# ---------------------------------------------------------------------------


@dataclass
class RENConfig:
    """Dimensions of the baseline; the equilibrium layer has q neurons."""

    n: int = 1
    m: int = 1
    p: int = 1
    q: int = 20
    eps: float = DEFAULT_EPS
    activation: str = "relu"
    low_rank: Optional[int] = None

    def __post_init__(self):
        if self.n < 1 or self.q < 1:
            raise ParameterError("n and q must be >= 1")
        if self.m < 0 or self.p < 0:
            raise ParameterError("m, p must be >= 0")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def param_specs(cfg: RENConfig):
    """Schema: contracting LTI with l = q, plus the raw D11 entries."""
    n, m, p, q = cfg.n, cfg.m, cfg.p, cfg.q
    specs = []
    if cfg.low_rank is not None:
        specs += [("lti.Xbar", (cfg.low_rank, 2 * n)), ("lti.delta", (2 * n,))]
    else:
        specs += [("lti.X", (2 * n, 2 * n))]
    specs += [
        ("lti.Y", (n, n)),
        ("lti.B1c", (n, q)),
        ("lti.C1", (q, n)),
        ("lti.C2", (p, n)),
        ("lti.b", (n + q + p,)),
        ("lti.B2", (n, m)),
        ("lti.D12", (q, m)),
        ("lti.D21", (p, q)),
        ("lti.D22", (p, m)),
        ("ren.D11", (q * (q - 1) // 2,)),
    ]
    return specs


def init_params(cfg: RENConfig, rng_seed: int = 0) -> DirectParams:
    """Same initialization convention as the main model."""
    rng = np.random.default_rng(rng_seed)
    specs = param_specs(cfg)
    views = {}
    for name, shape in specs:
        if name == "lti.X":
            views[name] = np.eye(shape[0]) + 0.1 * rng.standard_normal(shape) / np.sqrt(
                shape[0]
            )
        elif name in ("lti.b", "lti.delta"):
            views[name] = np.zeros(shape)
        elif name == "ren.D11":
            views[name] = rng.standard_normal(shape) / np.sqrt(max(cfg.q, 1))
        else:
            fan_in = shape[-1] if len(shape) > 1 else shape[0]
            views[name] = rng.standard_normal(shape) / np.sqrt(max(fan_in, 1))
    return DirectParams.from_views(views, specs)


def _strictly_lower(raw, q):
    """Scatter a q(q-1)/2 vector into a strictly lower-triangular matrix."""
    if value(raw).shape != (q * (q - 1) // 2,):
        raise DimensionError(
            f"raw D11 has shape {value(raw).shape}, expected ({q * (q - 1) // 2},)"
        )
    rows, cols = np.tril_indices(q, k=-1)
    full = np.zeros((q, q))
    full[rows, cols] = value(raw)
    if not ad.is_tensor(raw):
        return full

    def back(g):
        ad._accumulate(raw, g[rows, cols])

    return ad.make_node(full, (raw,), back)


# ---------------------------------------------------------------------------
# equilibrium layer
# ---------------------------------------------------------------------------


def solve_equilibrium(D11, b_w, activation: str = "relu"):
    """Exact fixed point of w = sigma(D11 w + b_w) in one sequential sweep.

    Requires diag(D11) = 0 (strict lower triangularity), which makes row i
    depend only on rows j < i. Gradients flow through a hand-written adjoint
    (one triangular back-substitution), not an unrolled tape.
    """
    D = np.ascontiguousarray(value(D11))
    q = D.shape[0]
    if D.shape != (q, q):
        raise DimensionError("D11 must be square")
    if np.any(np.tril(D, k=0) != np.tril(D, k=-1)) or np.any(np.triu(D, k=1)):
        raise StructureError("D11 must be strictly lower-triangular")
    if activation not in _ACT_IDS:
        raise ParameterError(f"unknown activation {activation!r}")
    act_id = _ACT_IDS[activation]

    bw_val = value(b_w)
    single = bw_val.ndim == 1
    bw2 = np.ascontiguousarray(bw_val.reshape(1, -1) if single else bw_val)
    if bw2.shape[1] != q:
        raise DimensionError(f"b_w has dim {bw2.shape[1]}, expected {q}")
    w = kernels.equilibrium_sweep(D, bw2, act_id)

    if not (ad.is_tensor(D11) or ad.is_tensor(b_w)):
        return w[0] if single else w

    lam = (w > 0).astype(np.float64) if activation == "relu" else 1.0 - w * w

    def back(g):
        g2 = np.ascontiguousarray(g.reshape(1, -1) if single else g)
        t = kernels.sweep_backward(D, lam, g2)
        s = lam * t
        if ad.is_tensor(b_w):
            ad._accumulate(b_w, s[0] if single else s)
        if ad.is_tensor(D11):
            gD = np.tril(s.T @ w, k=-1)
            ad._accumulate(D11, gD)

    parents = tuple(x for x in (D11, b_w) if ad.is_tensor(x))
    return ad.make_node(w[0] if single else w, parents, back)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass
class ExplicitREN:
    """Simulatable baseline: LTI system plus exact equilibrium layer."""

    lti: ExplicitLTI
    D11: object
    config: RENConfig

    @property
    def dims(self):
        return self.lti.dims

    @property
    def activation(self):
        return self.config.activation

    def step(self, x, u):
        return ren_step(self, x, u)

    def simulate(self, x0, u_seq):
        return _simulate(self, x0, u_seq)


def ren_realize(params: DirectParams, cfg: RENConfig) -> ExplicitREN:
    """Map the flat parameter vector to an explicit baseline model."""
    return ren_realize_from_views(params.views(), cfg)


def ren_realize_from_views(views, cfg: RENConfig) -> ExplicitREN:
    lti_cfg = R2DNConfig(
        n=cfg.n, m=cfg.m, p=cfg.p, q=cfg.q, l=cfg.q,
        mode="contracting", eps=cfg.eps, low_rank=cfg.low_rank,
    )
    lti = construct_contracting(_free_lti(views, lti_cfg))
    D11 = _strictly_lower(views["ren.D11"], cfg.q)
    return ExplicitREN(lti, D11, cfg)


def ren_step(model: ExplicitREN, x, u):
    """One transition with the equilibrium solve in the loop."""
    lti = model.lti
    n, m, p, q, l = lti.dims
    if value(x).shape[-1] != n:
        raise DimensionError(f"state has dim {value(x).shape[-1]}, expected {n}")
    if value(u).shape[-1] != m:
        raise DimensionError(f"input has dim {value(u).shape[-1]}, expected {m}")
    b_w = _add(_affine(x, lti.C1), _affine(u, lti.D12), lti.bv)
    w = solve_equilibrium(model.D11, b_w, model.activation)
    x_next = _add(_affine(x, lti.A), _affine(w, lti.B1), _affine(u, lti.B2), lti.bx)
    y = _add(_affine(x, lti.C2), _affine(w, lti.D21), _affine(u, lti.D22), lti.by)
    return x_next, y


def ren_simulate(model: ExplicitREN, x0, u_seq):
    return _simulate(model, x0, u_seq)


def equilibrium_residual(D11, b_w, w, activation: str = "relu"):
    """Max-norm residual ||w - sigma(D11 w + b_w)||_inf (solver exactness check)."""
    fn = _ACT_FNS[activation]
    w = value(w)
    z = value(b_w) + w @ value(D11).T
    return float(np.max(np.abs(w - fn(z)))) if w.size else 0.0
