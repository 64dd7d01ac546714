"""Assembly and simulation of recurrent models with a 1-Lipschitz network loop.

A model is the feedback interconnection of a certified LTI system (from
`lti_param`) and a 1-Lipschitz feedforward network phi (from
`lipschitz_net`):

    v_t = C1 x_t + D12 u_t + b_v
    w_t = phi(v_t)                       (exactly one call per step)
    x_{t+1} = A x_t + B1 w_t + B2 u_t + b_x
    y_t = C2 x_t + D21 w_t + D22 u_t + b_y

The free parameters live in a single flat vector; `realize` maps it to an
explicit, simulatable model. Sequences are time-major with the batch as the
leading axis of each time slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, value
from .errors import DimensionError, ParameterError
from .lipschitz_net import LipschitzNet, SandwichLayer, layer_dims
from .lti_param import (
    DEFAULT_EPS,
    DEFAULT_EPS_R,
    ContractionFreeParams,
    ExplicitLTI,
    LipschitzFreeParams,
    LMISpec,
    construct_contracting,
    construct_lipschitz,
    contraction_spec,
    lipschitz_spec,
)

# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class R2DNConfig:
    """Dimensions and mode of a model; the schema of its parameter vector."""

    n: int = 1
    m: int = 1
    p: int = 1
    q: int = 16
    l: int = 16
    mode: str = "contracting"  # or "lipschitz"
    gamma: float = 1.0
    depth: int = 6
    width: int = 32
    eps: float = DEFAULT_EPS
    eps_R: float = DEFAULT_EPS_R
    activation: str = "relu"
    low_rank: Optional[int] = None

    def __post_init__(self):
        if self.n < 1 or self.q < 1 or self.l < 1:
            raise ParameterError("n, q, l must be >= 1")
        if self.m < 0 or self.p < 0:
            raise ParameterError("m, p must be >= 0")
        if self.mode not in ("contracting", "lipschitz"):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if self.mode == "lipschitz" and self.gamma <= 0:
            raise ParameterError("gamma must be positive in lipschitz mode")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def lmi_spec(self) -> LMISpec:
        if self.mode == "contracting":
            return contraction_spec(self.q, self.l)
        return lipschitz_spec(self.gamma, self.q, self.l, self.m, self.p)


def _cayley_shapes(rows, cols):
    """Shapes of the (Xf, Yf) pair parameterizing a rows x cols factor."""
    small = min(rows, cols)
    return (small, small), (max(rows, cols) - small, small)


def param_specs(cfg: R2DNConfig):
    """Ordered (name, shape) schema of the flat parameter vector."""
    n, m, p, q, l = cfg.n, cfg.m, cfg.p, cfg.q, cfg.l
    specs = []
    if cfg.low_rank is not None:
        specs += [("lti.Xbar", (cfg.low_rank, 2 * n)), ("lti.delta", (2 * n,))]
    else:
        specs += [("lti.X", (2 * n, 2 * n))]
    specs += [
        ("lti.Y", (n, n)),
        ("lti.B1c", (n, l)),
        ("lti.C1", (q, n)),
        ("lti.C2", (p, n)),
        ("lti.b", (n + q + p,)),
    ]
    if cfg.mode == "contracting":
        specs += [
            ("lti.B2", (n, m)),
            ("lti.D12", (q, m)),
            ("lti.D21", (p, l)),
            ("lti.D22", (p, m)),
        ]
    else:
        x12, y12 = _cayley_shapes(q, m)
        x21, y21 = _cayley_shapes(p, l)
        specs += [
            ("lti.B2c", (n, m)),
            ("lti.X12", x12),
            ("lti.Y12", y12),
            ("lti.X21", x21),
            ("lti.Y21", y21),
        ]
    for i, (d_in, d_out) in enumerate(layer_dims(q, l, cfg.depth, cfg.width)):
        specs += [
            (f"phi.{i}.Xf", (d_out, d_out)),
            (f"phi.{i}.Yf", (d_in, d_out)),
            (f"phi.{i}.log_psi", (d_out,)),
            (f"phi.{i}.bias", (d_out,)),
        ]
    return specs


# ---------------------------------------------------------------------------
# flat parameter vector
# ---------------------------------------------------------------------------


@dataclass
class DirectParams:
    """Flat parameter vector plus named views into it.

    flatten/unflatten round-trips are exact: the views share the vector's
    memory.
    """

    theta: np.ndarray
    specs: tuple

    @property
    def size(self):
        return self.theta.size

    def views(self):
        """Dict of named ndarray views into theta."""
        expected = sum(int(np.prod(shape)) for _, shape in self.specs)
        if expected != self.theta.size:
            raise DimensionError(
                f"theta has {self.theta.size} entries, schema expects {expected}"
            )
        out = {}
        offset = 0
        for name, shape in self.specs:
            count = int(np.prod(shape))
            out[name] = self.theta[offset : offset + count].reshape(shape)
            offset += count
        return out

    def leaf_tensors(self):
        """Dict of independent Tensor leaves (copies) for gradient runs."""
        return {name: Tensor(arr.copy()) for name, arr in self.views().items()}

    def grad_from_leaves(self, leaves):
        """Assemble a flat gradient from the leaves' accumulated grads."""
        chunks = []
        for name, shape in self.specs:
            g = leaves[name].grad
            if g is None:
                g = np.zeros(shape)
            chunks.append(np.asarray(g).ravel())
        return np.concatenate(chunks) if chunks else np.zeros(0)

    @classmethod
    def from_views(cls, views, specs):
        theta = np.concatenate(
            [np.asarray(views[name], dtype=np.float64).ravel() for name, _ in specs]
        )
        return cls(theta, tuple(specs))

    def copy(self):
        return DirectParams(self.theta.copy(), self.specs)


def init_params(cfg: R2DNConfig, rng_seed: int = 0) -> DirectParams:
    """Gaussian fan-in initialization; X starts near identity so H ~ I."""
    rng = np.random.default_rng(rng_seed)
    specs = param_specs(cfg)
    views = {}
    for name, shape in specs:
        if name == "lti.X":
            views[name] = np.eye(shape[0]) + 0.1 * rng.standard_normal(shape) / np.sqrt(
                shape[0]
            )
        elif name == "lti.delta":
            views[name] = np.zeros(shape)
        elif name.endswith((".log_psi", ".bias")) or name == "lti.b":
            views[name] = np.zeros(shape)
        else:
            fan_in = shape[-1] if len(shape) > 1 else shape[0]
            views[name] = rng.standard_normal(shape) / np.sqrt(max(fan_in, 1))
    return DirectParams.from_views(views, specs)


# ---------------------------------------------------------------------------
# realization
# ---------------------------------------------------------------------------


def _free_lti(views, cfg: R2DNConfig):
    g = views.get
    common = dict(
        X=g("lti.X"),
        Y=views["lti.Y"],
        B1c=views["lti.B1c"],
        C1=views["lti.C1"],
        b=views["lti.b"],
        Xbar=g("lti.Xbar"),
        delta=g("lti.delta"),
    )
    if cfg.mode == "contracting":
        return ContractionFreeParams(
            eps=cfg.eps,
            B2=views["lti.B2"],
            D12=views["lti.D12"],
            C2=views["lti.C2"],
            D21=views["lti.D21"],
            D22=views["lti.D22"],
            **common,
        )
    return LipschitzFreeParams(
        B2c=views["lti.B2c"],
        C2=views["lti.C2"],
        X12=views["lti.X12"],
        Y12=views["lti.Y12"],
        X21=views["lti.X21"],
        Y21=views["lti.Y21"],
        gamma=cfg.gamma,
        eps=cfg.eps,
        eps_R=cfg.eps_R,
        m=cfg.m,
        p=cfg.p,
        **common,
    )


def _build_phi(views, cfg: R2DNConfig) -> LipschitzNet:
    layers = [
        SandwichLayer(
            Xf=views[f"phi.{i}.Xf"],
            Yf=views[f"phi.{i}.Yf"],
            log_psi=views[f"phi.{i}.log_psi"],
            bias=views[f"phi.{i}.bias"],
            d_in=d_in,
            d_out=d_out,
            activation=cfg.activation,
        )
        for i, (d_in, d_out) in enumerate(layer_dims(cfg.q, cfg.l, cfg.depth, cfg.width))
    ]
    return LipschitzNet(layers, cfg.q, cfg.l)


@dataclass
class ExplicitR2DN:
    """Simulatable model: certified LTI system plus 1-Lipschitz network."""

    lti: ExplicitLTI
    phi: LipschitzNet
    config: R2DNConfig

    @property
    def dims(self):
        return self.lti.dims

    def step(self, x, u):
        return step(self, x, u)

    def simulate(self, x0, u_seq):
        return simulate(self, x0, u_seq)


def realize_from_views(views, cfg: R2DNConfig) -> ExplicitR2DN:
    """Realize from a dict of named arrays or Tensors (gradient-capable)."""
    free = _free_lti(views, cfg)
    lti = (
        construct_contracting(free)
        if cfg.mode == "contracting"
        else construct_lipschitz(free)
    )
    return ExplicitR2DN(lti, _build_phi(views, cfg), cfg)


def realize(params: DirectParams, cfg: R2DNConfig) -> ExplicitR2DN:
    """Map the flat parameter vector to an explicit model."""
    return realize_from_views(params.views(), cfg)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def _affine(x, W, bias=None):
    """x @ W^T (+ bias); zero-width inputs contribute nothing."""
    out = ad.matmul(x, ad.transpose(W))
    if bias is not None:
        out = out + bias
    return out


def _add(*terms):
    total = None
    for t in terms:
        if t is None:
            continue
        total = t if total is None else total + t
    return total


def stack0(items):
    """Stack along a new leading axis, Tensor-aware."""
    if any(ad.is_tensor(it) for it in items):
        return ad.concat([it.reshape((1,) + it.shape) for it in items], axis=0)
    return np.stack(items, axis=0)


def step(model: ExplicitR2DN, x, u):
    """One transition: returns (x_next, y); exactly one phi evaluation."""
    lti = model.lti
    n, m, p, q, l = lti.dims
    if value(x).shape[-1] != n:
        raise DimensionError(f"state has dim {value(x).shape[-1]}, expected {n}")
    if value(u).shape[-1] != m:
        raise DimensionError(f"input has dim {value(u).shape[-1]}, expected {m}")
    v = _add(_affine(x, lti.C1), _affine(u, lti.D12), lti.bv)
    w = model.phi.forward(v)
    x_next = _add(_affine(x, lti.A), _affine(w, lti.B1), _affine(u, lti.B2), lti.bx)
    y = _add(_affine(x, lti.C2), _affine(w, lti.D21), _affine(u, lti.D22), lti.by)
    return x_next, y


def simulate(model, x0, u_seq):
    """Iterate `step` over a time-major input sequence.

    x0 is (n,) or (batch, n); u_seq is (T, m) or (T, batch, m). Returns
    (x_seq, y_seq) with x_seq[0] = x0 and len(x_seq) = T + 1.
    """
    T = value(u_seq).shape[0]
    x = x0
    xs = [x0]
    ys = []
    for t in range(T):
        x, y = model.step(x, u_seq[t])
        xs.append(x)
        ys.append(y)
    p = model.dims[2]
    if T == 0:
        batch_shape = value(x0).shape[:-1]
        return stack0(xs), np.zeros((0,) + batch_shape + (p,))
    return stack0(xs), stack0(ys)
