"""1-Lipschitz feedforward networks built from sandwich-style layers.

Each layer realizes

    h  ->  sqrt(2) * A^T diag(psi) sigma( sqrt(2) * diag(psi)^-1 B h + b )

where the vertical stack W = [A^T; B^T] has orthonormal columns (produced by
the Cayley transform from `lti_param`) and sigma is slope-restricted to
[0, 1]. Under these conditions every layer, and hence the composition, is
1-Lipschitz for any parameter value. The per-channel scaling psi is stored
in log-space so positivity costs no constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import value
from .errors import DimensionError, ParameterError
from .lti_param import cayley

_SQRT2 = float(np.sqrt(2.0))

ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh}


@dataclass
class SandwichLayer:
    """One 1-Lipschitz layer; `Xf, Yf` parameterize the semi-orthogonal stack."""

    Xf: object
    Yf: object
    log_psi: object
    bias: object
    d_in: int
    d_out: int
    activation: str = "relu"
    # realized weight and scaling, computed once per layer instance; safe to
    # share across timesteps in both the plain and the differentiable path
    _realized: object = field(default=None, repr=False, compare=False)

    @property
    def d_hidden(self):
        return self.d_out

    def weight(self):
        """Semi-orthogonal stack W = [A^T; B^T] of shape (d_out+d_in, d_hidden)."""
        return cayley(self.Xf, self.Yf, self.d_out + self.d_in, self.d_hidden)

    def _realize(self):
        if self._realized is None:
            W = self.weight()
            psi = ad.exp(self.log_psi)
            self._realized = (W[: self.d_out], W[self.d_out :], psi)
        return self._realized

    def forward(self, h):
        if value(h).shape[-1] != self.d_in:
            raise DimensionError(
                f"layer input has dim {value(h).shape[-1]}, expected {self.d_in}"
            )
        act = ACTIVATIONS[self.activation]
        Wa, Wb, psi = self._realize()  # Wa = A^T, Wb = B^T
        z = _SQRT2 * ad.matmul(h, Wb) / psi + self.bias
        return _SQRT2 * ad.matmul(act(z) * psi, ad.transpose(Wa))


@dataclass
class LipschitzNet:
    """Composition of sandwich layers; 1-Lipschitz for any parameter value."""

    layers: list
    input_dim: int
    output_dim: int
    calls: int = field(default=0, compare=False)

    def forward(self, v):
        """Apply the network to a single vector or a batch (rows independent)."""
        if value(v).shape[-1] != self.input_dim:
            raise DimensionError(
                f"input has dim {value(v).shape[-1]}, expected {self.input_dim}"
            )
        self.calls += 1
        h = v
        for layer in self.layers:
            h = layer.forward(h)
        return h

    def __call__(self, v):
        return self.forward(v)


def layer_dims(q: int, l: int, depth: int, width: int):
    """(d_in, d_out) chain for a `depth`-layer net mapping q -> l."""
    if depth < 1:
        raise ParameterError("depth must be >= 1")
    chain = [q] + [width] * (depth - 1) + [l]
    return list(zip(chain[:-1], chain[1:]))


def net_forward(net: LipschitzNet, v):
    """Evaluate the network; batch rows are processed independently."""
    return net.forward(v)


def empirical_lipschitz_lb(
    fn, in_dim: int, trials: int = 1000, ascent_steps: int = 50, rng_seed: int = 0
):
    """Lower bound on the Lipschitz constant of `fn` by falsification search.

    Samples random input pairs at several scales, takes the largest observed
    gain |f(a) - f(b)| / |a - b|, then refines the best pair with a local
    random-perturbation ascent. Degenerate zero-gap proposals are skipped.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    f = fn.forward if isinstance(fn, LipschitzNet) else fn
    rng = np.random.default_rng(rng_seed)

    def gain(a, b):
        d = np.linalg.norm(a - b)
        if d < 1e-14:
            return -np.inf
        return float(np.linalg.norm(value(f(a)) - value(f(b))) / d)

    best = -np.inf
    best_pair = None
    scales = (1e-3, 1e-1, 1.0, 10.0)
    for k in range(trials):
        a = rng.standard_normal(in_dim)
        b = a + scales[k % len(scales)] * rng.standard_normal(in_dim)
        g = gain(a, b)
        if g > best:
            best, best_pair = g, (a, b)

    if best_pair is None:
        return 0.0
    a, b = best_pair
    step = 0.1 * max(np.linalg.norm(a - b), 1e-3)
    for _ in range(ascent_steps):
        cand_a = a + step * rng.standard_normal(in_dim)
        cand_b = b + step * rng.standard_normal(in_dim)
        moves = [(cand_a, b), (a, cand_b), (cand_a, cand_b), (a, a + 0.5 * (b - a))]
        improved = False
        for pa, pb in moves:
            g = gain(pa, pb)
            if g > best:
                best, a, b = g, pa, pb
                improved = True
        if not improved:
            step *= 0.7
    return best
