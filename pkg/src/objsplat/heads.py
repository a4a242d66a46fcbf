"""Per-anchor decoding heads: three small 2-layer MLPs (opacity, color,
covariance) mapping [feature, viewing distance, viewing direction] to the
attributes of the anchor's k Gaussian primitives.

Forward saves its activations; ``decode_backward`` reproduces exact
reverse-mode gradients for the head parameters, anchor features and offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorGrid
from .scene import Camera

HIDDEN = 32


class DegenerateViewError(ValueError):
    pass


@dataclass
class Mlp:
    w1: np.ndarray  # (hidden, in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (out, hidden)
    b2: np.ndarray  # (out,)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = np.maximum(x @ self.w1.T + self.b1, 0.0)
        return h @ self.w2.T + self.b2, h

    def backward(self, x, h, dout) -> tuple["Mlp", np.ndarray]:
        dh = (dout @ self.w2) * (h > 0)
        grads = Mlp(
            w1=dh.T @ x,
            b1=dh.sum(axis=0),
            w2=dout.T @ h,
            b2=dout.sum(axis=0),
        )
        return grads, dh @ self.w1


@dataclass
class HeadParameters:
    opacity: Mlp  # out: k
    color: Mlp  # out: 3k
    cov: Mlp  # out: 7k, per primitive [log-scale (3), raw quaternion (4)]
    k: int
    feature_dim: int

    @classmethod
    def init(cls, feature_dim: int, k: int, seed: int = 0, hidden: int = HIDDEN):
        rng = np.random.default_rng(seed)
        d_in = feature_dim + 4

        def make(out_dim):
            return Mlp(
                w1=rng.normal(0, np.sqrt(2.0 / d_in), (hidden, d_in)),
                b1=np.zeros(hidden),
                w2=rng.normal(0, np.sqrt(2.0 / hidden), (out_dim, hidden)),
                b2=np.zeros(out_dim),
            )

        heads = cls(
            opacity=make(k), color=make(3 * k), cov=make(7 * k),
            k=k, feature_dim=feature_dim,
        )
        # start at the identity rotation: raw quaternion bias (1, 0, 0, 0)
        heads.cov.b2[3::7] = 1.0
        return heads

    def params(self) -> list[np.ndarray]:
        return [
            a for mlp in (self.opacity, self.color, self.cov)
            for a in (mlp.w1, mlp.b1, mlp.w2, mlp.b2)
        ]

    @classmethod
    def zeros_like(cls, other: "HeadParameters") -> "HeadParameters":
        def z(mlp):
            return Mlp(*(np.zeros_like(a) for a in (mlp.w1, mlp.b1, mlp.w2, mlp.b2)))

        return cls(
            opacity=z(other.opacity), color=z(other.color), cov=z(other.cov),
            k=other.k, feature_dim=other.feature_dim,
        )


@dataclass
class DecodedPrimitives:
    """Attributes of all A*k primitives plus saved forward state."""

    means: np.ndarray  # (A, k, 3)
    scales: np.ndarray  # (A, k, 3)
    quats: np.ndarray  # (A, k, 4) unit
    opacities: np.ndarray  # (A, k) in (0, 1)
    colors: np.ndarray  # (A, k, 3) in (0, 1)
    object_ids: np.ndarray  # (A,)
    # saved state
    x: np.ndarray  # (A, D+4) head inputs
    h_opacity: np.ndarray
    h_color: np.ndarray
    h_cov: np.ndarray
    quat_raw: np.ndarray  # (A, k, 4) pre-normalization
    color_raw_sig: np.ndarray  # (A, k, 3) sigmoid output before overrides
    override_mask: np.ndarray  # (A,) bool

    @property
    def n_anchors(self) -> int:
        return self.means.shape[0]

    @property
    def k(self) -> int:
        return self.means.shape[1]

    def flat(self, arr: np.ndarray) -> np.ndarray:
        return arr.reshape(self.n_anchors * self.k, *arr.shape[2:])


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def decode_anchors(
    grid: AnchorGrid, heads: HeadParameters, camera: Camera
) -> DecodedPrimitives:
    a, k = len(grid), grid.k
    cam_center = camera.center
    rel = cam_center[None, :] - grid.centers
    delta = np.linalg.norm(rel, axis=1)
    if (delta < 1e-9).any():
        raise DegenerateViewError("camera coincides with an anchor center")
    direction = rel / delta[:, None]
    x = np.concatenate([grid.features, delta[:, None], direction], axis=1)

    out_o, h_o = heads.opacity.forward(x)
    out_c, h_c = heads.color.forward(x)
    out_v, h_v = heads.cov.forward(x)

    opacities = _sigmoid(out_o)
    colors = _sigmoid(out_c).reshape(a, k, 3)
    cov = out_v.reshape(a, k, 7)
    scales = grid.scalings[:, None, :] * np.exp(cov[:, :, :3])
    quat_raw = cov[:, :, 3:]
    norms = np.linalg.norm(quat_raw, axis=2, keepdims=True)
    if (norms < 1e-12).any():
        raise DegenerateViewError("covariance head produced a zero quaternion")
    quats = quat_raw / norms

    means = grid.centers[:, None, :] + grid.offsets * grid.scalings[:, None, :]

    override_mask = ~np.isnan(grid.color_override[:, 0])
    color_raw = colors
    if override_mask.any():
        colors = colors.copy()
        colors[override_mask] = grid.color_override[override_mask][:, None, :]

    return DecodedPrimitives(
        means=means,
        scales=scales,
        quats=quats,
        opacities=opacities,
        colors=colors,
        object_ids=grid.ids.copy(),
        x=x,
        h_opacity=h_o,
        h_color=h_c,
        h_cov=h_v,
        quat_raw=quat_raw,
        color_raw_sig=color_raw,
        override_mask=override_mask,
    )


@dataclass
class DecodeGrads:
    heads: HeadParameters  # gradient-valued
    features: np.ndarray  # (A, D)
    offsets: np.ndarray  # (A, k, 3)


def decode_backward(
    grid: AnchorGrid,
    heads: HeadParameters,
    decoded: DecodedPrimitives,
    d_means: np.ndarray,
    d_opacities: np.ndarray,
    d_colors: np.ndarray,
    d_scales: np.ndarray,
    d_quats: np.ndarray,
) -> DecodeGrads:
    """Chain primitive-attribute gradients back to head parameters, anchor
    features and offsets (anchor centers and scalings are not learnable)."""
    a, k = decoded.n_anchors, decoded.k

    d_offsets = d_means * grid.scalings[:, None, :]

    d_out_o = d_opacities * decoded.opacities * (1.0 - decoded.opacities)

    d_col = d_colors.copy()
    d_col[decoded.override_mask] = 0.0  # overridden colors bypass the head
    sig = decoded.color_raw_sig
    d_out_c = (d_col * sig * (1.0 - sig)).reshape(a, 3 * k)

    d_cov = np.empty((a, k, 7))
    d_cov[:, :, :3] = d_scales * decoded.scales  # s = l*exp(u) => ds/du = s
    # unit-quaternion normalization backward
    norms = np.linalg.norm(decoded.quat_raw, axis=2, keepdims=True)
    q_unit = decoded.quats
    d_cov[:, :, 3:] = (
        d_quats - (d_quats * q_unit).sum(axis=2, keepdims=True) * q_unit
    ) / norms
    d_out_v = d_cov.reshape(a, 7 * k)

    g_o, dx_o = heads.opacity.backward(decoded.x, decoded.h_opacity, d_out_o)
    g_c, dx_c = heads.color.backward(decoded.x, decoded.h_color, d_out_c)
    g_v, dx_v = heads.cov.backward(decoded.x, decoded.h_cov, d_out_v)

    dx = dx_o + dx_c + dx_v
    grads = HeadParameters(
        opacity=g_o, color=g_c, cov=g_v, k=heads.k, feature_dim=heads.feature_dim
    )
    return DecodeGrads(
        heads=grads,
        features=dx[:, : grid.feature_dim],
        offsets=d_offsets,
    )
