import numpy as np
import pytest

from objsplat.anchors import voxelize_init
from objsplat.heads import HeadParameters
from objsplat.pipeline import render_backward, render_view
from objsplat.scene import LabeledPointCloud
from tests.conftest import make_camera


def tiny_scene(seed=0, n_points=12, learnable=False):
    """A small anchor grid with jittered offsets and random features, plus
    a camera that sees it.  Offsets are jittered so no two primitives share
    a depth (depth ties make finite differences ill-posed)."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.4, 0.4, (n_points, 3))
    ids = rng.integers(1, 3, n_points).astype(np.int32)
    cloud = LabeledPointCloud(pts, np.zeros_like(pts), ids)
    grid = voxelize_init(cloud, 0.4, k=4, feature_dim=8)
    grid.features[:] = rng.normal(0, 0.3, grid.features.shape)
    grid.offsets[:] += rng.normal(0, 0.05, grid.offsets.shape)
    heads = HeadParameters.init(8, 4, seed=seed)
    camera = make_camera(width=24, height=24, f=30.0, z=3.0)
    sem = rng.uniform(0, 1, (len(grid), 3)) if learnable else None
    return grid, heads, camera, sem


def forward_loss(grid, heads, camera, weights, mode="onehot", sem=None):
    ctx = render_view(
        grid, heads, camera, 2, semantic_mode=mode, semantic_vectors=sem,
        alpha_min=0.0, t_min=0.0,
    )
    return float((ctx.target.channels * weights).sum()), ctx


def fd_check(value_fn, param, grad, rng, n_samples=12, eps=1e-5, tol=2e-4):
    flat = param.reshape(-1)
    gflat = np.asarray(grad).reshape(-1)
    idx = rng.choice(flat.size, size=min(n_samples, flat.size), replace=False)
    for i in idx:
        orig = flat[i]
        flat[i] = orig + eps
        hi = value_fn()
        flat[i] = orig - eps
        lo = value_fn()
        flat[i] = orig
        fd = (hi - lo) / (2 * eps)
        assert abs(fd - gflat[i]) < tol * max(1.0, abs(fd)), (i, fd, gflat[i])


class TestRenderView:
    def test_channel_layout_onehot(self):
        grid, heads, camera, _ = tiny_scene()
        ctx = render_view(grid, heads, camera, 2)
        assert ctx.target.channels.shape == (24, 24, 3 + 3)
        sems = ctx.target.channels[:, :, 3:]
        assert np.allclose(sems.sum(axis=2), 1.0, atol=1e-12)

    def test_learnable_requires_vectors(self):
        grid, heads, camera, _ = tiny_scene()
        with pytest.raises(ValueError, match="semantic vectors"):
            render_view(grid, heads, camera, 2, semantic_mode="learnable")

    def test_unknown_mode(self):
        grid, heads, camera, _ = tiny_scene()
        with pytest.raises(ValueError, match="mode"):
            render_view(grid, heads, camera, 2, semantic_mode="wrong")

    def test_onehot_channels_are_exact_encodings(self):
        grid, heads, camera, _ = tiny_scene()
        ctx = render_view(grid, heads, camera, 2)
        k = ctx.decoded.k
        for m in range(len(ctx.splats.prim_index)):
            prim = ctx.splats.prim_index[m]
            obj = grid.ids[prim // k]
            sem = ctx.splats.channels[m, 3:]
            expect = np.zeros(3)
            expect[obj] = 1.0
            assert np.array_equal(sem, expect)


class TestFullPipelineGradients:
    def test_features_and_offsets(self, rng):
        grid, heads, camera, _ = tiny_scene()
        weights = rng.normal(0, 1, (24, 24, 6))
        loss, ctx = forward_loss(grid, heads, camera, weights)
        vg = render_backward(ctx, weights)
        fd_check(
            lambda: forward_loss(grid, heads, camera, weights)[0],
            grid.features, vg.decode.features, rng,
        )
        fd_check(
            lambda: forward_loss(grid, heads, camera, weights)[0],
            grid.offsets, vg.decode.offsets, rng,
        )

    def test_head_parameters(self, rng):
        grid, heads, camera, _ = tiny_scene(seed=1)
        weights = rng.normal(0, 1, (24, 24, 6))
        _, ctx = forward_loss(grid, heads, camera, weights)
        vg = render_backward(ctx, weights)
        for head_name in ("opacity", "color", "cov"):
            mlp = getattr(heads, head_name)
            gmlp = getattr(vg.decode.heads, head_name)
            for slot in ("w1", "b1", "w2", "b2"):
                fd_check(
                    lambda: forward_loss(grid, heads, camera, weights)[0],
                    getattr(mlp, slot), getattr(gmlp, slot), rng, n_samples=6,
                )

    def test_learnable_semantic_vectors(self, rng):
        grid, heads, camera, sem = tiny_scene(seed=2, learnable=True)
        weights = rng.normal(0, 1, (24, 24, 6))
        _, ctx = forward_loss(grid, heads, camera, weights, "learnable", sem)
        vg = render_backward(ctx, weights)
        assert vg.semantic_vectors.shape == sem.shape
        fd_check(
            lambda: forward_loss(grid, heads, camera, weights, "learnable", sem)[0],
            sem, vg.semantic_vectors, rng,
        )

    def test_onehot_mode_reports_no_semantic_grad(self, rng):
        grid, heads, camera, _ = tiny_scene()
        weights = rng.normal(0, 1, (24, 24, 6))
        _, ctx = forward_loss(grid, heads, camera, weights)
        vg = render_backward(ctx, weights)
        assert vg.semantic_vectors is None

    def test_extra_scale_gradient_added(self, rng):
        grid, heads, camera, _ = tiny_scene()
        weights = np.zeros((24, 24, 6))
        _, ctx = forward_loss(grid, heads, camera, weights)
        extra = np.ones((len(grid) * 4, 3))
        vg0 = render_backward(ctx, weights)
        vg1 = render_backward(ctx, weights, extra_d_scales=extra)
        assert not np.array_equal(vg0.decode.features, vg1.decode.features)

    def test_screen_grad_statistics(self, rng):
        grid, heads, camera, _ = tiny_scene()
        weights = rng.normal(0, 1, (24, 24, 6))
        _, ctx = forward_loss(grid, heads, camera, weights)
        vg = render_backward(ctx, weights)
        assert vg.anchor_screen_grad.shape == (len(grid),)
        assert vg.anchor_screen_count.sum() == len(ctx.splats.prim_index)
        assert (vg.anchor_screen_grad >= 0).all()
