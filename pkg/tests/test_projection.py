import numpy as np
import pytest

from objsplat.raster.projection import (
    LOW_PASS,
    InvalidRotationError,
    compute_cov3d,
    compute_cov3d_backward,
    compute_cov3d_batch,
    project_gaussian,
    project_gaussians,
    project_gaussians_backward,
    quats_to_rotmats,
    splat_channels,
)
from objsplat.scene import GaussianPrimitive, normalize_quat, quat_to_rotmat
from tests.conftest import make_camera


def random_cov_inputs(rng, m):
    scales = rng.uniform(0.05, 0.5, size=(m, 3))
    quats = rng.normal(size=(m, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    return scales, quats


class TestCov3d:
    def test_axis_aligned(self):
        cov = compute_cov3d([1.0, 2.0, 3.0], [1.0, 0, 0, 0])
        assert np.allclose(cov, np.diag([1.0, 4.0, 9.0]))

    def test_matches_direct_formula(self, rng):
        scales, quats = random_cov_inputs(rng, 20)
        cov, _ = compute_cov3d_batch(scales, quats)
        for i in range(20):
            R = quat_to_rotmat(quats[i])
            expect = R @ np.diag(scales[i] ** 2) @ R.T
            assert np.allclose(cov[i], expect, atol=1e-12)

    def test_symmetric_positive_definite(self, rng):
        scales, quats = random_cov_inputs(rng, 20)
        cov, _ = compute_cov3d_batch(scales, quats)
        assert np.allclose(cov, np.transpose(cov, (0, 2, 1)))
        assert (np.linalg.eigvalsh(cov) > 0).all()

    def test_rotation_invariant_trace(self, rng):
        scales, quats = random_cov_inputs(rng, 20)
        cov, _ = compute_cov3d_batch(scales, quats)
        assert np.allclose(np.trace(cov, axis1=1, axis2=2), (scales**2).sum(axis=1))

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(ValueError):
            compute_cov3d([1.0, -1.0, 1.0], [1.0, 0, 0, 0])

    def test_non_unit_quat_rejected(self):
        with pytest.raises(InvalidRotationError):
            compute_cov3d([1.0, 1.0, 1.0], [1.0, 0.1, 0, 0])

    def test_batch_rotmats_match_scalar(self, rng):
        _, quats = random_cov_inputs(rng, 10)
        R = quats_to_rotmats(quats)
        for i in range(10):
            assert np.allclose(R[i], quat_to_rotmat(quats[i]))


class TestCov3dBackward:
    def test_matches_finite_differences(self, rng):
        m = 6
        scales, quats = random_cov_inputs(rng, m)
        dcov = rng.normal(size=(m, 3, 3))
        dcov = 0.5 * (dcov + np.transpose(dcov, (0, 2, 1)))

        def loss(s, q):
            cov, _ = compute_cov3d_batch(s, q)
            return float((cov * dcov).sum())

        dscale, dquat = compute_cov3d_backward(dcov, scales, quats)
        eps = 1e-6
        for arr, grad in ((scales, dscale), (quats, dquat)):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                orig = arr[i]
                arr[i] = orig + eps
                hi = loss(scales, quats)
                arr[i] = orig - eps
                lo = loss(scales, quats)
                arr[i] = orig
                fd = (hi - lo) / (2 * eps)
                assert abs(fd - grad[i]) < 1e-5 * max(1.0, abs(fd)), i


class TestProjectGaussians:
    def test_center_gaussian_projects_to_center(self):
        cam = make_camera(width=33, height=33, f=40, z=3)
        cov3d = np.eye(3)[None] * 0.01
        splats = project_gaussians(
            np.zeros((1, 3)), cov3d, np.array([0.8]), np.zeros((1, 7)), cam
        )
        assert len(splats) == 1
        assert np.allclose(splats.means2d[0], [16.0, 16.0])
        assert np.isclose(splats.depths[0], 3.0)

    def test_isotropic_cov2d(self):
        # isotropic world covariance at the optical axis: cov2d is
        # (f/z)^2 * s^2 plus the low-pass dilation on the diagonal
        cam = make_camera(width=65, height=65, f=40, z=2)
        s2 = 0.05**2
        splats = project_gaussians(
            np.zeros((1, 3)), np.eye(3)[None] * s2, np.array([0.5]),
            np.zeros((1, 7)), cam,
        )
        expect = (40.0 / 2.0) ** 2 * s2
        assert np.isclose(splats.cov2d[0, 0], expect + LOW_PASS)
        assert np.isclose(splats.cov2d[0, 2], expect + LOW_PASS)
        assert np.isclose(splats.cov2d[0, 1], 0.0, atol=1e-12)

    def test_behind_camera_culled(self):
        cam = make_camera()
        splats = project_gaussians(
            np.array([[0.0, 0.0, -10.0]]), np.eye(3)[None] * 0.01,
            np.array([0.5]), np.zeros((1, 7)), cam,
        )
        assert len(splats) == 0

    def test_far_off_image_culled(self):
        cam = make_camera()
        splats = project_gaussians(
            np.array([[100.0, 0.0, 0.0]]), np.eye(3)[None] * 0.0001,
            np.array([0.5]), np.zeros((1, 7)), cam,
        )
        assert len(splats) == 0

    def test_prim_index_tracks_survivors(self):
        cam = make_camera()
        means = np.array([[0.0, 0, 0], [0, 0, -10.0], [0.1, 0, 0]])
        splats = project_gaussians(
            means, np.tile(np.eye(3) * 0.01, (3, 1, 1)),
            np.full(3, 0.5), np.zeros((3, 7)), cam,
        )
        assert np.array_equal(splats.prim_index, [0, 2])

    def test_radius_covers_3_sigma(self, rng):
        cam = make_camera(width=129, height=129, f=60, z=3)
        scales, quats = random_cov_inputs(rng, 10)
        cov, _ = compute_cov3d_batch(scales, quats)
        splats = project_gaussians(
            rng.uniform(-0.3, 0.3, (10, 3)), cov, np.full(10, 0.5),
            np.zeros((10, 7)), cam,
        )
        for i in range(len(splats)):
            a, b, c = splats.cov2d[i]
            lam_max = 0.5 * (a + c) + np.sqrt(max(0.25 * (a - c) ** 2 + b * b, 0.0))
            assert splats.radii[i] >= 3.0 * np.sqrt(lam_max) - 1e-9


class TestSplatChannels:
    def test_layout(self):
        channels = splat_channels(
            np.array([[0.1, 0.2, 0.3]]), np.array([2]), n_objects=3
        )
        assert channels.shape == (1, 7)
        assert np.allclose(channels[0, :3], [0.1, 0.2, 0.3])
        assert np.array_equal(channels[0, 3:], [0, 0, 1, 0])

    def test_background_id(self):
        channels = splat_channels(np.zeros((1, 3)), np.array([0]), n_objects=3)
        assert channels[0, 3] == 1.0


class TestProjectGaussianWrapper:
    def test_culled_returns_none(self):
        prim = GaussianPrimitive(
            mean=np.array([0.0, 0.0, -10.0]), scale=np.full(3, 0.1),
            quat=np.array([1.0, 0, 0, 0]), opacity=0.5,
            color=np.full(3, 0.5), object_id=1,
        )
        assert project_gaussian(prim, make_camera(), 3) is None

    def test_visible(self):
        prim = GaussianPrimitive(
            mean=np.zeros(3), scale=np.full(3, 0.1),
            quat=normalize_quat(np.array([0.9, 0.1, 0.2, 0.1])), opacity=0.5,
            color=np.full(3, 0.5), object_id=1,
        )
        splats = project_gaussian(prim, make_camera(), 3)
        assert splats is not None and len(splats) == 1


class TestProjectionBackward:
    def test_matches_finite_differences(self, rng):
        cam = make_camera(width=65, height=65, f=50, z=4)
        m = 8
        means = rng.uniform(-0.4, 0.4, size=(m, 3))
        scales, quats = random_cov_inputs(rng, m)
        cov3d, _ = compute_cov3d_batch(scales, quats)
        g_mean = rng.normal(size=(m, 2))
        g_cov = rng.normal(size=(m, 3))

        def loss(mu, cov):
            s = project_gaussians(mu, cov, np.full(m, 0.5), np.zeros((m, 7)), cam)
            assert len(s) == m  # the test scene must not cull
            return float((s.means2d * g_mean).sum() + (s.cov2d * g_cov).sum())

        splats = project_gaussians(means, cov3d, np.full(m, 0.5), np.zeros((m, 7)), cam)
        d_means, d_cov3d = project_gaussians_backward(
            means, cov3d, cam, splats.prim_index, g_mean, g_cov
        )
        eps = 1e-6
        it = np.nditer(means, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = means[i]
            means[i] = orig + eps
            hi = loss(means, cov3d)
            means[i] = orig - eps
            lo = loss(means, cov3d)
            means[i] = orig
            fd = (hi - lo) / (2 * eps)
            assert abs(fd - d_means[i]) < 2e-5 * max(1.0, abs(fd)), i
        # covariance gradients are reported for symmetric perturbations
        # (the off-diagonal direction e_ij + e_ji), matching the symmetric
        # covariance parameterization
        for p in range(m):
            for r in range(3):
                for col in range(r, 3):
                    step = np.zeros((3, 3))
                    step[r, col] += eps
                    step[col, r] += eps
                    save = cov3d[p].copy()
                    cov3d[p] = save + step
                    hi = loss(means, cov3d)
                    cov3d[p] = save - step
                    lo = loss(means, cov3d)
                    cov3d[p] = save
                    fd = (hi - lo) / (2 * eps)
                    an = d_cov3d[p, r, col] + d_cov3d[p, col, r]
                    assert abs(fd - an) < 2e-5 * max(1.0, abs(fd)), (p, r, col)
