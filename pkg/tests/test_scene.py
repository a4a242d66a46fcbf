import numpy as np
import pytest

from objsplat.scene import (
    Camera,
    GaussianPrimitive,
    IdMap,
    InvalidIdError,
    LabeledPointCloud,
    normalize_quat,
    one_hot_encode,
    quat_to_rotmat,
    validate_cloud,
)


class TestOneHotEncode:
    def test_background(self):
        assert np.array_equal(one_hot_encode(0, 3), [1, 0, 0, 0])

    def test_object(self):
        assert np.array_equal(one_hot_encode(2, 3), [0, 0, 1, 0])

    def test_length_is_n_plus_one(self):
        assert one_hot_encode(5, 5).shape == (6,)

    def test_out_of_range(self):
        with pytest.raises(InvalidIdError):
            one_hot_encode(4, 3)
        with pytest.raises(InvalidIdError):
            one_hot_encode(-1, 3)

    def test_sums_to_one(self):
        for i in range(4):
            assert one_hot_encode(i, 3).sum() == 1.0


class TestQuaternions:
    def test_identity(self):
        assert np.allclose(quat_to_rotmat(np.array([1.0, 0, 0, 0])), np.eye(3))

    def test_rotation_is_orthonormal(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            q = normalize_quat(rng.normal(size=4))
            R = quat_to_rotmat(q)
            assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
            assert np.isclose(np.linalg.det(R), 1.0)

    def test_degenerate_quat(self):
        with pytest.raises(ValueError):
            normalize_quat(np.zeros(4))


class TestCamera:
    def test_center_inverts_transform(self):
        q = normalize_quat(np.array([0.9, 0.1, -0.2, 0.3]))
        cam = Camera(fx=50, fy=50, cx=16, cy=16, width=33, height=33,
                     qvec=q, tvec=np.array([0.5, -1.0, 2.0]))
        # the camera center maps to the camera-space origin
        assert np.allclose(cam.rotation @ cam.center + cam.tvec, 0.0, atol=1e-12)

    def test_non_unit_quaternion_rejected(self):
        with pytest.raises(ValueError, match="unit norm"):
            Camera(fx=50, fy=50, cx=16, cy=16, width=33, height=33,
                   qvec=np.array([1.0, 0.1, 0.0, 0.0]), tvec=np.zeros(3))

    def test_bad_focal(self):
        with pytest.raises(ValueError):
            Camera(fx=0, fy=50, cx=16, cy=16, width=33, height=33,
                   qvec=np.array([1.0, 0, 0, 0]), tvec=np.zeros(3))


class TestIdMap:
    def test_negative_ids_rejected(self):
        with pytest.raises(ValueError):
            IdMap(np.array([[0, -1]]))

    def test_shape_properties(self):
        m = IdMap(np.zeros((4, 7), dtype=np.int32))
        assert (m.height, m.width) == (4, 7)

    def test_arrays_frozen(self):
        m = IdMap(np.zeros((2, 2), dtype=np.int32))
        with pytest.raises(ValueError):
            m.ids[0, 0] = 1


class TestLabeledPointCloud:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            LabeledPointCloud(np.zeros((3, 3)), np.zeros((2, 3)), np.zeros(3, dtype=np.int32))

    def test_with_ids_preserves_geometry(self):
        cloud = LabeledPointCloud(np.ones((2, 3)), np.zeros((2, 3)), np.zeros(2, dtype=np.int32))
        relabeled = cloud.with_ids(np.array([1, 2], dtype=np.int32))
        assert np.array_equal(relabeled.positions, cloud.positions)
        assert np.array_equal(relabeled.ids, [1, 2])


class TestGaussianPrimitive:
    def test_valid(self):
        GaussianPrimitive(
            mean=np.zeros(3), scale=np.ones(3), quat=np.array([1.0, 0, 0, 0]),
            opacity=0.5, color=np.full(3, 0.5), object_id=1,
        )

    def test_invalid_opacity(self):
        with pytest.raises(ValueError):
            GaussianPrimitive(
                mean=np.zeros(3), scale=np.ones(3), quat=np.array([1.0, 0, 0, 0]),
                opacity=1.5, color=np.full(3, 0.5), object_id=1,
            )

    def test_nonpositive_scale(self):
        with pytest.raises(ValueError):
            GaussianPrimitive(
                mean=np.zeros(3), scale=np.array([1.0, 0.0, 1.0]),
                quat=np.array([1.0, 0, 0, 0]),
                opacity=0.5, color=np.full(3, 0.5), object_id=1,
            )


class TestValidateCloud:
    def test_clean_cloud(self):
        cloud = LabeledPointCloud(np.zeros((4, 3)), np.zeros((4, 3)),
                                  np.array([0, 1, 2, 3], dtype=np.int32))
        assert validate_cloud(cloud, 3).ok

    def test_reports_bad_ids_and_nonfinite(self):
        pos = np.zeros((3, 3))
        pos[1, 0] = np.nan
        cloud = LabeledPointCloud(pos, np.zeros((3, 3)), np.array([0, 1, 9], dtype=np.int32))
        report = validate_cloud(cloud, 3)
        assert not report.ok
        assert report.n_bad_ids == 1
        assert report.n_nonfinite == 1
        assert any("ID" in m for m in report.messages)
