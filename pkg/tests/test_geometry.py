import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graspbridge.errors import (
    BoundsError,
    EmptyInputError,
    InputError,
    InvalidRotationError,
)
from graspbridge.geometry import (
    ContactMap,
    chamfer,
    extract_contact_map,
    farthest_point_sample,
    rot6d_decode,
    rot6d_encode,
)


def random_rotation(rng):
    """Gram-Schmidt a random 3x3 into a proper rotation."""
    while True:
        M = rng.standard_normal((3, 3))
        Q, _ = np.linalg.qr(M)
        if np.linalg.det(Q) < 0:
            Q[:, 2] *= -1
        if abs(np.linalg.det(Q) - 1) < 1e-12:
            return Q


class TestRot6d:
    def test_identity_encode(self):
        np.testing.assert_array_equal(
            rot6d_encode(np.eye(3)), [1, 0, 0, 0, 1, 0]
        )

    def test_z90_encode(self):
        Rz = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        np.testing.assert_allclose(
            rot6d_encode(Rz), [0, 1, 0, -1, 0, 0], atol=1e-15
        )

    def test_identity_decode(self):
        np.testing.assert_allclose(
            rot6d_decode([1, 0, 0, 0, 1, 0]), np.eye(3), atol=1e-15
        )

    def test_decode_orthonormalizes(self):
        # non-orthonormal seeds are projected by Gram-Schmidt
        np.testing.assert_allclose(
            rot6d_decode([2, 0, 0, 1, 1, 0]), np.eye(3), atol=1e-15
        )

    def test_roundtrip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            R = random_rotation(rng)
            np.testing.assert_allclose(rot6d_decode(rot6d_encode(R)), R,
                                       atol=1e-12)

    def test_decode_columns_orthonormal(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            r6 = rng.standard_normal(6)
            R = rot6d_decode(r6)
            np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
            assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)

    def test_encode_rejects_non_orthonormal(self):
        with pytest.raises(InvalidRotationError):
            rot6d_encode(np.eye(3) * 1.01)

    def test_encode_rejects_reflection(self):
        R = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(InvalidRotationError):
            rot6d_encode(R)

    def test_decode_rejects_zero_seed(self):
        with pytest.raises(InvalidRotationError):
            rot6d_decode([0, 0, 0, 1, 0, 0])

    def test_decode_rejects_parallel_seeds(self):
        with pytest.raises(InvalidRotationError):
            rot6d_decode([1, 0, 0, 2, 0, 0])


class TestChamfer:
    def test_identical_clouds(self):
        pts = np.random.default_rng(0).standard_normal((20, 3))
        assert chamfer(pts, pts) == 0.0

    def test_single_points(self):
        assert chamfer([[0, 0, 0]], [[1, 0, 0]]) == pytest.approx(2.0)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((50, 3))
        B = rng.standard_normal((50, 3))
        brute = 0.0
        for x in A:
            brute += min(np.sum((x - y) ** 2) for y in B)
        for y in B:
            brute += min(np.sum((x - y) ** 2) for x in A)
        assert chamfer(A, B) == pytest.approx(brute, abs=1e-12)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((17, 3))
        B = rng.standard_normal((9, 3))
        assert chamfer(A, B) == chamfer(B, A)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((8, 3))
        B = rng.standard_normal((6, 3))
        perm = rng.permutation(len(A))
        # permutation changes only the floating-point summation order
        assert chamfer(A[perm], B) == pytest.approx(chamfer(A, B), rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            chamfer(np.empty((0, 3)), [[1, 2, 3]])


class TestContactMap:
    def _scene(self):
        obj = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], float)
        nrm = np.array([[0, 0, 1], [0, 0, 1], [0, 0, 1]], float)
        return obj, nrm

    def test_threshold_inclusion(self):
        obj, nrm = self._scene()
        hand = np.array([[0.004, 0, 0]])
        cm = extract_contact_map(obj, nrm, hand, tau=0.005)
        assert len(cm) == 1
        np.testing.assert_array_equal(cm.points[0], [0, 0, 0])

    def test_far_hand_empty(self):
        obj, nrm = self._scene()
        cm = extract_contact_map(obj, nrm, [[100, 100, 100]], tau=0.005)
        assert len(cm) == 0

    def test_subset_and_monotone_in_tau(self):
        rng = np.random.default_rng(5)
        obj = rng.uniform(-1, 1, (200, 3))
        nrm = np.tile([0.0, 0.0, 1.0], (200, 1))
        hand = rng.uniform(-1, 1, (5, 3))
        small = extract_contact_map(obj, nrm, hand, tau=0.3)
        big = extract_contact_map(obj, nrm, hand, tau=0.6)
        obj_rows = {tuple(p) for p in obj}
        small_rows = {tuple(p) for p in small.points}
        big_rows = {tuple(p) for p in big.points}
        assert small_rows <= big_rows <= obj_rows

    def test_bad_tau(self):
        obj, nrm = self._scene()
        with pytest.raises(InputError):
            extract_contact_map(obj, nrm, [[0, 0, 0]], tau=0.0)

    def test_normals_must_be_unit(self):
        with pytest.raises(InputError):
            ContactMap(np.array([[0.0, 0, 0]]), np.array([[0.0, 0, 2]]))


class TestFPS:
    def test_k_equals_n_returns_all(self):
        pts = np.random.default_rng(1).standard_normal((10, 3))
        idx = farthest_point_sample(pts, 10)
        assert sorted(idx) == list(range(10))

    def test_square_corners(self):
        # center is never picked before the four corners
        pts = np.array([
            [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0.5, 0.5, 0],
        ], float)
        idx = farthest_point_sample(pts, 4)
        assert sorted(idx) == [0, 1, 2, 3]

    def test_k1_is_farthest_from_centroid(self):
        pts = np.array([[0, 0, 0], [1, 0, 0], [10, 0, 0]], float)
        centroid = pts.mean(axis=0)
        expected = int(np.argmax(np.linalg.norm(pts - centroid, axis=1)))
        assert farthest_point_sample(pts, 1) == [expected]

    def test_deterministic(self):
        pts = np.random.default_rng(2).standard_normal((64, 3))
        assert farthest_point_sample(pts, 16) == farthest_point_sample(pts, 16)

    @pytest.mark.parametrize("k", [0, 11])
    def test_bounds(self, k):
        pts = np.random.default_rng(3).standard_normal((10, 3))
        with pytest.raises(BoundsError):
            farthest_point_sample(pts, k)
