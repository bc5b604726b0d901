import unittest

import numpy as np
from numpy.testing import assert_allclose

from frames import (
    j_in_frame,
    j_map,
    j_map_projection,
    svd_frame,
    sylvester_check,
    tangent_normal_data,
)
from gallery import case_seed, seeded_rng


def random_jacobian(rng, n_max=4, m_max=3, scale=2.0):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    return rng.uniform(-scale, scale, (m, n))


class SvdFrameTest(unittest.TestCase):
    def test_frame_properties(self):
        rng = seeded_rng("frames.svd")
        for i in range(100):
            with self.subTest(seed=case_seed("frames.svd"), case=i):
                A = random_jacobian(rng)
                m, n = A.shape
                fr = svd_frame(A)
                self.assertLessEqual(fr.reconstruction_error(A), 1e-12)
                self.assertTrue(np.all(np.diff(fr.lambdas) <= 0))
                self.assertAlmostEqual(float(np.linalg.det(fr.v_basis)), 1.0, places=12)
                E = np.hstack([fr.tangent_frame, fr.normal_frame])
                assert_allclose(E.T @ E, np.eye(n + m), atol=1e-12)
                # tangente sobre el grafo, normal ortogonal a él
                T = fr.tangent_frame
                assert_allclose(T[n:], A @ T[:n], atol=1e-12)
                graph = np.vstack([np.eye(n), A])
                assert_allclose(graph.T @ fr.normal_frame, np.zeros((n, m)), atol=1e-11)
                self.assertEqual(fr.orientation, 1 if np.linalg.det(fr.u_basis) > 0 else -1)
                self.assertGreater(float(np.linalg.det(fr.oriented_tangent()[:n])), 0.0)
                assert_allclose(fr.coframe(), E.T)

    def test_zero_map(self):
        fr = svd_frame(np.zeros((2, 3)))
        self.assertEqual(fr.rank_r, 0)
        assert_allclose(fr.lambdas, [0.0, 0.0])
        assert_allclose(fr.u_basis, np.eye(3))
        assert_allclose(fr.v_basis, np.eye(2))
        assert_allclose(fr.tangent_frame[:3], np.eye(3))
        self.assertEqual(fr.orientation, 1)

    def test_rank_tolerance(self):
        fr = svd_frame(np.diag([1.0, 1e-13]))
        self.assertEqual(fr.rank_r, 1)
        fr = svd_frame(np.diag([3.0, 0.5]))
        self.assertEqual(fr.rank_r, 2)
        assert_allclose(fr.padded_lambdas(), [3.0, 0.5])
        fr = svd_frame(np.array([[2.0, 0.0, 0.0]]))
        self.assertEqual(fr.rank_r, 1)
        assert_allclose(fr.padded_lambdas(), [2.0, 0.0, 0.0])

    def test_pairing_survives_orientation_flip(self):
        # último λ no nulo pero bajo la tolerancia de rango
        rng = seeded_rng("frames.tiny_lambda")
        flipped = 0
        for i in range(60):
            with self.subTest(seed=case_seed("frames.tiny_lambda"), case=i):
                n = int(rng.integers(2, 5))
                m = int(rng.integers(2, n + 1))
                k = min(n, m)
                W, _ = np.linalg.qr(rng.normal(size=(m, m)))
                Z, _ = np.linalg.qr(rng.normal(size=(n, n)))
                lam = np.sort(rng.uniform(0.5, 2.0, k))[::-1]
                lam[-1] = 5e-10 * lam[0]
                S = np.zeros((m, n))
                S[range(k), range(k)] = lam
                A = W @ S @ Z.T
                fr = svd_frame(A)
                self.assertEqual(fr.rank_r, k - 1)
                self.assertAlmostEqual(float(np.linalg.det(fr.v_basis)), 1.0, places=12)
                for j in range(k):
                    resid = A @ fr.u_basis[:, j] - fr.lambdas[j] * fr.v_basis[:, j]
                    self.assertLessEqual(float(np.linalg.norm(resid)), 1e-13)
                self.assertLessEqual(fr.reconstruction_error(A), 1e-13)
                T = fr.tangent_frame
                assert_allclose(T[n:], A @ T[:n], atol=1e-13)
                if float(np.linalg.det(np.linalg.svd(A)[0])) < 0:
                    flipped += 1
        self.assertGreater(flipped, 0)

    def test_non_finite(self):
        with self.assertRaises(ValueError):
            svd_frame(np.array([[np.nan, 0.0]]))


class JMapTest(unittest.TestCase):
    def test_two_constructions_agree(self):
        rng = seeded_rng("frames.jmap")
        for i in range(1000):
            with self.subTest(seed=case_seed("frames.jmap"), case=i):
                A = random_jacobian(rng)
                assert_allclose(j_map(A), j_map_projection(A), atol=1e-10)

    def test_tangent_to_normal(self):
        rng = seeded_rng("frames.jmap_frame")
        for i in range(50):
            with self.subTest(seed=case_seed("frames.jmap_frame"), case=i):
                A = random_jacobian(rng)
                m, n = A.shape
                fr = svd_frame(A)
                J = j_map(A)
                expected = np.zeros((m, n))
                k = fr.lambdas.size
                expected[range(k), range(k)] = fr.lambdas
                assert_allclose(j_in_frame(fr, J), expected, atol=1e-11)
                assert_allclose(J @ fr.normal_frame, np.zeros((n + m, m)), atol=1e-11)

    def test_isometric_bases(self):
        rng = seeded_rng("frames.bases")
        A = rng.uniform(-2, 2, (3, 4))
        td = tangent_normal_data(A)
        assert_allclose(td.L.T @ td.L, np.eye(4), atol=1e-12)
        assert_allclose(td.L_perp.T @ td.L_perp, np.eye(3), atol=1e-12)
        assert_allclose(td.L.T @ td.L_perp, np.zeros((4, 3)), atol=1e-12)
        assert_allclose(td.g_metric, np.eye(4) + A.T @ A)
        assert_allclose(td.h_metric, np.eye(3) + A @ A.T)


class SylvesterTest(unittest.TestCase):
    def test_identities(self):
        rng = seeded_rng("frames.sylvester")
        for i in range(1000):
            with self.subTest(seed=case_seed("frames.sylvester"), case=i):
                n = int(rng.integers(1, 7))
                m = int(rng.integers(1, 7))
                S = rng.uniform(-1, 1, (m, n))
                self.assertLessEqual(sylvester_check(S), 1e-10)

    def test_zero_matrix(self):
        self.assertLessEqual(sylvester_check(np.zeros((2, 3))), 1e-15)


if __name__ == "__main__":
    unittest.main()
