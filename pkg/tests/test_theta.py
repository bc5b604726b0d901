import math
import unittest

import numpy as np
from numpy.testing import assert_allclose

from comass import diagonal_jacobian
from exterior import NForm, evaluate, wedge_covectors
from frames import svd_frame, tangent_normal_data
from gallery import case_seed, seeded_rng
from maps import builtin_map, jacobian
from theta import (
    ROUTE_CODIM2,
    ROUTE_G,
    ROUTE_H,
    ROUTE_SVD,
    ROUTE_SVD_COORDS,
    max_route_deviation,
    mixed_frame_value,
    psi_ell,
    theta_at,
    theta_codim2,
    theta_g,
    theta_h,
    theta_routes,
    theta_svd,
    theta_svd_coords,
    volume_form,
)


def random_jacobian(rng):
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 4))
    return rng.uniform(-2.0, 2.0, (m, n))


class RouteAgreementTest(unittest.TestCase):
    def test_routes_agree(self):
        rng = seeded_rng("theta.routes")
        for i in range(500):
            with self.subTest(seed=case_seed("theta.routes"), case=i):
                A = random_jacobian(rng)
                routes = theta_routes(A)
                self.assertEqual(ROUTE_CODIM2 in routes, A.shape[0] == 2)
                self.assertLessEqual(max_route_deviation(routes), 1e-9)
                if A.shape[0] == 2:
                    self.assertLessEqual(routes[ROUTE_CODIM2].form.max_abs_diff(routes[ROUTE_H].form), 1e-10)

    def test_restriction_is_volume(self):
        rng = seeded_rng("theta.restriction")
        for i in range(500):
            with self.subTest(seed=case_seed("theta.restriction"), case=i):
                A = random_jacobian(rng)
                fr = svd_frame(A)
                T = fr.oriented_tangent()
                self.assertAlmostEqual(evaluate(theta_h(A).form, T), 1.0, delta=1e-9)
                self.assertAlmostEqual(evaluate(theta_svd(fr).form, T), 1.0, delta=1e-9)

    def test_no_single_normal_component(self):
        # Θ sobre (n−1) tangentes y una normal da cero
        rng = seeded_rng("theta.single_normal")
        for i in range(200):
            with self.subTest(seed=case_seed("theta.single_normal"), case=i):
                A = random_jacobian(rng)
                m, n = A.shape
                td = tangent_normal_data(A)
                th = theta_h(A).form
                for a in range(m):
                    for j in range(n):
                        frame = np.array(td.L)
                        frame[:, j] = td.L_perp[:, a]
                        self.assertLessEqual(abs(evaluate(th, frame)), 1e-10)

    def test_mixed_frame_values(self):
        rng = seeded_rng("theta.mixed")
        for i in range(60):
            with self.subTest(seed=case_seed("theta.mixed"), case=i):
                A = random_jacobian(rng)
                fr = svd_frame(A)
                th = theta_h(A)
                for ell in range(1, min(A.shape) + 1):
                    expected = (ell - 1) * (-1) ** (ell - 1) * float(np.prod(fr.lambdas[:ell]))
                    self.assertAlmostEqual(mixed_frame_value(fr, th, ell), expected, delta=1e-9)
                with self.assertRaises(ValueError):
                    mixed_frame_value(fr, th, min(A.shape) + 1)

    def test_series_from_psi(self):
        rng = seeded_rng("theta.psi")
        for i in range(30):
            with self.subTest(seed=case_seed("theta.psi"), case=i):
                A = random_jacobian(rng)
                fr = svd_frame(A)
                total = psi_ell(fr, 0)
                for ell in range(2, fr.n + 1):
                    total = total - psi_ell(fr, ell) * ((-1) ** ell * (ell - 1) / math.factorial(ell))
                self.assertLessEqual((total * fr.orientation).max_abs_diff(theta_svd(fr).form), 1e-11)
        with self.assertRaises(ValueError):
            psi_ell(svd_frame(np.eye(2)), 3)


class ClosedFormTest(unittest.TestCase):
    def test_rank_two(self):
        lam = (1.3, 0.7)
        A = diagonal_jacobian(lam, 4, 3)
        fr = svd_frame(A)
        self.assertEqual(fr.rank_r, 2)
        w = fr.coframe()
        closed = (wedge_covectors(w[[0, 1, 2, 3]])
                  - wedge_covectors(w[[4, 5, 2, 3]]) * (lam[0] * lam[1])) * fr.orientation
        self.assertLessEqual(theta_svd(fr).form.max_abs_diff(closed), 1e-12)
        self.assertLessEqual(theta_h(A).form.max_abs_diff(closed), 1e-12)

    def test_rank_three(self):
        l1, l2, l3 = 1.2, 0.8, 0.5
        A = diagonal_jacobian((l1, l2, l3), 4, 3)
        fr = svd_frame(A)
        self.assertEqual(fr.rank_r, 3)
        w = fr.coframe()
        closed = (
            wedge_covectors(w[[0, 1, 2, 3]])
            - wedge_covectors(w[[4, 5, 2, 3]]) * (l1 * l2)
            - wedge_covectors(w[[0, 5, 6, 3]]) * (l2 * l3)
            - wedge_covectors(w[[4, 1, 6, 3]]) * (l1 * l3)
            + wedge_covectors(w[[4, 5, 6, 3]]) * (2 * l1 * l2 * l3)
        ) * fr.orientation
        self.assertLessEqual(theta_svd(fr).form.max_abs_diff(closed), 1e-12)
        self.assertLessEqual(theta_h(A).form.max_abs_diff(closed), 1e-12)


class HandExampleTest(unittest.TestCase):
    def test_zero_map_is_volume(self):
        for n, m in ((1, 1), (2, 3), (3, 2)):
            with self.subTest(n=n, m=m):
                routes = theta_routes(np.zeros((m, n)))
                for name, t in routes.items():
                    self.assertLessEqual(t.form.max_abs_diff(volume_form(n, m)), 1e-15, name)

    def test_curve_in_plane(self):
        # n = m = 1: Θ es el covector tangente unitario (dx + c dy)/√(1+c²)
        for c in (-2.0, 0.5):
            with self.subTest(c=c):
                s = math.sqrt(1.0 + c * c)
                expected = NForm.covector([1.0 / s, c / s])
                for name, t in theta_routes(np.array([[c]])).items():
                    self.assertLessEqual(t.form.max_abs_diff(expected), 1e-14, name)

    def test_identity_holomorphic(self):
        # dF = I: Θ = dx1∧dy2 - dx2∧dy1
        F = builtin_map("holomorphic_square", [1.0])
        for route in (ROUTE_H, ROUTE_G, ROUTE_SVD, ROUTE_SVD_COORDS, ROUTE_CODIM2):
            with self.subTest(route=route):
                t = theta_at(F, (1.0, 0.0), route)
                self.assertAlmostEqual(t.form.coefficient((0, 3)), 1.0, places=12)
                self.assertAlmostEqual(t.form.coefficient((1, 2)), -1.0, places=12)
                self.assertAlmostEqual(t.form.coefficient((0, 1)), 0.0, places=12)
                self.assertAlmostEqual(t.form.coefficient((2, 3)), 0.0, places=12)
                assert_allclose(t.base_point, [1.0, 0.0])
                self.assertEqual((t.n, t.m), (2, 2))

    def test_codim2_matches_gradients(self):
        rng = seeded_rng("theta.codim2")
        for i in range(30):
            with self.subTest(seed=case_seed("theta.codim2"), case=i):
                n = int(rng.integers(1, 5))
                A = rng.uniform(-1.5, 1.5, (2, n))
                self.assertLessEqual(theta_codim2(A[0], A[1]).form.max_abs_diff(theta_g(A).form), 1e-10)
                self.assertLessEqual(theta_svd_coords(svd_frame(A)).form.max_abs_diff(theta_h(A).form), 1e-9)
        with self.assertRaises(ValueError):
            theta_codim2([1.0, 0.0], [1.0])


class ThetaAtTest(unittest.TestCase):
    def test_route_errors(self):
        F = builtin_map("scherk")
        with self.assertRaises(ValueError):
            theta_at(F, (0.1, 0.1), ROUTE_CODIM2)
        with self.assertRaises(ValueError):
            theta_at(F, (0.1, 0.1), "euler")

    def test_uses_map_jacobian(self):
        F = builtin_map("scherk")
        x = (0.3, 0.2)
        t = theta_at(F, x, ROUTE_G)
        self.assertLessEqual(t.form.max_abs_diff(theta_h(jacobian(F, x)).form), 1e-12)
        self.assertEqual(t.route, ROUTE_G)


if __name__ == "__main__":
    unittest.main()
