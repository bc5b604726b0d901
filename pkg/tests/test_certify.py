import json
import math
import tempfile
import unittest
from pathlib import Path

from certify import (
    CALIBRATED_CRUDE,
    CALIBRATED_REFINED,
    CERTIFIED,
    COMASS_BOUND_ONLY,
    NOT_CERTIFIED,
    NOT_MINIMAL,
    UNDEFINED,
    VERDICTS,
    CertifyOptions,
    certify_grid,
    csv_header,
    decide,
    emit_report,
    grid_points,
    parse_grid,
    parse_report,
    report_csv,
    report_json,
)
from gallery import case_seed, seeded_rng
from maps import DomainError, builtin_map

SQUARE_GRID = ((-0.5, 0.5, 5), (-0.5, 0.5, 5))


class GridTest(unittest.TestCase):
    def test_parse_grid(self):
        self.assertEqual(parse_grid("x1=-1:1:3,x2=0:1:2", 2), ((-1.0, 1.0, 3), (0.0, 1.0, 2)))
        self.assertEqual(parse_grid("x2=0:1:2, x1=-1:1:3", 2), ((-1.0, 1.0, 3), (0.0, 1.0, 2)))
        self.assertEqual(parse_grid("x1=0.5:0.5:1", 1), ((0.5, 0.5, 1),))

    def test_parse_grid_errors(self):
        for text in ("x1=0:1:2", "x1=0:1:2,x1=0:1:2", "x1=0:1:2,x3=0:1:2", "x1=1:0:2,x2=0:1:1",
                     "x1=0:1:-1,x2=0:1:1", "x1=a:1:2,x2=0:1:1", "x1=0:1:2.5,x2=0:1:1", "y1=0:1:2,x2=0:1:1", ""):
            with self.subTest(text=text):
                with self.assertRaises(ValueError):
                    parse_grid(text, 2)

    def test_grid_points(self):
        pts = grid_points(((0.0, 1.0, 3), (-1.0, 1.0, 2)))
        self.assertEqual(len(pts), 6)
        self.assertEqual(pts[0], (0.0, -1.0))
        self.assertEqual(pts[1], (0.0, 1.0))
        self.assertEqual(pts[-1], (1.0, 1.0))
        self.assertEqual(grid_points(((0.0, 0.0, 0), (0.0, 1.0, 2))), [])


class DecideTest(unittest.TestCase):
    def test_table(self):
        opts = CertifyOptions()
        self.assertEqual(decide(1e-3, True, True, 0.5, opts), NOT_MINIMAL)
        self.assertEqual(decide(math.nan, True, True, 0.5, opts), NOT_MINIMAL)
        self.assertEqual(decide(0.0, True, True, 1.0, opts), CALIBRATED_CRUDE)
        self.assertEqual(decide(1e-7, False, True, 1.0, opts), CALIBRATED_REFINED)
        self.assertEqual(decide(0.0, False, False, 1.0 + 1e-13, opts), COMASS_BOUND_ONLY)
        self.assertEqual(decide(0.0, False, False, 1.5, opts), NOT_CERTIFIED)
        loose = CertifyOptions(minimality_tol=1e-2)
        self.assertEqual(decide(1e-3, False, False, 1.5, loose), NOT_CERTIFIED)


class CertifyGridTest(unittest.TestCase):
    def test_holomorphic_square_is_calibrated(self):
        rep = certify_grid(builtin_map("holomorphic_square", [1.0]), SQUARE_GRID)
        self.assertEqual(len(rep.points), 25)
        self.assertEqual(rep.global_rank, 2)
        self.assertEqual(rep.counts[CALIBRATED_CRUDE], 25)
        self.assertEqual(rep.global_counts[CALIBRATED_CRUDE], 25)
        self.assertAlmostEqual(rep.config["epsilon"]["2"], 1.0, delta=1e-9)
        center = rep.points[12]
        self.assertEqual(center.point, (0.0, 0.0))
        self.assertEqual(center.rank_r, 0)
        for p in rep.points:
            self.assertLessEqual(p.upper, 1.0 + 1e-12)
            self.assertLessEqual(p.mgs_norm, 1e-12)
            self.assertIsNone(p.lower)
        self.assertTrue(any(CALIBRATED_CRUDE in line for line in rep.summary_lines()))

    def test_paraboloid_is_not_minimal(self):
        rep = certify_grid(builtin_map("paraboloid"), ((0.2, 0.8, 3), (0.2, 0.8, 3)))
        self.assertEqual(rep.counts[NOT_MINIMAL], 9)
        self.assertEqual(rep.global_counts[NOT_MINIMAL], 9)

    def test_expanding_map_is_not_certified(self):
        # λ1 = λ2 = e^{x1} > 1
        rep = certify_grid(builtin_map("holomorphic_exp"), ((0.3, 0.5, 2), (-0.2, 0.2, 2)))
        self.assertEqual(rep.counts[NOT_CERTIFIED], 4)
        for p in rep.points:
            self.assertGreater(p.upper, 1.0)

    def test_boundary_point_is_undefined(self):
        rep = certify_grid(builtin_map("scherk"), ((0.0, math.pi / 2, 2), (0.0, 0.0, 1)))
        inner, edge = rep.points
        self.assertEqual(inner.verdict, CALIBRATED_CRUDE)
        self.assertEqual(edge.verdict, UNDEFINED)
        self.assertEqual(edge.global_verdict, UNDEFINED)
        self.assertTrue(edge.error)
        row = report_csv(rep).splitlines()[2].split(",")
        self.assertEqual(row[3], "nan")
        self.assertEqual(row[-1], UNDEFINED)

    def test_lower_bound_column(self):
        opts = CertifyOptions(with_lower=True, restarts=2)
        rep = certify_grid(builtin_map("holomorphic_square", [1.0]), ((0.2, 0.5, 2), (0.1, 0.1, 1)), opts)
        for p in rep.points:
            self.assertLessEqual(p.lower, 1.0 + 1e-6)
        line = report_csv(rep).splitlines()[1].split(",")
        self.assertNotEqual(line[csv_header(2, 2).index("comass_lower")], "")

    def test_grid_errors(self):
        with self.assertRaises(DomainError):
            certify_grid(builtin_map("scherk"), ((-2.0, 2.0, 3), (0.0, 0.0, 1)))
        with self.assertRaises(DomainError):
            certify_grid(builtin_map("holomorphic_square"), ((-1.5, 0.0, 3), (0.0, 0.0, 1)))
        with self.assertRaises(ValueError):
            certify_grid(builtin_map("scherk"), ((0.0, 1.0, 3),))

    def test_empty_grid(self):
        rep = certify_grid(builtin_map("scherk"), ((0.0, 0.0, 0), (0.0, 1.0, 3)))
        self.assertEqual(rep.points, [])
        self.assertEqual(rep.global_rank, 0)
        self.assertEqual(report_csv(rep), ",".join(csv_header(2, 1)) + "\n")


class ReportTest(unittest.TestCase):
    def setUp(self):
        self.F = builtin_map("holomorphic_square", [1.0])

    def test_csv_header(self):
        self.assertEqual(
            csv_header(2, 2),
            ["x_1", "x_2", "rank", "lambda_1", "lambda_2", "max_pair_product", "mgs_norm", "dtheta_norm",
             "comass_upper", "comass_lower", "pointwise_verdict", "global_verdict"],
        )
        self.assertEqual(len(csv_header(3, 1)), 3 + 1 + 1 + 7)

    def test_csv_is_byte_stable(self):
        a = report_csv(certify_grid(self.F, SQUARE_GRID))
        b = report_csv(certify_grid(self.F, SQUARE_GRID, CertifyOptions(threads=2)))
        self.assertEqual(a, b)
        self.assertEqual(len(a.splitlines()), 26)

    def test_json_round_trip(self):
        rep = certify_grid(builtin_map("scherk"), ((0.0, math.pi / 2, 3), (-0.3, 0.3, 2)))
        text = report_json(rep)
        doc = json.loads(text)
        self.assertEqual(doc["n"], 2)
        self.assertEqual(len(doc["points"]), 6)
        back = parse_report(text)
        self.assertEqual(report_csv(back), report_csv(rep))
        self.assertEqual(back.global_rank, rep.global_rank)
        with self.assertRaises(ValueError):
            parse_report('{"n": 2}')

    def test_emit_files(self):
        rep = certify_grid(self.F, ((0.0, 0.5, 2), (0.0, 0.5, 2)))
        with tempfile.TemporaryDirectory() as td:
            out = Path(td)
            emit_report(rep, out / "r.csv", "csv")
            self.assertEqual((out / "r.csv").read_text(encoding="utf-8"), report_csv(rep))
            emit_report(rep, out / "r.json", "json")
            self.assertEqual(parse_report((out / "r.json").read_text(encoding="utf-8")).counts, rep.counts)
            with self.assertRaises(ValueError):
                emit_report(rep, out / "r.txt", "txt")

    def test_xlsx(self):
        from openpyxl import load_workbook

        rep = certify_grid(self.F, ((0.0, 0.5, 2), (0.0, 0.5, 2)))
        with tempfile.TemporaryDirectory() as td:
            p = Path(td) / "r.xlsx"
            emit_report(rep, p, "xlsx")
            wb = load_workbook(p)
            ws = wb.active
            self.assertEqual(ws.title, "Certificacion")
            self.assertEqual(ws.max_row, 5)
            self.assertEqual([c.value for c in ws[1]], csv_header(2, 2))
            self.assertEqual(ws.cell(row=2, column=len(csv_header(2, 2))).value, CALIBRATED_CRUDE)

    def test_full_square_grid(self):
        grid = ((-0.6, 0.6, 41), (-0.6, 0.6, 41))
        opts = CertifyOptions(seed=0)
        first = certify_grid(self.F, grid, opts)
        second = certify_grid(self.F, grid, opts)
        self.assertEqual(first.counts[CALIBRATED_CRUDE], 41 * 41)
        self.assertEqual(first.global_counts[CALIBRATED_CRUDE], 41 * 41)
        a, b = report_csv(first), report_csv(second)
        self.assertEqual(a.encode("utf-8"), b.encode("utf-8"))
        self.assertEqual(len(a.splitlines()), 41 * 41 + 1)


class MonotonicityTest(unittest.TestCase):
    def test_shrinking_never_worsens_verdict(self):
        rng = seeded_rng("certify.shrink")
        opts = CertifyOptions(with_dtheta=False)
        moved = 0
        for i in range(40):
            with self.subTest(seed=case_seed("certify.shrink"), case=i):
                n = int(rng.integers(2, 4))
                m = int(rng.integers(2, 4))
                A = rng.uniform(-1.5, 1.5, (m, n))
                origin = ((0.0, 0.0, 1),) * n
                s = float(rng.uniform(0.05, 0.95))
                base = certify_grid(builtin_map("linear", A.ravel().tolist(), n=n, m=m), origin, opts).points[0]
                small = certify_grid(builtin_map("linear", (s * A).ravel().tolist(), n=n, m=m), origin, opts).points[0]
                self.assertNotIn(base.verdict, (NOT_MINIMAL, UNDEFINED))
                self.assertLessEqual(VERDICTS.index(small.verdict), VERDICTS.index(base.verdict))
                self.assertLessEqual(small.upper, base.upper + 1e-12)
                if base.verdict in CERTIFIED:
                    self.assertIn(small.verdict, CERTIFIED)
                moved += small.verdict != base.verdict
        self.assertGreater(moved, 0)


if __name__ == "__main__":
    unittest.main()
