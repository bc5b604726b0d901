from __future__ import annotations

import io
import sys
import time
import unittest
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from gallery import GLOBAL_SEED

ROOT = Path(__file__).resolve().parent
TESTS_DIR = ROOT / "tests"

SUITES: dict[str, tuple[str, ...]] = {
    "algebra": ("test_exterior", "test_maps"),
    "frames": ("test_frames",),
    "theta": ("test_theta",),
    "minimality": ("test_minimality", "test_gallery"),
    "comass": ("test_comass",),
    "certify": ("test_certify", "test_app", "test_settings", "test_suite", "test_run_log"),
}


class _RecordingResult(unittest.TextTestResult):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.records: list[tuple[str, str, float, str]] = []
        self._t0 = 0.0

    def startTest(self, test):
        self._t0 = time.perf_counter()
        super().startTest(test)

    def _rec(self, test, status: str, detail: str = "") -> None:
        self.records.append((test.id(), status, time.perf_counter() - self._t0, detail))

    def addSuccess(self, test):
        super().addSuccess(test)
        self._rec(test, "ok")

    def addFailure(self, test, err):
        super().addFailure(test, err)
        self._rec(test, "failure", self.failures[-1][1])

    def addError(self, test, err):
        super().addError(test, err)
        self._rec(test, "error", self.errors[-1][1])

    def addSkip(self, test, reason):
        super().addSkip(test, reason)
        self._rec(test, "skipped", reason)

    def addSubTest(self, test, subtest, err):
        super().addSubTest(test, subtest, err)
        if err is not None:
            bucket = self.failures if issubclass(err[0], test.failureException) else self.errors
            self._rec(subtest, "failure" if bucket is self.failures else "error", bucket[-1][1])


@dataclass
class SuiteResult:
    tag: str
    tests_run: int
    failures: int
    errors: int
    skipped: int
    seconds: float
    seed: int = GLOBAL_SEED
    records: list[tuple[str, str, float, str]] = field(default_factory=list)
    output: str = ""

    @property
    def ok(self) -> bool:
        return self.failures == 0 and self.errors == 0

    def summary(self) -> str:
        state = "OK" if self.ok else "FALLÓ"
        return (
            f"[{state}] suite '{self.tag}': {self.tests_run} tests, {self.failures} fallas, "
            f"{self.errors} errores, {self.skipped} omitidos ({self.seconds:.1f}s, seed={self.seed})"
        )


def _write_junit(res: SuiteResult, path: str | Path) -> None:
    suite = ET.Element(
        "testsuite",
        name=f"calibra.{res.tag}",
        tests=str(res.tests_run),
        failures=str(res.failures),
        errors=str(res.errors),
        skipped=str(res.skipped),
        time=f"{res.seconds:.3f}",
    )
    props = ET.SubElement(suite, "properties")
    ET.SubElement(props, "property", name="seed", value=str(res.seed))
    for test_id, status, secs, detail in res.records:
        cls, _, name = test_id.rpartition(".")
        case = ET.SubElement(suite, "testcase", classname=cls, name=name, time=f"{secs:.3f}")
        if status in ("failure", "error"):
            el = ET.SubElement(case, status, message=detail.strip().splitlines()[-1] if detail.strip() else status)
            el.text = detail
        elif status == "skipped":
            ET.SubElement(case, "skipped", message=detail)
    ET.ElementTree(suite).write(str(path), encoding="utf-8", xml_declaration=True)


def run_suite(tag: str, junit_path: str | Path | None = None, verbosity: int = 1) -> SuiteResult:
    if tag not in SUITES:
        raise ValueError(f"tag desconocido {tag!r}; opciones: {', '.join(SUITES)}")
    for p in (str(ROOT), str(TESTS_DIR)):
        if p not in sys.path:
            sys.path.insert(0, p)

    loader = unittest.TestLoader()
    tests = loader.loadTestsFromNames(SUITES[tag])
    stream = io.StringIO()
    runner = unittest.TextTestRunner(stream=stream, verbosity=verbosity, resultclass=_RecordingResult)
    t0 = time.perf_counter()
    result = runner.run(tests)
    res = SuiteResult(
        tag=tag,
        tests_run=result.testsRun,
        failures=len(result.failures),
        errors=len(result.errors),
        skipped=len(result.skipped),
        seconds=time.perf_counter() - t0,
        records=list(result.records),
        output=stream.getvalue(),
    )
    if junit_path:
        _write_junit(res, junit_path)
    return res
