import json
import subprocess
import sys
import time

import pytest

from iwatsuka.fiber import SolverConfig, solve_slice
from iwatsuka.profiles import FieldProfile, PotentialBeta
from iwatsuka.verification import CRITERIA, ExampleSet, CriterionResult, run_criterion

from conftest import ACCEPTANCE_LINES

CFG = SolverConfig()


@pytest.fixture(scope="module")
def examples():
    # compile the numba kernels before anything is timed
    solve_slice(PotentialBeta(FieldProfile.constant(1.0)), 0.0, 1, CFG)
    return ExampleSet()


def _record(result: CriterionResult):
    line = result.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    return result


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA], ids=[f"c{c[0]:02d}_{c[1]}" for c in CRITERIA])
def test_criterion(number, examples):
    result = _record(run_criterion(number, examples, CFG))
    assert result.passed, json.dumps(result.as_dict()["metrics"], indent=1)


def _verify_all(out):
    proc = subprocess.run([sys.executable, "-m", "iwatsuka.cli", "verify-all", "--out", str(out)],
                          capture_output=True, text=True, timeout=900)
    return proc.returncode, (out / "acceptance.json").read_bytes()


def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    code_a, doc_a = _verify_all(tmp_path / "a")
    code_b, doc_b = _verify_all(tmp_path / "b")
    same = doc_a == doc_b
    result = _record(CriterionResult(11, "determinism", code_a == 0 and code_b == 0 and same,
                                     {"exit_codes": [code_a, code_b], "identical": same},
                                     time.perf_counter() - t0))
    assert result.passed, result.metrics
    assert json.loads(doc_a)["passed"] is True
