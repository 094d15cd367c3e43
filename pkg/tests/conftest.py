import numpy as np
import pytest


def central_diff(fun, x, h=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = fun(x)
        flat[i] = old - h
        fm = fun(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2 * h)
    return g


def assert_grad_matches(loss, x, rtol=1e-5):
    g = loss.grad(x)
    fd = central_diff(loss.value, x.copy())
    scale = max(1.0, float(np.abs(g).max()))
    err = float(np.abs(fd - g).max()) / scale
    assert err <= rtol, f"finite-difference mismatch {err:.3g}"
    return err


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; all lines are printed after the run."""
    def record(label, ok, detail):
        line = f"criterion {label:<4} {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[label] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")

    def key(label):
        num = "".join(c for c in label if c.isdigit())
        return int(num), label

    for label in sorted(_CRITERIA, key=key):
        terminalreporter.write_line(_CRITERIA[label])
