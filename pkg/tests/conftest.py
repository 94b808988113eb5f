import numpy as np
import pytest

from membrane_bending.mesh import build_icosphere


@pytest.fixture(scope="session")
def spheres():
    """Unit icospheres keyed by triangle count."""
    return {20 * 4**k: build_icosphere(k) for k in range(5)}


def perturbed(mesh, amplitude, seed):
    rng = np.random.default_rng(seed)
    return mesh.with_vertices(mesh.vertices * (1.0 + amplitude * rng.standard_normal((mesh.n_vertices, 1))))


@pytest.fixture
def rough():
    """Radially perturbed level-2 icosphere factory: ``rough(seed, amplitude=0.05)``."""
    base = build_icosphere(2)
    return lambda seed, amplitude=0.05: perturbed(base, amplitude, seed)


# ---------------------------------------------------------------------------
# acceptance report: one line per criterion at the end of the session

_ACCEPTANCE: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (rep.when != "call" and rep.outcome == "passed"):
        return
    number, title = marker.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "status": [], "detail": []})
    entry["status"].append(rep.outcome)
    entry["detail"] += [str(v) for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        if "failed" in e["status"]:
            status = "FAIL"
        elif all(s == "skipped" for s in e["status"]):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"[{status}] {number:2d}. {e['title']}: {'; '.join(e['detail'])}")
