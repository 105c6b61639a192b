import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from xlirony.corpus import Dataset, Tweet  # noqa: E402


def make_ds(rows, lang="en"):
    """Dataset from (text, label) pairs or (text, label, lang) triples."""
    tweets = []
    for i, r in enumerate(rows):
        text, label = r[0], r[1]
        tl = r[2] if len(r) > 2 else lang
        tweets.append(Tweet(f"t{i:04d}", text, tl, label))
    return Dataset(tuple(tweets), lang)


@pytest.fixture(scope="session")
def world():
    from xlirony.synthetic import make_world
    return make_world(seed=0)


@pytest.fixture(scope="session")
def world_dir(tmp_path_factory, world):
    from xlirony.synthetic import write_world
    d = tmp_path_factory.mktemp("world")
    write_world(world, d)
    return d


def write_csv(path, rows, header="id,lang,label,text"):
    path.write_text(header + "\n" + "".join(r + "\n" for r in rows), encoding="utf-8")
    return path


# --- suite-wide bookkeeping --------------------------------------------------

ACCEPTANCE_LINES = []
_ORTHO = {"fits": 0, "worst": 0.0}


def pytest_configure(config):
    """Record the orthogonality error of every Procrustes solve made by any test."""
    import xlirony.align as align

    original = align.procrustes

    def tracked(X, Y):
        W = original(X, Y)
        _ORTHO["fits"] += 1
        _ORTHO["worst"] = max(_ORTHO["worst"], align.orthogonality_error(W))
        return W

    align.procrustes = tracked


def orthogonality_record():
    return dict(_ORTHO)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    tr = terminalreporter
    if ACCEPTANCE_LINES:
        tr.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            tr.write_line(line)
    if _ORTHO["fits"]:
        ok = _ORTHO["worst"] <= 1e-8
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  orthogonality over the whole session: "
                      f"{_ORTHO['fits']} fitted maps, worst ||W W^T - I||_F = {_ORTHO['worst']:.2e} (<= 1e-08)")


def pytest_sessionfinish(session, exitstatus):
    if _ORTHO["worst"] > 1e-8 and session.exitstatus == 0:
        session.exitstatus = 1
