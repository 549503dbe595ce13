import time

import pytest


@pytest.fixture
def report(capsys):
    """Print one ``PASS``/``FAIL`` line for an acceptance criterion, then return the verdict."""
    start = time.perf_counter()

    def emit(number, name, passed, detail=""):
        elapsed = time.perf_counter() - start
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'} #{number} {name}: {detail} ({elapsed:.1f} s)")
        return passed

    emit.elapsed = lambda: time.perf_counter() - start
    return emit
