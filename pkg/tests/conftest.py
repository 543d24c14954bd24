from __future__ import annotations

import pytest
from hypothesis import settings

from focksobolev.numerics import DEFAULT_PRECISION_BITS, configure_precision

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _reset_precision(monkeypatch):
    # mp.prec is process-global; the CLI and some tests change it
    monkeypatch.delenv("FS_PRECISION_BITS", raising=False)
    configure_precision(DEFAULT_PRECISION_BITS)
    yield
    configure_precision(DEFAULT_PRECISION_BITS)
