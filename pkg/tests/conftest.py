from datetime import date, timedelta

import numpy as np
import pytest

from leadlag.series import AlignedPair
from leadlag.synth import weekday_calendar


def make_pair(q, t, entity_id="X", start=date(2011, 1, 3)):
    q = np.asarray(q, dtype=float)
    return AlignedPair(entity_id, weekday_calendar(len(q), start), q, np.asarray(t, dtype=float))


def days(start, n):
    return [start + timedelta(days=i) for i in range(n)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
