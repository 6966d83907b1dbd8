"""Covariate vector C(t) and the hourly partition used to integrate over it.

``C(t) = [1, dow, am, pm, protest, team_a, team_b]`` where ``dow`` is the
local day of week (0 = Monday), ``am``/``pm`` flag the local half-day and the
three event flags are set for the whole local civil date.

Calendar CSV header (exact)::

    date,protest,team_a,team_b
"""

import csv
import io
from dataclasses import dataclass
from datetime import date, timedelta
from zoneinfo import ZoneInfo

import numpy as np

from .errors import DataError
from .events import DEFAULT_EPOCH, DEFAULT_TZ, epoch_instant

COVARIATE_NAMES = ("intercept", "dow", "am", "pm", "protest", "team_a", "team_b")
N_COVARIATES = len(COVARIATE_NAMES)
CALENDAR_HEADER = ("date", "protest", "team_a", "team_b")
HOUR = 3600.0


@dataclass(frozen=True)
class CovariateCalendar:
    protest_dates: frozenset = frozenset()
    team_a_dates: frozenset = frozenset()
    team_b_dates: frozenset = frozenset()
    timezone: str = DEFAULT_TZ
    epoch: str = DEFAULT_EPOCH

    @property
    def zone(self):
        return ZoneInfo(self.timezone)

    @property
    def origin(self):
        return epoch_instant(self.epoch, self.timezone)

    def local(self, t):
        return (self.origin + timedelta(seconds=float(t))).astimezone(self.zone)

    def seconds_of(self, when):
        """Dataset seconds of an aware or local-naive datetime."""
        if when.tzinfo is None:
            when = when.replace(tzinfo=self.zone)
        return (when - self.origin).total_seconds()


def covariate_vector(cal, t):
    loc = cal.local(t)
    d = loc.date()
    am = 1.0 if loc.hour < 12 else 0.0
    return np.array([
        1.0,
        float(loc.weekday()),
        am,
        1.0 - am,
        float(d in cal.protest_dates),
        float(d in cal.team_a_dates),
        float(d in cal.team_b_dates),
    ])


def hour_floor(cal, t):
    """Start (dataset seconds) of the local clock hour containing ``t``."""
    loc = cal.local(t).replace(minute=0, second=0, microsecond=0)
    return cal.seconds_of(loc)


@dataclass(frozen=True)
class Partition:
    """Cells ``[edges[k], edges[k+1]]`` with the covariates of each cell.

    Interior edges sit on local hour boundaries, so C(t) is constant inside
    every cell.
    """

    edges: np.ndarray
    covariates: np.ndarray

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def midpoints(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def __len__(self):
        return self.edges.shape[0] - 1

    def cell_of(self, times):
        idx = np.searchsorted(self.edges, np.asarray(times, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self) - 1)


def hourly_partition(cal, t_a, t_b):
    if not t_a < t_b:
        raise ValueError(f"hourly_partition needs t_a < t_b, got [{t_a}, {t_b}]")
    first = hour_floor(cal, t_a)
    if first <= t_a:
        first += HOUR
    # absolute one-hour steps keep local alignment for whole-hour UTC offsets
    inner = np.arange(first, t_b, HOUR)
    edges = np.concatenate(([float(t_a)], inner, [float(t_b)]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    cov = np.array([covariate_vector(cal, m) for m in mids])
    return Partition(edges, cov.reshape(-1, N_COVARIATES))


def covariate_matrix(cal, times):
    """Rows of C(t) for many times, computed once per hour cell."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.zeros((0, N_COVARIATES))
    lo, hi = float(times.min()), float(times.max())
    part = hourly_partition(cal, lo, hi + 1.0)
    return part.covariates[part.cell_of(times)]


def parse_calendar(csv_text, timezone=DEFAULT_TZ, epoch=DEFAULT_EPOCH):
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty calendar file", line=1) from None
    if tuple(h.strip() for h in header) != CALENDAR_HEADER:
        raise DataError(f"expected header {','.join(CALENDAR_HEADER)}", line=1)
    sets = ([], [], [])
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise DataError(f"expected 4 fields, got {len(row)}", line=line_no)
        try:
            day = date.fromisoformat(row[0].strip())
            flags = [int(x) for x in row[1:]]
        except ValueError as exc:
            raise DataError(str(exc), line=line_no) from None
        if any(f not in (0, 1) for f in flags):
            raise DataError("flags must be 0 or 1", line=line_no)
        for s, f in zip(sets, flags):
            if f:
                s.append(day)
    return CovariateCalendar(frozenset(sets[0]), frozenset(sets[1]), frozenset(sets[2]), timezone, epoch)


def format_calendar(cal, start=None, end=None):
    """Calendar CSV. Without a range only flagged dates are written."""
    flagged = cal.protest_dates | cal.team_a_dates | cal.team_b_dates
    if start is not None and end is not None:
        days = [start + timedelta(days=k) for k in range((end - start).days + 1)]
    else:
        days = sorted(flagged)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CALENDAR_HEADER)
    for d in days:
        w.writerow([d.isoformat(), int(d in cal.protest_dates), int(d in cal.team_a_dates), int(d in cal.team_b_dates)])
    return buf.getvalue()


def read_calendar(path, timezone=DEFAULT_TZ, epoch=DEFAULT_EPOCH):
    with open(path, encoding="utf-8") as fh:
        return parse_calendar(fh.read(), timezone, epoch)
