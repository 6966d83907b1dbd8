"""Event data model, CSV ingestion and cascade assembly.

Events CSV header (exact)::

    event_id,parent_id,timestamp,followers,pos

An empty ``parent_id`` marks an original post. ``timestamp`` is ISO-8601
(with or without offset; naive values are read in the dataset timezone) or
integer Unix epoch seconds. Internally every time is seconds since the
dataset epoch, a civil datetime in the dataset timezone.
"""

import csv
import io
import logging
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone as dt_timezone
from functools import cached_property
from typing import Optional, Sequence
from zoneinfo import ZoneInfo

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

HEADER = ("event_id", "parent_id", "timestamp", "followers", "pos")
DEFAULT_EPOCH = "2019-05-23T00:00:00"
DEFAULT_TZ = "America/Bogota"


def epoch_instant(epoch, tz):
    """Aware datetime for a civil ``epoch`` (str or datetime) in ``tz``."""
    zone = ZoneInfo(tz)
    if isinstance(epoch, str):
        epoch = datetime.fromisoformat(epoch)
    if epoch.tzinfo is None:
        epoch = epoch.replace(tzinfo=zone)
    return epoch


def _parse_timestamp(text, zone):
    text = text.strip()
    if text.lstrip("-").isdigit():
        return datetime.fromtimestamp(int(text), tz=dt_timezone.utc)
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=zone)
    return ts


@dataclass(frozen=True)
class TweetEvent:
    event_id: str
    parent_id: Optional[str]
    time_s: float
    followers: int
    pos: Optional[int] = None

    def __post_init__(self):
        if self.time_s < 0:
            raise DataError(f"event {self.event_id}: negative time {self.time_s}")
        if self.followers < 0:
            raise DataError(f"event {self.event_id}: negative followers {self.followers}")
        if self.is_original and self.pos not in (1, 2, 3, 4, 5):
            raise DataError(f"original {self.event_id}: pos must be in 1..5, got {self.pos}")

    @property
    def is_original(self):
        return self.parent_id is None


@dataclass(frozen=True)
class Cascade:
    origin: TweetEvent
    retweets: tuple = ()

    def __post_init__(self):
        prev = self.origin.time_s
        for rt in self.retweets:
            if rt.parent_id != self.origin.event_id:
                raise DataError(f"retweet {rt.event_id} does not belong to {self.origin.event_id}")
            if rt.time_s < prev:
                raise DataError(f"cascade {self.origin.event_id} is not time-ordered at {rt.event_id}")
            prev = rt.time_s

    @property
    def members(self):
        """Original followed by its retweets: the contributor set of the excitation."""
        return (self.origin,) + tuple(self.retweets)

    def __len__(self):
        return len(self.retweets)


@dataclass(frozen=True)
class Dataset:
    """Cascades observed over ``[t_a, t_b]``, sorted by origin time.

    The ``*_arrays`` properties give the flat layout used by the kernels:
    members of cascade ``c`` (original first) occupy
    ``member_t[ptr[c]:ptr[c + 1]]``.
    """

    cascades: tuple
    t_a: float
    t_b: float
    dropped_orphans: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.t_a <= self.t_b:
            raise DataError(f"dataset window is empty: t_a={self.t_a} > t_b={self.t_b}")
        for c in self.cascades:
            last = c.retweets[-1].time_s if c.retweets else c.origin.time_s
            if c.origin.time_s < self.t_a or last > self.t_b:
                raise DataError(f"cascade {c.origin.event_id} lies outside [t_a, t_b] = [{self.t_a}, {self.t_b}]")

    @property
    def n_events(self):
        return sum(1 + len(c.retweets) for c in self.cascades)

    @cached_property
    def origin_times(self):
        return np.array([c.origin.time_s for c in self.cascades], dtype=np.float64)

    @cached_property
    def origin_pos(self):
        return np.array([c.origin.pos for c in self.cascades], dtype=np.int64)

    @cached_property
    def origin_followers(self):
        return np.array([c.origin.followers for c in self.cascades], dtype=np.float64)

    @cached_property
    def origin_ids(self):
        return tuple(c.origin.event_id for c in self.cascades)

    @cached_property
    def member_arrays(self):
        sizes = [1 + len(c.retweets) for c in self.cascades]
        ptr = np.zeros(len(sizes) + 1, dtype=np.int64)
        np.cumsum(sizes, out=ptr[1:])
        mt = np.array([m.time_s for c in self.cascades for m in c.members], dtype=np.float64)
        md = np.array([m.followers for c in self.cascades for m in c.members], dtype=np.float64)
        return ptr, mt, md

    @cached_property
    def event_times(self):
        """Sorted times of every event, originals and retweets."""
        return np.sort(self.member_arrays[1])

    def window(self, start, end):
        """Events in ``[start, end)`` as a new dataset over ``[start, end]``.

        Cascades keep only the retweets that fall inside the window and are
        dropped entirely when their origin lies outside it.
        """
        kept = []
        for c in self.cascades:
            if start <= c.origin.time_s < end:
                rts = tuple(r for r in c.retweets if r.time_s < end)
                kept.append(c if len(rts) == len(c.retweets) else Cascade(c.origin, rts))
        return Dataset(tuple(kept), float(start), float(end), 0, dict(self.meta))


@dataclass(frozen=True)
class EmpiricalDistributions:
    pos_samples: tuple
    follower_samples: tuple
    p0_samples: tuple = ()

    @property
    def mean_followers(self):
        if not self.follower_samples:
            raise DataError("follower distribution is empty")
        return float(np.mean(self.follower_samples))

    @property
    def mean_p0(self):
        if not self.p0_samples:
            raise DataError("p0 distribution is empty")
        return float(np.mean(self.p0_samples))

    def sample(self, name, rng, size):
        pool = getattr(self, f"{name}_samples")
        if len(pool) == 0:
            raise DataError(f"cannot sample from empty {name} distribution")
        return np.asarray(pool)[rng.integers(0, len(pool), size=size)]


def parse_events(csv_text, epoch=DEFAULT_EPOCH, timezone=DEFAULT_TZ):
    """Parse the events CSV into ``TweetEvent`` objects, preserving order."""
    zone = ZoneInfo(timezone)
    origin = epoch_instant(epoch, timezone)
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty events file", line=1) from None
    if tuple(h.strip() for h in header) != HEADER:
        raise DataError(f"expected header {','.join(HEADER)}, got {','.join(header)}", line=1)
    events = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not x.strip() for x in row):
            continue
        if len(row) != len(HEADER):
            raise DataError(f"expected {len(HEADER)} fields, got {len(row)}", line=line_no)
        event_id, parent_id, stamp, followers, pos = (x.strip() for x in row)
        if not event_id:
            raise DataError("empty event_id", line=line_no)
        try:
            ts = _parse_timestamp(stamp, zone)
            n_followers = int(followers)
            pos_value = int(pos) if pos else None
        except ValueError as exc:
            raise DataError(str(exc), line=line_no) from None
        if n_followers < 0:
            raise DataError(f"negative followers {n_followers}", line=line_no)
        parent = parent_id or None
        if parent is not None and pos_value is not None:
            warnings.warn(f"line {line_no}: pos on retweet {event_id} ignored", stacklevel=2)
            pos_value = None
        time_s = (ts - origin).total_seconds()
        try:
            events.append(TweetEvent(event_id, parent, time_s, n_followers, pos_value))
        except DataError as exc:
            raise DataError(str(exc), line=line_no) from None
    return events


def format_events(events, epoch=DEFAULT_EPOCH, timezone=DEFAULT_TZ):
    """Inverse of :func:`parse_events`; timestamps are written with offset."""
    zone = ZoneInfo(timezone)
    origin = epoch_instant(epoch, timezone)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for ev in events:
        stamp = (origin + timedelta(seconds=ev.time_s)).astimezone(zone).isoformat()
        writer.writerow([
            ev.event_id,
            ev.parent_id or "",
            stamp,
            ev.followers,
            "" if ev.pos is None else ev.pos,
        ])
    return buf.getvalue()


def read_events(path, epoch=DEFAULT_EPOCH, timezone=DEFAULT_TZ):
    with open(path, encoding="utf-8") as fh:
        return parse_events(fh.read(), epoch, timezone)


def build_cascades(events: Sequence[TweetEvent], t_a=None, t_b=None):
    """Group events into cascades.

    Retweets of retweets are reattached to their root original. Retweets
    whose chain does not reach an original in ``events`` are dropped and
    counted in ``Dataset.dropped_orphans``.
    """
    by_id = {}
    for ev in events:
        if ev.event_id in by_id:
            raise DataError(f"duplicate event_id {ev.event_id}")
        by_id[ev.event_id] = ev

    def root_of(ev):
        seen = set()
        while ev.parent_id is not None:
            if ev.event_id in seen or ev.parent_id not in by_id:
                return None
            seen.add(ev.event_id)
            ev = by_id[ev.parent_id]
        return ev

    attached = {ev.event_id: [] for ev in events if ev.is_original}
    dropped = 0
    for ev in events:
        if ev.is_original:
            continue
        root = root_of(ev)
        if root is None:
            dropped += 1
            continue
        if ev.time_s < root.time_s:
            raise DataError(f"retweet {ev.event_id} precedes its original {root.event_id}")
        if ev.parent_id != root.event_id:
            ev = TweetEvent(ev.event_id, root.event_id, ev.time_s, ev.followers, None)
        attached[root.event_id].append(ev)
    if dropped:
        log.warning("dropped %d retweet(s) whose original is missing", dropped)

    origins = sorted((ev for ev in events if ev.is_original), key=lambda e: (e.time_s, e.event_id))
    cascades = tuple(
        Cascade(o, tuple(sorted(attached[o.event_id], key=lambda e: (e.time_s, e.event_id))))
        for o in origins
    )
    times = [e.time_s for c in cascades for e in c.members]
    lo = min(times) if times else 0.0
    hi = max(times) if times else 0.0
    return Dataset(
        cascades,
        float(lo if t_a is None else t_a),
        float(hi if t_b is None else t_b),
        dropped,
    )


def empirical_distributions(ds, p0_by_origin=None, silent_age=None):
    """Attribute multisets of the originals in ``ds``.

    ``p0_samples`` holds the fitted influence of every origin in
    ``p0_by_origin``. With ``silent_age`` set, origins without a fit that were
    observed for at least that long (retweet-free cascades) enter as 0, so
    the multiset is not conditioned on a cascade having retweets.
    """
    p0_by_origin = p0_by_origin or {}
    p0 = []
    for k, t0 in zip(ds.origin_ids, ds.origin_times):
        if k in p0_by_origin:
            p0.append(float(p0_by_origin[k]))
        elif silent_age is not None and ds.t_b - t0 >= silent_age:
            p0.append(0.0)
    return EmpiricalDistributions(
        pos_samples=tuple(int(c.origin.pos) for c in ds.cascades),
        follower_samples=tuple(int(c.origin.followers) for c in ds.cascades),
        p0_samples=tuple(p0),
    )
