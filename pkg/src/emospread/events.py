"""Stress events used as vertical markers on time-series plots."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date
from typing import List, Optional, Sequence

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Event:
    id: int
    date: date
    label: str


DEFAULT_EVENTS = (
    Event(1, date(2015, 8, 29), "Greek government debt crisis"),
    Event(2, date(2016, 2, 24), "EU-wide stress testing"),
    Event(3, date(2016, 6, 23), "Brexit"),
    Event(4, date(2016, 12, 4), "Italian constitutional referendum"),
    Event(5, date(2017, 4, 23), "French political elections"),
    Event(6, date(2017, 6, 7), "Rumours early Italian political elections"),
    Event(7, date(2017, 9, 6), "Discussion on tapering"),
    Event(8, date(2017, 10, 1), "Catalan referendum"),
    Event(9, date(2018, 2, 5), "Stock market crash and increase in volatility"),
    Event(10, date(2018, 3, 4), "Italian political elections"),
    Event(11, date(2018, 5, 29), "Political crisis in Italy and in Spain"),
    Event(12, date(2018, 9, 6), "Fitch confirms negative Italian outlook"),
    Event(13, date(2018, 10, 19), "Moody's downgrade of the Italian senior unsecured bond ratings"),
    Event(14, date(2018, 12, 20), "Italian agreement with Brussels on the budget deficit"),
    Event(15, date(2019, 2, 7), "EU publishes Winter 2019 Economic Forecast"),
    Event(16, date(2019, 5, 26), "European parliament elections"),
)


class EventCalendar:
    def __init__(self, events: Sequence[Event] = DEFAULT_EVENTS):
        ids = [e.id for e in events]
        if len(set(ids)) != len(ids):
            raise ValueError("event ids must be unique")
        self.events = sorted(events, key=lambda e: (e.date, e.id))

    def __len__(self):
        return len(self.events)

    def within(self, start: date, end: date) -> List[Event]:
        """Events inside ``[start, end]``; the rest are logged and dropped."""
        keep = []
        for e in self.events:
            if start <= e.date <= end:
                keep.append(e)
            else:
                log.warning("event %d (%s) lies outside the sample %s..%s", e.id, e.date, start, end)
        return keep

    def write_csv(self, path, start: Optional[date] = None, end: Optional[date] = None) -> List[Event]:
        events = self.events if start is None or end is None else self.within(start, end)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("id,date,label\n")
            for e in events:
                label = e.label.replace('"', "'")
                fh.write(f'{e.id},{e.date.isoformat()},"{label}"\n')
        return events
