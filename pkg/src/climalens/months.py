"""Calendar-month keys and month windows."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterator


@dataclass(frozen=True, order=True)
class MonthKey:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @classmethod
    def parse(cls, text: str) -> "MonthKey":
        """Parse ``YYYY-MM`` (a trailing ``-DD`` is ignored)."""
        parts = text.strip().split("-")
        if len(parts) < 2:
            raise ValueError(f"not a YYYY-MM month: {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    @classmethod
    def of(cls, when: dt.date) -> "MonthKey":
        return cls(when.year, when.month)

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    @classmethod
    def from_ordinal(cls, n: int) -> "MonthKey":
        return cls(n // 12, n % 12 + 1)

    def shift(self, k: int) -> "MonthKey":
        return MonthKey.from_ordinal(self.ordinal + k)

    def first_day(self) -> dt.date:
        return dt.date(self.year, self.month, 1)

    def last_day(self) -> dt.date:
        return self.shift(1).first_day() - dt.timedelta(days=1)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True)
class MonthWindow:
    start: MonthKey
    end: MonthKey

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"window start {self.start} is after end {self.end}")

    @classmethod
    def parse(cls, text: str) -> "MonthWindow":
        """Parse ``YYYY-MM:YYYY-MM``."""
        try:
            a, b = text.split(":")
        except ValueError:
            raise ValueError(f"window must look like YYYY-MM:YYYY-MM, got {text!r}") from None
        return cls(MonthKey.parse(a), MonthKey.parse(b))

    def __contains__(self, month: MonthKey) -> bool:
        return self.start <= month <= self.end

    def __iter__(self) -> Iterator[MonthKey]:
        for n in range(self.start.ordinal, self.end.ordinal + 1):
            yield MonthKey.from_ordinal(n)

    def __len__(self) -> int:
        return self.end.ordinal - self.start.ordinal + 1

    def __str__(self) -> str:
        return f"{self.start}:{self.end}"


SAMPLE_WINDOW = MonthWindow(MonthKey(2013, 12), MonthKey(2021, 8))
COVID_WINDOW = MonthWindow(MonthKey(2020, 1), MonthKey(2021, 8))
