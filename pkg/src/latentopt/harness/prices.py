"""Hourly electricity prices: CSV ingestion and quarter-hour resampling."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta
from importlib import resources
from pathlib import Path
from typing import List

import numpy as np

STEPS_PER_HOUR = 4
BUNDLED_PRICES = "prices_synthetic_2023.csv"


class PriceError(ValueError):
    pass


class PriceColumnError(PriceError):
    pass


class NegativePriceError(PriceError):
    def __init__(self, timestamp: str, price: float):
        self.timestamp = timestamp
        super().__init__(f"negative price {price} at {timestamp}")


class PriceCoverageError(PriceError):
    def __init__(self, msg: str, gap_start=None, gap_end=None):
        self.gap_start, self.gap_end = gap_start, gap_end
        super().__init__(msg)


@dataclass(frozen=True)
class PriceSeries:
    start: datetime
    hourly: np.ndarray  # $/kWh, one per hour from ``start``

    @property
    def steps(self) -> np.ndarray:
        """Quarter-hour prices, each hour held for four steps."""
        return np.repeat(self.hourly, STEPS_PER_HOUR)

    def day(self, index: int) -> np.ndarray:
        s = self.steps
        lo, hi = index * 24 * STEPS_PER_HOUR, (index + 1) * 24 * STEPS_PER_HOUR
        if index < 0 or hi > s.size:
            raise PriceCoverageError(f"price series covers {s.size // 96} days; day {index} requested")
        return s[lo:hi]


def ingest_prices(path) -> PriceSeries:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise PriceColumnError(f"{path}: empty file") from None
        missing = [c for c in ("timestamp", "price") if c not in header]
        if missing:
            raise PriceColumnError(f"{path}: missing column(s) {missing}; found {header}")
        i_ts, i_p = header.index("timestamp"), header.index("price")
        stamps: List[datetime] = []
        prices: List[float] = []
        for row in reader:
            if not row or not "".join(row).strip():
                continue
            ts = row[i_ts].strip()
            try:
                stamp, price = datetime.fromisoformat(ts), float(row[i_p])
            except ValueError as exc:
                raise PriceError(f"{path}: cannot parse row {row}: {exc}") from None
            if not np.isfinite(price):
                raise PriceError(f"non-finite price at {ts}")
            if price < 0:
                raise NegativePriceError(ts, price)
            stamps.append(stamp)
            prices.append(price)
    if not stamps:
        raise PriceCoverageError(f"{path}: no price rows")
    hour = timedelta(hours=1)
    for prev, cur in zip(stamps, stamps[1:]):
        if cur - prev != hour:
            if cur <= prev:
                raise PriceCoverageError(f"timestamps not increasing at {cur.isoformat()}")
            raise PriceCoverageError(
                f"coverage gap between {prev.isoformat()} and {cur.isoformat()}", prev, cur
            )
    return PriceSeries(stamps[0], np.array(prices))


def synthetic_hourly_prices(days: int, peak: float = 0.15, trough: float = 0.03, peak_hour: float = 15.0) -> np.ndarray:
    h = np.arange(days * 24) % 24
    mid, amp = 0.5 * (peak + trough), 0.5 * (peak - trough)
    return mid + amp * np.cos(2 * np.pi * (h - peak_hour) / 24)


def write_price_csv(path, start: datetime, hourly) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "price"])
        for k, p in enumerate(hourly):
            w.writerow([(start + timedelta(hours=k)).isoformat(), f"{p:.6f}"])


def bundled_price_path() -> Path:
    return Path(str(resources.files("latentopt.data").joinpath(BUNDLED_PRICES)))
