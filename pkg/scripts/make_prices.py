"""Regenerate the bundled synthetic price file (92 days from 2023-06-01, peak 0.15 $/kWh)."""
from datetime import datetime

from latentopt.harness.prices import bundled_price_path, synthetic_hourly_prices, write_price_csv

if __name__ == "__main__":
    path = bundled_price_path()
    write_price_csv(path, datetime(2023, 6, 1), synthetic_hourly_prices(92))
    print(path)
