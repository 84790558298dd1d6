"""Regenerates the synthetic example inputs in this directory.

The series are invented for demonstration: a Gulf-coast-like site with a
buoy anemometer at 4 m, a semi-diurnal tide, and an offshore platform load
of about 53.75 MW. Output is deterministic for a given seed.
"""

import csv
import math
import random
from datetime import datetime, timedelta

SEED = 20240611
HOURS_PER_YEAR = 8760


def metocean(rng):
    start = datetime(2023, 1, 1)
    wind_state = 0.0
    wave_state = 0.0
    cloud = 0.8
    rows = []
    for t in range(HOURS_PER_YEAR):
        ts = start + timedelta(hours=t)
        doy = ts.timetuple().tm_yday
        hour = ts.hour
        season = math.cos(2 * math.pi * (doy - 15) / 365)  # +1 mid-January
        wind_state = 0.97 * wind_state + rng.gauss(0, 0.35)
        wind = 6.4 + 1.6 * season + 0.5 * math.cos(2 * math.pi * (hour - 3) / 24) + wind_state
        wind = max(0.0, wind)
        wave_state = 0.98 * wave_state + rng.gauss(0, 0.05)
        hs = max(0.2, 1.1 + 0.35 * season + 0.08 * wind + wave_state)
        te = 5.0 + 1.4 * math.sqrt(hs) + rng.gauss(0, 0.3)
        current = abs(0.9 * math.sin(2 * math.pi * t / 12.42) + 0.15 * math.sin(2 * math.pi * t / 24.84))
        current = max(0.0, current + rng.gauss(0, 0.05))
        decl = 23.44 * math.sin(2 * math.pi * (284 + doy) / 365)
        lat = 28.0
        hour_angle = 15.0 * (hour + 0.5 - 12.0)
        r = math.radians
        cos_zenith = math.sin(r(lat)) * math.sin(r(decl)) + math.cos(r(lat)) * math.cos(r(decl)) * math.cos(r(hour_angle))
        if hour == 0:
            cloud = min(1.0, max(0.35, 0.8 + rng.gauss(0, 0.15)))
        ghi = max(0.0, 1000.0 * cos_zenith * cloud)
        tamb = 22.0 - 6.0 * season + 2.0 * math.sin(2 * math.pi * (hour - 9) / 24) + rng.gauss(0, 0.8)
        rows.append(
            [
                ts.strftime("%Y-%m-%dT%H:%M:%S"),
                f"{hs:.3f}",
                f"{te:.3f}",
                f"{current:.3f}",
                f"{wind:.3f}",
                "4.0",
                f"{ghi:.1f}",
                f"{tamb:.2f}",
            ]
        )
    with open("metocean.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["timestamp", "hs_m", "te_s", "current_ms", "wind_ms", "anemo_height_m", "ghi_wm2", "tamb_c"])
        w.writerows(rows)


def load(rng):
    with open("load.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["month", "hour", "load_kw"])
        for m in range(1, 13):
            cooling = 1.0 + 0.02 * math.sin(2 * math.pi * (m - 4) / 12)
            for h in range(24):
                shift = 1.0 + 0.015 * math.sin(2 * math.pi * (h - 8) / 24)
                w.writerow([m, h, f"{53750.0 * cooling * shift * (1 + rng.gauss(0, 0.003)):.1f}"])


if __name__ == "__main__":
    rng = random.Random(SEED)
    metocean(rng)
    load(rng)
