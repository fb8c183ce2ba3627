"""Regenerates the synthetic Denmark-like week: hourly demand bid curves and
solar/offshore/onshore capacity factors. Deterministic for a fixed seed."""
import datetime
import math
import pathlib
import random

random.seed(2030)
OUT = pathlib.Path(__file__).resolve().parent
DAYS = [datetime.date(2030, 1, 7) + datetime.timedelta(days=k) for k in range(7)]

# (price, share of the price-responsive volume)
LADDER = [(150, 4), (80, 5), (55, 6), (42, 8), (36, 9), (33, 10), (30, 10), (28, 9),
          (26, 8), (24, 7), (22, 6), (20, 5), (15, 4), (8, 3), (0.1, 2)]


def load(h, k):
    base = 3400 + 60 * (k % 3)
    morning = 700 * math.exp(-(((h - 8.5) / 2.0) ** 2))
    evening = 600 * math.exp(-(((h - 18) / 2.0) ** 2))
    night = -350 * math.exp(-(((h - 3.5) / 2.5) ** 2))
    return base + morning + evening + night


with open(OUT / "demand_bids.csv", "w") as f:
    f.write("day,hour,price_eur_mwh,cum_volume_mwh\n")
    for k, d in enumerate(DAYS):
        for h in range(1, 25):
            total = load(h, k) * (1 + 0.02 * math.sin(k + h / 5))
            drop = set(random.sample(range(1, len(LADDER) - 1), random.randint(0, 3)))
            steps = [(p + random.choice([-1, 0, 1]) * 0.5 * (1 < p < 100), w * random.uniform(0.8, 1.2))
                     for i, (p, w) in enumerate(LADDER) if i not in drop]
            weight = sum(w for _, w in steps)
            # 45% of the volume bids at the price cap
            vol = 0.45 * total
            f.write(f"{d},{h},4000,{round(vol, 1)}\n")
            for p, w in steps:
                vol += 0.55 * total * w / weight
                f.write(f"{d},{h},{p},{round(vol, 1)}\n")
            if random.random() < 0.3:
                f.write(f"{d},{h},{-random.choice([1, 5, 20])},{round(total * 1.08, 1)}\n")

with open(OUT / "capacity_factors.csv", "w") as f:
    f.write("day,hour,cf_solar,cf_offshore,cf_onshore\n")
    for k, d in enumerate(DAYS):
        level = 0.42 + 0.10 * math.sin(1.3 * k)
        for h in range(1, 25):
            solar = max(0, 0.20 * math.sin(math.pi * (h - 8) / 9)) if 8 <= h <= 17 else 0
            lull = 0.12 * math.exp(-(((h - 18.5 + 0.5 * (k % 3)) / 2.3) ** 2))
            wind = level + 0.12 * math.cos(2 * math.pi * (h - 2) / 24) - lull
            off = min(1, max(0, wind + 0.03 * random.uniform(-1, 1)))
            on = min(1, max(0, 0.9 * wind + 0.03 * random.uniform(-1, 1)))
            f.write(f"{d},{h},{solar:.3f},{off:.3f},{on:.3f}\n")
