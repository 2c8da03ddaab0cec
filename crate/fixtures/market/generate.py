"""Regenerates the synthetic four-market daily fixture.

Monthly up-day counts follow a weak count autoregression driven by the
monthly mean exchange rate; daily quotes are then laid out so that exactly
that many weekdays close above the open. A few months are hand-built:
ALPHA 2011-03 rises on all 23 trading days, BETA 2012-02 never rises,
GAMMA 2013-05 has 10 rises and 5 unchanged closes, DELTA has no quotes in
2014-08.
"""
import calendar
import csv
import datetime as dt
import math
import random

rng = random.Random(20110103)
markets = {"ALPHA": 2.30, "BETA": 2.15, "GAMMA": 2.45, "DELTA": 2.60}
years = range(2011, 2017)

days = [dt.date(y, m, d) for y in years for m in range(1, 13)
        for d in range(1, calendar.monthrange(y, m)[1] + 1)]
weekdays = [d for d in days if d.weekday() < 5]

rate, fx = 80.0, {}
for d in weekdays:
    rate = max(70.0, rate + rng.gauss(0.03, 0.45))
    fx[d] = round(rate, 4)

months = sorted({(d.year, d.month) for d in weekdays})
by_month = {m: [d for d in weekdays if (d.year, d.month) == m] for m in months}

def poisson(lam):
    L, k, p = math.exp(-lam), 0, 1.0
    while True:
        p *= rng.random()
        if p <= L:
            return k
        k += 1

quotes, expected = [], []
for name, a in markets.items():
    prev = math.exp(a)
    price = 100.0 * (1 + list(markets).index(name))
    for m in months:
        tdays = by_month[m]
        if name == "DELTA" and m == (2014, 8):
            continue
        xbar = sum(fx[d] for d in tdays) / len(tdays)
        mean = 0.1 * prev + 0.9 * math.exp(a + 0.004 * (xbar - 100.0))
        up = min(len(tdays), poisson(mean))
        ties = 0
        if name == "ALPHA" and m == (2011, 3):
            up = len(tdays)
        if name == "BETA" and m == (2012, 2):
            up = 0
        if name == "GAMMA" and m == (2013, 5):
            up, ties = 10, 5
        order = list(range(len(tdays)))
        rng.shuffle(order)
        kind = {}
        for j, i in enumerate(order):
            kind[i] = "up" if j < up else ("tie" if j < up + ties else "down")
        for i, d in enumerate(tdays):
            open_ = round(price * (1 + rng.uniform(-0.004, 0.004)), 2)
            step = round(open_ * rng.uniform(0.001, 0.02), 2) or 0.01
            close = {"up": open_ + step, "down": open_ - step, "tie": open_}[kind[i]]
            quotes.append((d.isoformat(), name, f"{open_:.2f}", f"{close:.2f}"))
            price = close
        expected.append((name, f"{m[0]:04d}-{m[1]:02d}", up))
        prev = up

quotes.sort()
with open("daily_quotes.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["date", "market", "open", "close"])
    w.writerows(quotes)
with open("usdjpy_daily.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["date", "usdjpy"])
    w.writerows((d.isoformat(), fx[d]) for d in weekdays)
with open("expected_monthly.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["market", "month", "count"])
    w.writerows(expected)
