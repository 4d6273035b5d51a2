#!/usr/bin/env python3
"""Writes the traffic/temperature fixture next to this script.

Two traffic sensors and one temperature sensor within 300 m rise together
at ten hours. A second temperature sensor nearby shares five of them, and a
traffic sensor 2 km away copies the pattern exactly.
"""
import os
from datetime import datetime, timedelta

HOURS = 72
PLANTED = [5, 11, 17, 23, 30, 38, 44, 51, 59, 66]
START = datetime(2016, 3, 1)

SENSORS = [
    ("00000", "temperature", "43.46192", "-3.80176"),
    ("00001", "temperature", "43.46212", "-3.79979"),
    ("00002", "traffic", "43.4625", "-3.801"),
    ("00003", "traffic", "43.4615", "-3.8025"),
    ("00004", "traffic", "43.48", "-3.78"),
]


def wiggle(k, amp):
    # Small deterministic noise well below either epsilon.
    return amp * (((k * 7919) % 11) - 5) / 5.0


def temperature(rise_at, fall_at):
    out, level = [], 9.87
    for k in range(HOURS):
        if k in rise_at:
            level += 0.6
        if k in fall_at:
            level -= 0.5
        out.append(round(level + wiggle(k, 0.05), 2))
    out[1] = 9.87
    return out


def traffic(rise_at, fall_at, base):
    out, level = [], base
    for k in range(HOURS):
        if k in rise_at:
            level += 15
        if k in fall_at:
            level -= 12
        out.append(round(level + wiggle(k + base, 1.0)))
    return out


series = {
    "00000": temperature(PLANTED, [8, 27, 48, 62]),
    "00001": temperature(PLANTED[:5], [14, 35, 55]),
    "00002": traffic(PLANTED, [3, 20, 41, 57, 69], 120),
    "00003": traffic(PLANTED, [9, 33, 47, 64], 180),
    "00004": traffic(PLANTED, [13, 26, 53], 90),
}

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "attribute.csv"), "w") as f:
    f.write("temperature\ntraffic\n")
with open(os.path.join(here, "location.csv"), "w") as f:
    f.write("id,attribute,lat,lon\n")
    for s in SENSORS:
        f.write(",".join(s) + "\n")
with open(os.path.join(here, "data.csv"), "w") as f:
    f.write("id,attribute,time,data\n")
    for sid, attr, _, _ in SENSORS:
        for k, v in enumerate(series[sid]):
            t = (START + timedelta(hours=k)).strftime("%Y-%m-%d %H:%M:%S")
            cell = "null" if (sid == "00000" and k == 0) else str(v)
            f.write(f"{sid},{attr},{t},{cell}\n")
