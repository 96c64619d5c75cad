#!/usr/bin/env python3
"""Independent recomputation of the worked examples used by the unit tests.

Writes tests/unit/oracle_values.hpp. With --check, compares the freshly computed
header against the committed one and exits non-zero on any difference.

Every value here comes from exact rational arithmetic (fractions) or from a
brute-force replay of the update rule, never from the C++ code under test.
"""

import argparse
import math
import sys
from fractions import Fraction as F
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "tests" / "unit" / "oracle_values.hpp"


def activation(v, a_prev, big_a, iota, n):
    w = F(big_a) ** n * F(iota)
    return (F(v) + w * F(a_prev)) / (1 + w)


def stability(s_prev, a_t, a_prev, kappa):
    return min(F(1), max(F(0), F(s_prev) + F(kappa) - abs(F(a_t) - F(a_prev))))


def alternating_channel(ticks, kappa):
    # Level 0, A=2, iota=1: a = (v + a_prev) / 2. Starts from rest.
    a, s, max_s = F(0), F(0), F(0)
    for t in range(ticks):
        v = 1 if t % 2 == 0 else 0
        a_new = activation(v, a, 2, 1, 0)
        s = stability(s, a_new, a, F(kappa))
        a = a_new
        max_s = max(max_s, s)
    return max_s


def adapt_center(center, acts, eta, v):
    return [F(c) + F(eta) * F(v) * (F(x) - F(c)) for c, x in zip(center, acts)]


def toroidal(p, q, w, h):
    dx = abs(p[0] - q[0])
    dy = abs(p[1] - q[1])
    dx = min(dx, w - dx)
    dy = min(dy, h - dy)
    return math.sqrt(dx * dx + dy * dy)


def no_action_run(hunger_rate, thirst_rate, high, low, drain, gain, max_ticks=100000):
    """Brute-force replay of the physiology rule in IEEE doubles, in the documented order."""
    energy, hunger, thirst = 1.0, 0.0, 0.0
    hunger_at = {}
    clamp_tick = None
    for tick in range(1, max_ticks + 1):
        hunger = min(1.0, hunger + hunger_rate)
        thirst = min(1.0, thirst + thirst_rate)
        if hunger > high:
            energy -= drain
        if thirst > high:
            energy -= drain
        if hunger < low and thirst < low:
            energy += gain
        energy = min(1.0, max(0.0, energy))
        hunger_at[tick] = hunger
        if clamp_tick is None and hunger >= 1.0:
            clamp_tick = tick
        if energy <= 0.0:
            return tick, hunger_at, clamp_tick
    raise RuntimeError("animat never died")


def greatest(links):
    best = 0
    for i in range(1, len(links)):
        if links[i] > links[best]:
            best = i
    return best


def toy_reinforcement(koncepts, rounds):
    """Two active level-1 koncepts; the animat eats food and is rewarded every round."""
    eat = 0
    for _ in range(rounds):
        for links in koncepts:
            g = greatest(links)
            links[g] = F(1) if g == eat else F(0)
    scores = [sum(F(v) * links[i] * 4 for v, links in zip((F(8, 10), F(8, 10)), koncepts)) for i in range(3)]
    return koncepts, scores, greatest(scores)


def lit(x):
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return f"{int(x)}.0"
    return repr(x)


def build():
    rows = []

    def put(name, value, note):
        rows.append((name, lit(value), note))

    put("kActivationRise", activation(1, 0, 2, 1, 0), "v=1, a_prev=0, A=2, iota=1, n=0")
    put("kActivationDecayLevel2", activation(0, 1, 2, 1, 2), "v=0, a_prev=1, A=2, iota=1, n=2")
    put("kStabilityStep", stability(F(1, 2), F(3, 10), 0, F(5, 100)), "s_prev=0.5, |da|=0.3, kappa=0.05")
    put("kAlternatingMaxStability", alternating_channel(200, F(5, 100)), "200 ticks of 0/1, kappa=0.05")

    cx, cy = adapt_center([F(1, 2), F(1, 2)], [F(7, 10), F(1, 2)], F(1, 10), 1)
    put("kCenterX", cx, "center (0.5,0.5) toward (0.7,0.5), eta=0.1, v=1")
    put("kCenterY", cy, "")

    put("kChildLinkLow", (1 + F(4, 10)) / 2, "parents' link 1.0, draw at the low end")
    put("kChildLinkHigh", (1 + F(6, 10)) / 2, "parents' link 1.0, draw at the high end")
    put("kVoteEat", F(8, 10) * 1 * (1 + 1) ** 2, "v=0.8, level 1, link(eat)=1")
    put("kDistanceCorner", toroidal((0.0, 0.0), (50.0, 50.0), 100.0, 100.0), "(0,0)-(50,50) on 100x100")
    put("kPerceptionHalfRadius", 1 - F(5, 10), "redness 1 at half the perception radius")

    death, hunger_at, clamp = no_action_run(1 / 1000, 1 / 1000, 0.5, 0.2, 1 / 8000, 1 / 8000)
    put("kHungerAt500", hunger_at[500], "hunger after 500 ticks at 1/1000 per tick")
    put("kDeathClosedForm", F(1, 2) / F(1, 1000) + 1 / (2 * F(1, 8000)), "high/rate + 1/(2 drain)")
    put("kDeathBruteForce", death, "first tick with energy 0, replayed tick by tick")
    put("kHungerClampTick", clamp, "first tick with hunger 1")

    koncepts, scores, action = toy_reinforcement(
        [[F(55, 100), F(5, 10), F(45, 100)], [F(5, 10), F(45, 100), F(55, 100)]], 3)
    for k, links in enumerate(koncepts):
        for i, name in enumerate(("Eat", "Drink", "None")):
            put(f"kToyK{k}Link{name}", links[i], "after three rewarded meals" if k == 0 and i == 0 else "")
    put("kToyVoteEat", scores[0], "vote score for eat after training")
    put("kToyAction", action, "0 = eat")

    lines = [
        "#pragma once",
        "",
        "// Generated by tools/oracles.py. Do not edit by hand.",
        "",
        "namespace keba::oracle {",
        "",
    ]
    for name, value, note in rows:
        comment = f"  // {note}" if note else ""
        lines.append(f"inline constexpr double {name} = {value};{comment}")
    lines += ["", "}  // namespace keba::oracle", ""]
    return "\n".join(lines)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--check", action="store_true", help="fail if the committed header is stale")
    parser.add_argument("--out", type=Path, default=OUT)
    args = parser.parse_args()
    text = build()
    if args.check:
        current = args.out.read_text() if args.out.exists() else ""
        if current != text:
            sys.stderr.write(f"{args.out} is stale; rerun tools/oracles.py\n")
            return 1
        print("oracle values up to date")
        return 0
    args.out.write_text(text)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
