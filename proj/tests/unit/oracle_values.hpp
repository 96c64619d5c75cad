#pragma once

// Generated by tools/oracles.py. Do not edit by hand.

namespace keba::oracle {

inline constexpr double kActivationRise = 0.5;  // v=1, a_prev=0, A=2, iota=1, n=0
inline constexpr double kActivationDecayLevel2 = 0.8;  // v=0, a_prev=1, A=2, iota=1, n=2
inline constexpr double kStabilityStep = 0.25;  // s_prev=0.5, |da|=0.3, kappa=0.05
inline constexpr double kAlternatingMaxStability = 0.0;  // 200 ticks of 0/1, kappa=0.05
inline constexpr double kCenterX = 0.52;  // center (0.5,0.5) toward (0.7,0.5), eta=0.1, v=1
inline constexpr double kCenterY = 0.5;
inline constexpr double kChildLinkLow = 0.7;  // parents' link 1.0, draw at the low end
inline constexpr double kChildLinkHigh = 0.8;  // parents' link 1.0, draw at the high end
inline constexpr double kVoteEat = 3.2;  // v=0.8, level 1, link(eat)=1
inline constexpr double kDistanceCorner = 70.71067811865476;  // (0,0)-(50,50) on 100x100
inline constexpr double kPerceptionHalfRadius = 0.5;  // redness 1 at half the perception radius
inline constexpr double kHungerAt500 = 0.5000000000000003;  // hunger after 500 ticks at 1/1000 per tick
inline constexpr double kDeathClosedForm = 4500.0;  // high/rate + 1/(2 drain)
inline constexpr double kDeathBruteForce = 4499.0;  // first tick with energy 0, replayed tick by tick
inline constexpr double kHungerClampTick = 1000.0;  // first tick with hunger 1
inline constexpr double kToyK0LinkEat = 1.0;  // after three rewarded meals
inline constexpr double kToyK0LinkDrink = 0.5;
inline constexpr double kToyK0LinkNone = 0.45;
inline constexpr double kToyK1LinkEat = 1.0;
inline constexpr double kToyK1LinkDrink = 0.45;
inline constexpr double kToyK1LinkNone = 0.0;
inline constexpr double kToyVoteEat = 6.4;  // vote score for eat after training
inline constexpr double kToyAction = 0.0;  // 0 = eat

}  // namespace keba::oracle
