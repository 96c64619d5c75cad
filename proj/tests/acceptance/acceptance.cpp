// Headless acceptance run. Prints one PASS/FAIL line per criterion.
// Exit status is 0 when every criterion was evaluated; with --strict it is 1 when any criterion fails.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "keba/experiments.hpp"

namespace {

using keba::ControllerKind;

constexpr std::uint64_t kFirstSeed = 1000;
constexpr std::size_t kSeeds = 20;
constexpr std::size_t kPairs = 10;
constexpr double kAgreement = 0.70;

struct Outcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

keba::ScenarioConfig base(ControllerKind kind, double noise) { return keba::lab_scenario(kind, kFirstSeed, noise); }

Outcome no_action_death() {
  keba::ScenarioConfig c;
  c.name = "no-action";
  c.world.spawn_rate = 0.0;
  keba::AnimatSpec spec;
  spec.controller = ControllerKind::none;
  spec.locomotion = keba::Locomotion::stationary;
  c.animats.push_back(spec);
  const auto log = keba::run_scenario(c, {.record_series = false});
  const auto& death = log.summaries.front().death_tick;
  Outcome o{"no-action death tick", false, ""};
  if (!death) {
    o.detail = "animat survived";
    return o;
  }
  const double d = static_cast<double>(*death);
  o.pass = d >= 4500.0 * 0.95 && d <= 4500.0 * 1.05;
  o.detail = "died at tick " + std::to_string(*death) + ", target 4500 +/- 5%";
  return o;
}

Outcome baseline_ordering(const keba::BaselineReport& r) {
  Outcome o{"baseline ordering", false, ""};
  o.pass = r.random_below_none >= kAgreement && r.keba_above_none >= kAgreement;
  o.detail = "median survival keba " + fmt(r.median_keba, 0) + ", none " + fmt(r.median_none, 0) + ", random " +
             fmt(r.median_random, 0) + "; random<none in " + fmt(r.random_below_none, 2) + " of seeds, keba>none in " +
             fmt(r.keba_above_none, 2);
  return o;
}

Outcome hunger_dynamics(const keba::BaselineReport& r) {
  keba::ScenarioConfig c;
  c.name = "no-action";
  c.world.spawn_rate = 0.0;
  c.metrics = {"hunger"};
  keba::AnimatSpec spec;
  spec.controller = ControllerKind::none;
  spec.locomotion = keba::Locomotion::stationary;
  c.animats.push_back(spec);
  const auto log = keba::run_scenario(c);
  bool monotone = true;
  double previous = -1.0;
  for (const auto& row : log.series) {
    if (row.physiology.hunger < previous) monotone = false;
    previous = row.physiology.hunger;
  }
  const bool clamped = previous == 1.0;
  const double keba_late = keba::spread_of(r.keba_late_hunger).mean;
  const double random_late = keba::spread_of(r.random_late_hunger).mean;
  Outcome o{"hunger dynamics", false, ""};
  o.pass = monotone && clamped && keba_late < random_late;
  o.detail = std::string("no-action ramp ") + (monotone && clamped ? "non-decreasing to clamp" : "broken") +
             "; late mean hunger keba " + fmt(keba_late) + " vs random " + fmt(random_late);
  return o;
}

Outcome noise_sweep(unsigned workers) {
  const std::vector<double> levels{0.0, 0.1, 0.25, 0.5, 0.75};
  const auto rows = keba::noise_sweep(base(ControllerKind::keba, 0.1), levels, kSeeds, workers);
  const double k0 = rows[0].koncepts.mean, k1 = rows[1].koncepts.mean, k25 = rows[2].koncepts.mean,
               k75 = rows[4].koncepts.mean;
  const bool counts = k1 > k0 && k25 > k0 && k75 < std::max(k1, k25);

  std::vector<double> agreement;
  for (double noise : levels) {
    agreement.push_back(keba::compare_baselines(base(ControllerKind::keba, noise), kSeeds, workers).keba_above_random);
  }
  bool low_noise_wins = true;
  for (std::size_t i = 0; i + 1 < levels.size(); ++i) low_noise_wins = low_noise_wins && agreement[i] >= kAgreement;
  const bool high_noise_random_like = agreement.back() < kAgreement;

  Outcome o{"noise sweep", false, ""};
  o.pass = counts && low_noise_wins && high_noise_random_like;
  std::ostringstream d;
  d << "mean koncepts";
  for (std::size_t i = 0; i < levels.size(); ++i) d << " " << fmt(levels[i], 2) << ":" << fmt(rows[i].koncepts.mean, 1);
  d << "; keba>random agreement";
  for (std::size_t i = 0; i < levels.size(); ++i) d << " " << fmt(levels[i], 2) << ":" << fmt(agreement[i], 2);
  d << "; counts " << (counts ? "ok" : "fail") << ", noise<=0.5 " << (low_noise_wins ? "ok" : "fail")
    << ", noise 0.75 random-like " << (high_noise_random_like ? "ok" : "fail");
  o.detail = d.str();
  return o;
}

Outcome similarity_by_level() {
  const auto rows = keba::paired_similarity(base(ControllerKind::keba, 0.1), kPairs, 2);
  Outcome o{"similarity by level", false, ""};
  o.pass = rows[0].similarity.mean > rows[1].similarity.mean;
  o.detail = std::to_string(kPairs) + " pairs, level 1 " + fmt(rows[0].similarity.mean) + ", level 2 " +
             fmt(rows[1].similarity.mean);
  return o;
}

bool run_quiet(const std::string& command) {
  return std::system((command + " > /dev/null 2>&1").c_str()) == 0;
}

std::string gtest(const char* binary, const char* filter) {
  return std::string("\"") + binary + "\" --gtest_brief=1 --gtest_filter='" + filter + "'";
}

Outcome oracle_suite() {
  const bool fresh = run_quiet(std::string("python3 \"") + KEBA_SOURCE_DIR + "/tools/oracles.py\" --check");
  const bool core = run_quiet(gtest(KEBA_TEST_CORE, "-*Property*"));
  const bool world = run_quiet(gtest(KEBA_TEST_WORLD, "-*Property*"));
  const bool runs = run_quiet(gtest(KEBA_TEST_EXPERIMENTS, "RunScenario.NoActionDeathTick:Export.NoActionHungerRampFromCsv"));
  Outcome o{"equation oracle suite", false, ""};
  o.pass = fresh && core && world && runs;
  o.detail = std::string("oracle header ") + (fresh ? "current" : "stale or python3 missing") + ", core examples " +
             (core ? "ok" : "fail") + ", world examples " + (world ? "ok" : "fail") + ", run examples " +
             (runs ? "ok" : "fail");
  return o;
}

Outcome property_suites() {
  const bool core = run_quiet(gtest(KEBA_TEST_CORE, "*Property*"));
  const bool world = run_quiet(gtest(KEBA_TEST_WORLD, "*Property*"));
  const bool agent = run_quiet(gtest(KEBA_TEST_AGENT, "*Property*:Simulation.FullDeterminism"));
  const bool runs = run_quiet(gtest(KEBA_TEST_EXPERIMENTS, "RunScenario.SameSeedSameLog:RunBatch.*:Recorder.*"));
  const bool resume = run_quiet(gtest(KEBA_TEST_PERSISTENCE, "SaveState.*"));
  Outcome o{"property suites", false, ""};
  o.pass = core && world && agent && runs && resume;
  o.detail = std::string("core ") + (core ? "ok" : "fail") + ", world " + (world ? "ok" : "fail") + ", agent " +
             (agent ? "ok" : "fail") + ", determinism " + (runs ? "ok" : "fail") + ", resume " +
             (resume ? "ok" : "fail");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--strict") strict = true;
  }
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());

  std::vector<Outcome> outcomes;
  outcomes.push_back(no_action_death());
  const auto baselines = keba::compare_baselines(base(ControllerKind::keba, 0.1), kSeeds, workers);
  outcomes.push_back(baseline_ordering(baselines));
  outcomes.push_back(hunger_dynamics(baselines));
  outcomes.push_back(noise_sweep(workers));
  outcomes.push_back(similarity_by_level());
  outcomes.push_back(oracle_suite());
  outcomes.push_back(property_suites());

  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << o.name << "  (" << o.detail << ")\n";
    if (!o.pass) ++failed;
  }
  std::cout << "acceptance: " << outcomes.size() - failed << "/" << outcomes.size() << " criteria passed\n";
  return strict && failed > 0 ? 1 : 0;
}
