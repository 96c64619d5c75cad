#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "keba/agent.hpp"
#include "keba/scenario.hpp"

namespace keba {

struct SeriesRow {
  std::uint64_t tick = 0;
  std::uint64_t animat_id = 0;
  Action action = Action::none;
  Physiology physiology;
  std::vector<std::size_t> koncept_counts;  // per level, empty for non-keba controllers
  bool operator==(const SeriesRow&) const = default;
};

struct RunSummary {
  std::uint64_t animat_id = 0;
  ControllerKind controller = ControllerKind::none;
  std::optional<std::uint64_t> death_tick;  // first tick with energy zero
  std::uint64_t survival = 0;               // death tick, or ticks run when the animat survived
  std::size_t total_koncepts = 0;
  std::vector<std::size_t> level_counts;
  double mean_radius = 0.0;                 // mean r2 over koncepts above level 0
  std::uint64_t capacity_refusals = 0;
  double late_mean_hunger = 0.0;            // mean hunger over the final quarter of the animat's life
  bool operator==(const RunSummary&) const = default;
};

struct MetricsLog {
  std::string scenario;
  std::uint64_t seed = 0;
  std::uint64_t ticks_requested = 0;
  std::uint64_t ticks_run = 0;
  std::vector<std::string> metrics;
  std::vector<SeriesRow> series;  // one row per tick per living animat
  std::vector<RunSummary> summaries;
  bool operator==(const MetricsLog&) const = default;
};

struct RunOptions {
  bool record_series = true;
};

/// Validates, builds and runs the scenario. Throws std::invalid_argument before any tick on a bad config.
MetricsLog run_scenario(const ScenarioConfig& config, RunOptions options = {});

/// Accumulates traces into a log; usable across save/load boundaries.
class MetricsRecorder {
 public:
  MetricsRecorder(const ScenarioConfig& config, const Simulation& sim, RunOptions options = {});
  void record(const std::vector<TickTrace>& traces);
  /// Runs `sim` until `config.ticks` or, when configured, until every animat has died.
  void run(Simulation& sim);
  MetricsLog finish(const Simulation& sim) const;

 private:
  ScenarioConfig config_;
  RunOptions options_;
  MetricsLog log_;
  std::vector<std::vector<double>> hunger_;  // per animat slot, one entry per lived tick
  std::vector<std::optional<std::uint64_t>> death_;
};

/// Runs every config; results keep the input order regardless of worker count.
std::vector<MetricsLog> run_batch(const std::vector<ScenarioConfig>& configs, unsigned workers = 1,
                                  RunOptions options = {.record_series = false});

struct Spread {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

Spread spread_of(std::vector<double> values);

struct SweepRow {
  std::string value;
  std::size_t runs = 0;
  Spread koncepts;
  Spread survival;
  Spread mean_radius;
  std::vector<double> survival_by_seed;  // seed order
  std::vector<double> koncepts_by_seed;
};

/// Supported parameters: noise, max_levels, locomotion, exploration_rate, persistence, stability_speed,
/// active_threshold, noise_floor. Statistics are taken over keba animats.
std::vector<SweepRow> sweep(const ScenarioConfig& base, const std::string& param, const std::vector<std::string>& values,
                            std::size_t seeds, unsigned workers = 1);

/// Requires at least three levels including 0.
std::vector<SweepRow> noise_sweep(const ScenarioConfig& base, const std::vector<double>& noise_levels,
                                  std::size_t seeds, unsigned workers = 1);

/// Copy of `base` with the given controller on every animat.
ScenarioConfig with_controller(ScenarioConfig base, ControllerKind kind);

struct BaselineReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> keba, random, none;  // survival per seed
  std::vector<double> keba_late_hunger, random_late_hunger;
  double median_keba = 0.0, median_random = 0.0, median_none = 0.0;
  double random_below_none = 0.0;  // fraction of seeds
  double keba_above_none = 0.0;
  double keba_above_random = 0.0;
};

/// Runs each controller on the first animat spec of `base` over `seeds` consecutive seeds.
BaselineReport compare_baselines(const ScenarioConfig& base, std::size_t seeds, unsigned workers = 1);

/// Greedy one-to-one matching of koncepts on `level` whose aligned centers lie within `tol`;
/// returns matched / max(count_a, count_b). A missing level yields 0 and a warning.
double koncept_similarity(const Hierarchy& a, const Hierarchy& b, std::size_t level, double tol = 0.1,
                          std::vector<std::string>* warnings = nullptr);

struct SimilarityRow {
  std::size_t level = 0;
  Spread similarity;
  std::vector<double> by_seed;
};

/// For each seed, runs two keba copies of the first animat spec in one world and compares their
/// hierarchies on levels 1..max_level. A level missing in either hierarchy counts as 0.
std::vector<SimilarityRow> paired_similarity(const ScenarioConfig& base, std::size_t seeds, std::size_t max_level,
                                             double tol = 0.1);

enum class ExportFormat { csv, json_lines };

/// Series rows in a stable column order. Writes atomically; throws std::runtime_error on I/O failure.
void export_metrics(const MetricsLog& log, ExportFormat format, const std::filesystem::path& path);
std::string series_header(const MetricsLog& log);

/// Per-run summary as a JSON document.
void export_summary(const MetricsLog& log, const std::filesystem::path& path);

}  // namespace keba
