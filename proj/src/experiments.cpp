#include "keba/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "keba/persistence.hpp"

namespace keba {

namespace {

double mean_radius(const Hierarchy& h) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t lv = 1; lv < h.level_count(); ++lv) {
    for (const auto& k : h.level(lv)) {
      sum += k.r2;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: formatting failed");
  return std::string(buf.data(), end);
}

double parse_real(const std::string& text, const std::string& what) {
  try {
    return decode_double(text);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(what + ": expected a number, got '" + text + "'");
  }
}

int parse_int(const std::string& text, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument(what + ": expected an integer, got '" + text + "'");
  }
  return v;
}

void apply_param(ScenarioConfig& c, const std::string& param, const std::string& value) {
  if (param == "noise") {
    c.world.noise_amplitude = parse_real(value, param);
    return;
  }
  for (auto& a : c.animats) {
    if (param == "max_levels") {
      a.keba.max_levels = parse_int(value, param);
    } else if (param == "locomotion") {
      auto mode = parse_locomotion(value);
      if (!mode) throw std::invalid_argument("locomotion: unknown mode '" + value + "'");
      a.locomotion = *mode;
    } else if (param == "exploration_rate") {
      a.exploration_rate = parse_real(value, param);
    } else if (param == "persistence") {
      a.keba.persistence = parse_real(value, param);
    } else if (param == "stability_speed") {
      a.keba.stability_speed = parse_real(value, param);
    } else if (param == "active_threshold") {
      a.keba.active_threshold = parse_real(value, param);
    } else if (param == "noise_floor") {
      a.keba.noise_floor = parse_real(value, param);
    } else {
      throw std::invalid_argument("sweep: unsupported parameter '" + param + "'");
    }
  }
}

}  // namespace

// --- recording ---------------------------------------------------------------

MetricsRecorder::MetricsRecorder(const ScenarioConfig& config, const Simulation& sim, RunOptions options)
    : config_(config), options_(options) {
  log_.scenario = config.name;
  log_.seed = config.seed;
  log_.ticks_requested = config.ticks;
  for (auto name : kMetricNames) {
    if (std::find(config.metrics.begin(), config.metrics.end(), name) != config.metrics.end()) {
      log_.metrics.emplace_back(name);
    }
  }
  const auto n = sim.world().animats.size();
  hunger_.resize(n);
  death_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = sim.world().animats[i].physiology;
    if (!p.alive) death_[i] = sim.tick();
  }
}

void MetricsRecorder::record(const std::vector<TickTrace>& traces) {
  ++log_.ticks_run;
  if (traces.size() > hunger_.size()) {
    hunger_.resize(traces.size());
    death_.resize(traces.size());
  }
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const TickTrace& t = traces[i];
    if (!t.acted) continue;
    hunger_[i].push_back(t.physiology.hunger);
    if (!t.physiology.alive && !death_[i]) death_[i] = t.tick;
    if (options_.record_series) {
      log_.series.push_back(SeriesRow{t.tick, t.animat_id, t.action, t.physiology, t.koncept_counts});
    }
  }
}

void MetricsRecorder::run(Simulation& sim) {
  while (sim.tick() < config_.ticks) {
    if (config_.stop_when_all_dead && sim.all_dead()) break;
    record(sim.step());
  }
}

MetricsLog MetricsRecorder::finish(const Simulation& sim) const {
  MetricsLog log = log_;
  log.summaries.clear();
  const auto& animats = sim.world().animats;
  for (std::size_t i = 0; i < animats.size(); ++i) {
    RunSummary s;
    s.animat_id = animats[i].id;
    const Controller& c = sim.controllers()[i];
    s.controller = c.kind;
    if (i < death_.size()) s.death_tick = death_[i];
    s.survival = s.death_tick.value_or(sim.tick());
    if (c.hierarchy) {
      s.total_koncepts = c.hierarchy->koncept_count();
      s.level_counts = c.hierarchy->level_counts();
      s.mean_radius = mean_radius(*c.hierarchy);
      s.capacity_refusals = c.hierarchy->capacity_refusals();
    }
    if (i < hunger_.size() && !hunger_[i].empty()) {
      const auto& h = hunger_[i];
      const std::size_t tail = std::max<std::size_t>(1, h.size() / 4);
      s.late_mean_hunger =
          std::accumulate(h.end() - static_cast<std::ptrdiff_t>(tail), h.end(), 0.0) / static_cast<double>(tail);
    }
    log.summaries.push_back(std::move(s));
  }
  return log;
}

MetricsLog run_scenario(const ScenarioConfig& config, RunOptions options) {
  Simulation sim = build_simulation(config);
  MetricsRecorder recorder(config, sim, options);
  recorder.run(sim);
  return recorder.finish(sim);
}

std::vector<MetricsLog> run_batch(const std::vector<ScenarioConfig>& configs, unsigned workers, RunOptions options) {
  for (const auto& c : configs) c.validate();
  std::vector<MetricsLog> out(configs.size());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(configs.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) out[i] = run_scenario(configs[i], options);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < configs.size(); i = next++) out[i] = run_scenario(configs[i], options);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// --- statistics ----------------------------------------------------------------

Spread spread_of(std::vector<double> values) {
  Spread s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  s.min = values.front();
  s.max = values.back();
  return s;
}

std::vector<SweepRow> sweep(const ScenarioConfig& base, const std::string& param, const std::vector<std::string>& values,
                            std::size_t seeds, unsigned workers) {
  if (seeds == 0) throw std::invalid_argument("sweep: at least one seed is required");
  std::vector<ScenarioConfig> configs;
  for (const auto& value : values) {
    for (std::size_t s = 0; s < seeds; ++s) {
      ScenarioConfig c = base;
      c.seed = base.seed + s;
      apply_param(c, param, value);
      configs.push_back(std::move(c));
    }
  }
  const auto logs = run_batch(configs, workers);
  std::vector<SweepRow> rows;
  for (std::size_t v = 0; v < values.size(); ++v) {
    SweepRow row;
    row.value = values[v];
    std::vector<double> radius;
    for (std::size_t s = 0; s < seeds; ++s) {
      const MetricsLog& log = logs[v * seeds + s];
      bool any_keba = std::any_of(log.summaries.begin(), log.summaries.end(),
                                  [](const RunSummary& r) { return r.controller == ControllerKind::keba; });
      double k = 0.0, surv = 0.0, rad = 0.0;
      std::size_t n = 0;
      for (const auto& r : log.summaries) {
        if (any_keba && r.controller != ControllerKind::keba) continue;
        k += static_cast<double>(r.total_koncepts);
        surv += static_cast<double>(r.survival);
        rad += r.mean_radius;
        ++n;
      }
      if (n == 0) continue;
      row.koncepts_by_seed.push_back(k / static_cast<double>(n));
      row.survival_by_seed.push_back(surv / static_cast<double>(n));
      radius.push_back(rad / static_cast<double>(n));
    }
    row.runs = row.survival_by_seed.size();
    row.koncepts = spread_of(row.koncepts_by_seed);
    row.survival = spread_of(row.survival_by_seed);
    row.mean_radius = spread_of(radius);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SweepRow> noise_sweep(const ScenarioConfig& base, const std::vector<double>& noise_levels,
                                  std::size_t seeds, unsigned workers) {
  if (noise_levels.size() < 3) throw std::invalid_argument("noise_sweep: at least three noise levels are required");
  if (std::find(noise_levels.begin(), noise_levels.end(), 0.0) == noise_levels.end()) {
    throw std::invalid_argument("noise_sweep: the levels must include 0");
  }
  std::vector<std::string> values;
  for (double n : noise_levels) values.push_back(format_double(n));
  return sweep(base, "noise", values, seeds, workers);
}

ScenarioConfig with_controller(ScenarioConfig base, ControllerKind kind) {
  for (auto& a : base.animats) a.controller = kind;
  return base;
}

BaselineReport compare_baselines(const ScenarioConfig& base, std::size_t seeds, unsigned workers) {
  if (seeds == 0) throw std::invalid_argument("compare_baselines: at least one seed is required");
  if (base.animats.empty()) throw std::invalid_argument("compare_baselines: the scenario declares no animat");
  constexpr std::array<ControllerKind, 3> kinds{ControllerKind::keba, ControllerKind::random, ControllerKind::none};
  std::vector<ScenarioConfig> configs;
  BaselineReport report;
  for (std::size_t s = 0; s < seeds; ++s) report.seeds.push_back(base.seed + s);
  for (auto kind : kinds) {
    for (auto seed : report.seeds) {
      ScenarioConfig c = with_controller(base, kind);
      c.seed = seed;
      configs.push_back(std::move(c));
    }
  }
  const auto logs = run_batch(configs, workers);
  auto column = [&](std::size_t k, std::vector<double>& survival, std::vector<double>* hunger) {
    for (std::size_t s = 0; s < seeds; ++s) {
      const RunSummary& r = logs[k * seeds + s].summaries.front();
      survival.push_back(static_cast<double>(r.survival));
      if (hunger != nullptr) hunger->push_back(r.late_mean_hunger);
    }
  };
  column(0, report.keba, &report.keba_late_hunger);
  column(1, report.random, &report.random_late_hunger);
  column(2, report.none, nullptr);
  report.median_keba = spread_of(report.keba).median;
  report.median_random = spread_of(report.random).median;
  report.median_none = spread_of(report.none).median;
  std::size_t rb = 0, ka = 0, kr = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    rb += report.random[s] < report.none[s];
    ka += report.keba[s] > report.none[s];
    kr += report.keba[s] > report.random[s];
  }
  const double n = static_cast<double>(seeds);
  report.random_below_none = static_cast<double>(rb) / n;
  report.keba_above_none = static_cast<double>(ka) / n;
  report.keba_above_random = static_cast<double>(kr) / n;
  return report;
}

// --- similarity ------------------------------------------------------------------

namespace {

using IdMap = std::unordered_map<std::uint32_t, std::uint32_t>;

// Coordinates of a koncept's center keyed by the partner hierarchy's ids of the level below.
std::optional<std::map<std::uint32_t, double>> aligned_center(const Koncept& k, const IdMap* map) {
  std::map<std::uint32_t, double> out;
  for (std::size_t i = 0; i < k.parents.size(); ++i) {
    std::uint32_t key = k.parents[i].value;
    if (map != nullptr) {
      auto it = map->find(key);
      if (it == map->end()) return std::nullopt;
      key = it->second;
    }
    out[key] = k.center[i];
  }
  return out;
}

double aligned_distance(const std::map<std::uint32_t, double>& a, const std::map<std::uint32_t, double>& b) {
  double sum = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    double d = 0.0;
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      d = ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      d = ib->second;
      ++ib;
    } else {
      d = ia->second - ib->second;
      ++ia;
      ++ib;
    }
    sum += d * d;
  }
  return std::sqrt(sum);
}

// Greedy matching of one level given the matching of the level below (A id -> B id).
IdMap match_level(const Hierarchy& a, const Hierarchy& b, std::size_t level, const IdMap& below, double tol) {
  const auto la = a.level(level);
  const auto lb = b.level(level);
  std::vector<std::uint32_t> image;
  for (const auto& [_, id] : below) image.push_back(id);
  std::sort(image.begin(), image.end());

  struct Candidate {
    double d;
    std::size_t i, j;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < la.size(); ++i) {
    const auto ca = aligned_center(la[i], &below);
    if (!ca) continue;
    for (std::size_t j = 0; j < lb.size(); ++j) {
      const bool covered = std::all_of(lb[j].parents.begin(), lb[j].parents.end(), [&](KonceptId p) {
        return std::binary_search(image.begin(), image.end(), p.value);
      });
      if (!covered) continue;
      const auto cb = aligned_center(lb[j], nullptr);
      const double d = aligned_distance(*ca, *cb);
      if (d <= tol) candidates.push_back({d, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.d != y.d) return x.d < y.d;
    if (x.i != y.i) return x.i < y.i;
    return x.j < y.j;
  });
  IdMap matched;
  std::vector<bool> used_a(la.size(), false), used_b(lb.size(), false);
  for (const auto& c : candidates) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = true;
    matched[la[c.i].id.value] = lb[c.j].id.value;
  }
  return matched;
}

}  // namespace

double koncept_similarity(const Hierarchy& a, const Hierarchy& b, std::size_t level, double tol,
                          std::vector<std::string>* warnings) {
  if (level >= a.level_count() || level >= b.level_count()) {
    if (warnings != nullptr) {
      warnings->push_back("koncept_similarity: level " + std::to_string(level) + " missing in one hierarchy");
    }
    return 0.0;
  }
  // Protokoncepts share their slot semantics, so level 0 matches by position.
  IdMap map;
  for (std::size_t i = 0; i < kProtokonceptCount; ++i) map[a.level(0)[i].id.value] = b.level(0)[i].id.value;
  for (std::size_t lv = 1; lv <= level; ++lv) map = match_level(a, b, lv, map, tol);
  const auto denom = std::max(a.level(level).size(), b.level(level).size());
  return static_cast<double>(map.size()) / static_cast<double>(denom);
}

std::vector<SimilarityRow> paired_similarity(const ScenarioConfig& base, std::size_t seeds, std::size_t max_level,
                                             double tol) {
  if (base.animats.empty()) throw std::invalid_argument("paired_similarity: the scenario declares no animat");
  std::vector<SimilarityRow> rows(max_level);
  for (std::size_t lv = 1; lv <= max_level; ++lv) rows[lv - 1].level = lv;
  for (std::size_t s = 0; s < seeds; ++s) {
    ScenarioConfig c = base;
    c.seed = base.seed + s;
    AnimatSpec spec = base.animats.front();
    spec.controller = ControllerKind::keba;
    c.animats = {spec, spec};
    Simulation sim = build_simulation(c);
    while (sim.tick() < c.ticks && !(c.stop_when_all_dead && sim.all_dead())) sim.step();
    const Hierarchy& a = *sim.controllers()[0].hierarchy;
    const Hierarchy& b = *sim.controllers()[1].hierarchy;
    for (auto& row : rows) row.by_seed.push_back(koncept_similarity(a, b, row.level, tol));
  }
  for (auto& row : rows) row.similarity = spread_of(row.by_seed);
  return rows;
}

// --- export ------------------------------------------------------------------------

std::string series_header(const MetricsLog& log) {
  std::string h = "tick,animat";
  for (const auto& m : log.metrics) {
    if (m == "koncepts") {
      h += ",koncepts,koncepts_by_level";
    } else {
      h += "," + m;
    }
  }
  return h;
}

void export_metrics(const MetricsLog& log, ExportFormat format, const std::filesystem::path& path) {
  std::ostringstream out;
  if (format == ExportFormat::csv) out << series_header(log) << '\n';
  for (const auto& row : log.series) {
    std::size_t total = std::accumulate(row.koncept_counts.begin(), row.koncept_counts.end(), std::size_t{0});
    std::string by_level;
    for (std::size_t i = 0; i < row.koncept_counts.size(); ++i) {
      by_level += (i ? ";" : "") + std::to_string(row.koncept_counts[i]);
    }
    if (format == ExportFormat::csv) {
      out << row.tick << ',' << row.animat_id;
      for (const auto& m : log.metrics) {
        if (m == "hunger") out << ',' << format_double(row.physiology.hunger);
        if (m == "thirst") out << ',' << format_double(row.physiology.thirst);
        if (m == "energy") out << ',' << format_double(row.physiology.energy);
        if (m == "koncepts") out << ',' << total << ',' << by_level;
        if (m == "action") out << ',' << to_string(row.action);
      }
      out << '\n';
    } else {
      nlohmann::ordered_json j;
      j["tick"] = row.tick;
      j["animat"] = row.animat_id;
      for (const auto& m : log.metrics) {
        if (m == "hunger") j["hunger"] = row.physiology.hunger;
        if (m == "thirst") j["thirst"] = row.physiology.thirst;
        if (m == "energy") j["energy"] = row.physiology.energy;
        if (m == "koncepts") {
          j["koncepts"] = total;
          j["koncepts_by_level"] = row.koncept_counts;
        }
        if (m == "action") j["action"] = to_string(row.action);
      }
      out << j.dump() << '\n';
    }
  }
  write_text_atomic(path, out.str());
}

void export_summary(const MetricsLog& log, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["scenario"] = log.scenario;
  j["seed"] = log.seed;
  j["ticks_requested"] = log.ticks_requested;
  j["ticks_run"] = log.ticks_run;
  auto runs = nlohmann::ordered_json::array();
  for (const auto& s : log.summaries) {
    nlohmann::ordered_json r;
    r["animat"] = s.animat_id;
    r["controller"] = to_string(s.controller);
    r["death_tick"] = s.death_tick ? nlohmann::ordered_json(*s.death_tick) : nlohmann::ordered_json(nullptr);
    r["survival"] = s.survival;
    r["total_koncepts"] = s.total_koncepts;
    r["level_counts"] = s.level_counts;
    r["mean_radius"] = s.mean_radius;
    r["capacity_refusals"] = s.capacity_refusals;
    r["late_mean_hunger"] = s.late_mean_hunger;
    runs.push_back(r);
  }
  j["runs"] = runs;
  write_document_atomic(path, j);
}

}  // namespace keba
