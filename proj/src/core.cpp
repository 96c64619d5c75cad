#include "keba/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace keba {

namespace {

constexpr std::array<std::string_view, kActionCount> kActionNames{"eat", "drink", "none"};

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

std::string_view to_string(Action action) { return kActionNames[index_of(action)]; }

std::optional<Action> parse_action(std::string_view name) {
  for (auto action : kAllActions) {
    if (to_string(action) == name) return action;
  }
  return std::nullopt;
}

std::string_view to_string(StimulusSign sign) {
  switch (sign) {
    case StimulusSign::positive: return "positive";
    case StimulusSign::negative: return "negative";
    case StimulusSign::none: break;
  }
  return "none";
}

std::optional<StimulusSign> parse_stimulus_sign(std::string_view name) {
  if (name == "positive") return StimulusSign::positive;
  if (name == "negative") return StimulusSign::negative;
  if (name == "none") return StimulusSign::none;
  return std::nullopt;
}

std::size_t argmax_lowest(const ActionLinks& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

void KebaParams::validate() const {
  require(activation_potential > 0.0, "keba.activation_potential must be positive");
  require(persistence > 0.0, "keba.persistence must be positive");
  require(stability_speed >= 0.0 && stability_speed <= 1.0, "keba.stability_speed must lie in [0,1]");
  require(center_rate > 0.0 && center_rate <= 1.0, "keba.center_rate must lie in (0,1]");
  require(radius_rate > 0.0, "keba.radius_rate must be positive");
  require(initial_r1 > 0.0, "keba.initial_r1 must be positive");
  require(initial_r1 < initial_r2, "keba.initial_r1 must be smaller than keba.initial_r2");
  require(noise_floor >= 0.0 && noise_floor <= 1.0, "keba.noise_floor must lie in [0,1]");
  require(max_levels >= 0, "keba.max_levels must be non-negative");
  require(max_koncepts_per_level >= 1, "keba.max_koncepts_per_level must be at least 1");
  require(std::isfinite(active_threshold), "keba.active_threshold must be finite");
}

double membership(double d, double r1, double r2) {
  if (!(r1 < r2)) throw std::invalid_argument("membership: r1 must be smaller than r2");
  if (!(d >= 0.0)) throw std::invalid_argument("membership: distance must be non-negative");
  if (d <= r1) return 1.0;
  if (d >= r2) return 0.0;
  return 1.0 - (d - r1) / (r2 - r1);
}

double update_activation(double v, double a_prev, int level, const KebaParams& params) {
  const double weight = std::pow(params.activation_potential, level) * params.persistence;
  const double a = (v + weight * a_prev) / (1.0 + weight);
  // Subnormals would keep a decayed koncept "active" for ~1000 extra ticks at a large cost.
  if (a < std::numeric_limits<double>::min()) return 0.0;
  return std::min(a, 1.0);
}

double update_stability(double s_prev, double a_t, double a_prev, double kappa) {
  return std::clamp(s_prev + kappa - std::abs(a_t - a_prev), 0.0, 1.0);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("euclidean_distance: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

void adapt_center(Koncept& koncept, std::span<const double> activations, const KebaParams& params) {
  if (koncept.level <= 0) throw std::invalid_argument("adapt_center: protokoncepts have no center");
  if (activations.size() != koncept.center.size()) {
    throw std::invalid_argument("adapt_center: activation vector does not match parent count");
  }
  const double step = params.center_rate * koncept.v;
  if (step == 0.0) return;
  for (std::size_t i = 0; i < koncept.center.size(); ++i) {
    koncept.center[i] = std::clamp(koncept.center[i] + step * (activations[i] - koncept.center[i]), 0.0, 1.0);
  }
}

void adapt_radii(Koncept& koncept, double d, const KebaParams& params) {
  if (!(koncept.v > 0.0) || !(d > params.noise_floor)) return;
  const double zeta = params.radius_rate;
  double& r1 = koncept.r1;
  double& r2 = koncept.r2;
  if (d <= r1 / 2.0) {
    r1 -= zeta;
  } else if (d <= r1) {
    r2 -= zeta;
  } else if (d <= (r1 + r2) / 2.0) {
    r1 += zeta;
  } else if (d <= r2) {
    r2 += zeta;
  }
  r1 = std::max(r1, zeta);
  r2 = std::max(r2, r1 + zeta);
}

ActionLinks init_links(int level, std::span<const ActionLinks> parent_links, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> medium(0.4, 0.6);
  ActionLinks links{};
  if (level == 0 || parent_links.empty()) {
    for (auto& link : links) link = medium(rng);
    return links;
  }
  for (std::size_t i = 0; i < kActionCount; ++i) {
    double mean = 0.0;
    for (const auto& p : parent_links) mean += p[i];
    mean /= static_cast<double>(parent_links.size());
    links[i] = (mean + medium(rng)) / 2.0;
  }
  return links;
}

// --- Hierarchy -------------------------------------------------------------

Hierarchy::Hierarchy(KebaParams params, std::uint64_t link_seed) : params_(params), link_rng_(link_seed) {
  params_.validate();
  levels_.emplace_back();
  auto& protos = levels_.front();
  protos.reserve(kProtokonceptCount);
  for (std::size_t i = 0; i < kProtokonceptCount; ++i) {
    Koncept k;
    k.id = KonceptId{next_id_++};
    k.level = 0;
    k.links = init_links(0, {}, link_rng_);
    index_koncept(k, i);
    protos.push_back(std::move(k));
  }
}

Hierarchy Hierarchy::restore(KebaParams params, std::vector<std::vector<Koncept>> levels, std::uint32_t next_id,
                             std::mt19937_64 link_rng, std::uint64_t capacity_refusals) {
  params.validate();
  Hierarchy h;
  h.params_ = params;
  h.next_id_ = next_id;
  h.link_rng_ = link_rng;
  h.capacity_refusals_ = capacity_refusals;

  require(!levels.empty() && levels.front().size() == kProtokonceptCount,
          "hierarchy: level 0 must hold exactly 15 protokoncepts");
  require(levels.size() <= static_cast<std::size_t>(params.max_levels) + 1,
          "hierarchy: more levels than keba.max_levels allows");

  for (std::size_t n = 0; n < levels.size(); ++n) {
    require(levels[n].size() <= std::max<std::size_t>(params.max_koncepts_per_level, kProtokonceptCount),
            "hierarchy: level exceeds koncept capacity");
    for (std::size_t i = 0; i < levels[n].size(); ++i) {
      const Koncept& k = levels[n][i];
      require(k.level == static_cast<int>(n), "hierarchy: koncept stored on the wrong level");
      require(k.id.value < next_id, "hierarchy: koncept id not below next_id");
      require(k.id.value >= h.slots_.size() || h.slots_[k.id.value].level < 0, "hierarchy: duplicate koncept id");
      auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
      require(unit(k.v) && unit(k.a) && unit(k.a_prev) && unit(k.s), "hierarchy: v/a/s outside [0,1]");
      for (double l : k.links) require(unit(l), "hierarchy: link outside [0,1]");
      if (n == 0) {
        require(k.parents.empty() && k.center.empty(), "hierarchy: protokoncepts carry no parents or center");
      } else {
        require(k.parents.size() >= 2, "hierarchy: koncept above level 0 needs at least two parents");
        require(k.center.size() == k.parents.size(), "hierarchy: center size differs from parent count");
        require(k.r1 > 0.0 && k.r1 < k.r2, "hierarchy: radii must satisfy 0 < r1 < r2");
        for (double c : k.center) require(unit(c), "hierarchy: center component outside [0,1]");
        for (auto pid : k.parents) {
          require(pid.value < h.slots_.size() && h.slots_[pid.value].level == static_cast<int>(n) - 1,
                  "hierarchy: parent id does not exist on the level below");
        }
      }
      h.index_koncept(k, i);
    }
    h.levels_.push_back(std::move(levels[n]));
  }
  return h;
}

void Hierarchy::index_koncept(const Koncept& k, std::size_t slot) {
  if (slots_.size() <= k.id.value) slots_.resize(k.id.value + 1);
  slots_[k.id.value] = Slot{k.level, static_cast<std::uint32_t>(slot)};
}

std::size_t Hierarchy::koncept_count() const {
  std::size_t total = 0;
  for (const auto& level : levels_) total += level.size();
  return total;
}

std::vector<std::size_t> Hierarchy::level_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(levels_.size());
  for (const auto& level : levels_) counts.push_back(level.size());
  return counts;
}

const Koncept* Hierarchy::find(KonceptId id) const {
  if (id.value >= slots_.size() || slots_[id.value].level < 0) return nullptr;
  const Slot slot = slots_[id.value];
  return &levels_[static_cast<std::size_t>(slot.level)][slot.index];
}

const Koncept& Hierarchy::lookup(KonceptId id) const {
  const Koncept* k = find(id);
  if (k == nullptr) throw std::out_of_range("hierarchy: unknown koncept id " + std::to_string(id.value));
  return *k;
}

void Hierarchy::ingest_protokoncepts(std::span<const double> sensor_vector) {
  if (sensor_vector.size() != kProtokonceptCount) {
    throw std::invalid_argument("ingest_protokoncepts: expected 15 channels, got " +
                                std::to_string(sensor_vector.size()));
  }
  for (std::size_t i = 0; i < kProtokonceptCount; ++i) {
    Koncept& k = levels_[0][i];
    k.a_prev = k.a;
    k.v = std::clamp(sensor_vector[i], 0.0, 1.0);
    k.a = update_activation(k.v, k.a_prev, 0, params_);
    k.s = update_stability(k.s, k.a, k.a_prev, params_.stability_speed);
  }
}

std::vector<double> Hierarchy::parent_activations(const Koncept& koncept) const {
  std::vector<double> out;
  out.reserve(koncept.parents.size());
  for (auto pid : koncept.parents) out.push_back(lookup(pid).a);
  return out;
}

PropagationReport Hierarchy::propagate_level(std::size_t n) {
  if (n >= levels_.size()) throw std::out_of_range("propagate_level: level does not exist");
  if (n + 1 > static_cast<std::size_t>(params_.max_levels)) {
    throw std::out_of_range("propagate_level: level n+1 exceeds keba.max_levels");
  }

  PropagationReport report;
  std::size_t active = 0;
  bool stable = true;
  for (const auto& k : levels_[n]) {
    if (k.s < 1.0) {
      stable = false;
      break;
    }
    if (k.a > params_.active_threshold) ++active;
  }
  if (!stable || active < 2) return report;
  report.gate_passed = true;

  if (levels_.size() == n + 1) levels_.emplace_back();
  const auto& lower = levels_[n];
  auto& upper = levels_[n + 1];
  const int upper_level = static_cast<int>(n + 1);

  std::vector<double> scratch;
  for (auto& k : upper) {
    scratch.clear();
    for (auto pid : k.parents) scratch.push_back(lookup(pid).a);
    k.a_prev = k.a;
    k.v = membership(euclidean_distance(scratch, k.center), k.r1, k.r2);
    if (k.v > 0.0) report.matched.push_back(k.id);
  }

  if (report.matched.empty()) {
    if (upper.size() >= params_.max_koncepts_per_level) {
      report.capacity_refused = true;
      ++capacity_refusals_;
    } else {
      Koncept fresh;
      fresh.id = KonceptId{next_id_++};
      fresh.level = upper_level;
      std::vector<ActionLinks> parent_links;
      for (const auto& p : lower) {
        if (p.a > params_.active_threshold) {
          fresh.parents.push_back(p.id);
          fresh.center.push_back(p.a);
          parent_links.push_back(p.links);
        }
      }
      fresh.r1 = params_.initial_r1;
      fresh.r2 = params_.initial_r2;
      fresh.v = 1.0;
      fresh.links = init_links(upper_level, parent_links, link_rng_);
      index_koncept(fresh, upper.size());
      report.created = fresh.id;
      upper.push_back(std::move(fresh));
    }
  }

  for (auto& k : upper) {
    k.a = update_activation(k.v, k.a_prev, upper_level, params_);
    k.s = update_stability(k.s, k.a, k.a_prev, params_.stability_speed);
  }
  return report;
}

void Hierarchy::plasticity_pass(std::size_t through_level) {
  const std::size_t top = std::min(through_level, levels_.size() - 1);
  for (std::size_t n = 1; n <= top; ++n) {
    for (auto& k : levels_[n]) {
      if (!(k.v > 0.0)) continue;
      const auto activations = parent_activations(k);
      adapt_center(k, activations, params_);
      adapt_radii(k, euclidean_distance(activations, k.center), params_);
    }
  }
}

std::size_t Hierarchy::step(std::span<const double> sensor_vector) {
  ingest_protokoncepts(sensor_vector);
  std::size_t top = 0;
  const auto max_levels = static_cast<std::size_t>(params_.max_levels);
  while (top < max_levels && top < levels_.size()) {
    if (!propagate_level(top).gate_passed) break;
    ++top;
  }
  plasticity_pass(top);
  return top;
}

void Hierarchy::reinforce(Action actual, const StimulusSignal& stimulus) {
  if (stimulus.sign == StimulusSign::none) return;
  const bool positive = stimulus.sign == StimulusSign::positive;
  const std::size_t actual_index = index_of(actual);
  for (auto& level : levels_) {
    for (auto& k : level) {
      if (!(k.a > params_.active_threshold)) continue;
      const std::size_t greatest = argmax_lowest(k.links);
      const bool increment = (greatest == actual_index) == positive;
      k.links[greatest] = increment ? 1.0 : 0.0;
    }
  }
}

VoteResult Hierarchy::vote_and_select() const {
  VoteResult result;
  for (const auto& level : levels_) {
    for (const auto& k : level) {
      if (!(k.v > 0.0)) continue;
      const double weight = static_cast<double>((k.level + 1) * (k.level + 1));
      for (std::size_t i = 0; i < kActionCount; ++i) result.scores[i] += k.v * k.links[i] * weight;
    }
  }
  const bool any = std::any_of(result.scores.begin(), result.scores.end(), [](double x) { return x > 0.0; });
  result.action = any ? kAllActions[argmax_lowest(result.scores)] : Action::none;
  return result;
}

bool Hierarchy::operator==(const Hierarchy& other) const {
  return params_ == other.params_ && levels_ == other.levels_ &&
         next_id_ == other.next_id_ && link_rng_ == other.link_rng_ &&
         capacity_refusals_ == other.capacity_refusals_;
}

}  // namespace keba
