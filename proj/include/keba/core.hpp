#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace keba {

enum class Action : std::uint8_t { eat = 0, drink = 1, none = 2 };

inline constexpr std::size_t kActionCount = 3;
inline constexpr std::array<Action, kActionCount> kAllActions{Action::eat, Action::drink, Action::none};

std::string_view to_string(Action action);
std::optional<Action> parse_action(std::string_view name);

inline constexpr std::size_t index_of(Action action) { return static_cast<std::size_t>(action); }

using ActionLinks = std::array<double, kActionCount>;

/// Index of the greatest entry; ties resolve to the lowest action index.
std::size_t argmax_lowest(const ActionLinks& values);

// Protokoncept slots: 9 qualia channels, 3 internal variables, 3 action indicators.
inline constexpr std::size_t kQualiaChannels = 9;
inline constexpr std::size_t kProtokonceptCount = 15;
inline constexpr std::size_t kEnergySlot = 9;
inline constexpr std::size_t kHungerSlot = 10;
inline constexpr std::size_t kThirstSlot = 11;
inline constexpr std::size_t kActionSlot = 12;

using SensorVector = std::array<double, kProtokonceptCount>;

struct KebaParams {
  double activation_potential = 2.0;  // A
  double persistence = 1.0;           // iota
  double stability_speed = 0.05;      // kappa
  double center_rate = 0.05;          // eta
  double radius_rate = 0.005;         // zeta
  double initial_r1 = 0.1;
  double initial_r2 = 0.25;
  double noise_floor = 0.0;
  int max_levels = 3;
  std::size_t max_koncepts_per_level = 512;
  double active_threshold = 0.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const KebaParams&) const = default;
};

/// Strongly typed koncept identifier; ids are allocated sequentially per hierarchy.
struct KonceptId {
  std::uint32_t value = 0;
  friend bool operator==(KonceptId, KonceptId) = default;
  friend auto operator<=>(KonceptId, KonceptId) = default;
};

struct Koncept {
  KonceptId id;
  int level = 0;
  std::vector<KonceptId> parents;  // level - 1, empty at level 0
  std::vector<double> center;      // one coordinate per parent
  double r1 = 0.0;
  double r2 = 0.0;
  double v = 0.0;
  double a = 0.0;
  double a_prev = 0.0;
  double s = 0.0;
  ActionLinks links{};

  bool operator==(const Koncept&) const = default;
};

enum class StimulusSign : std::uint8_t { none = 0, positive = 1, negative = 2 };

std::string_view to_string(StimulusSign sign);
std::optional<StimulusSign> parse_stimulus_sign(std::string_view name);

struct StimulusSignal {
  StimulusSign sign = StimulusSign::none;
  double magnitude = 0.0;

  static StimulusSignal none() { return {}; }
  static StimulusSignal positive(double magnitude) { return {StimulusSign::positive, magnitude}; }
  static StimulusSignal negative(double magnitude) { return {StimulusSign::negative, magnitude}; }

  bool operator==(const StimulusSignal&) const = default;
};

// Eq. 1-5 primitives. Pure functions; exposed for direct testing.

/// Linear fuzzy membership of distance `d` in an open ball with radii r1 < r2.
/// Throws std::invalid_argument when r1 >= r2 or d < 0.
double membership(double d, double r1, double r2);

/// History-weighted activation: (v + A^n*iota*a_prev) / (1 + A^n*iota).
/// Subnormal results are flushed to zero.
double update_activation(double v, double a_prev, int level, const KebaParams& params);

/// s + kappa - |a_t - a_prev|, clamped to [0, 1].
double update_stability(double s_prev, double a_t, double a_prev, double kappa);

/// Moves the center toward `activations` by eta * v.
void adapt_center(Koncept& koncept, std::span<const double> activations, const KebaParams& params);

/// Adjusts the radii for a sample at distance `d` from the center, then restores
/// 0 < r1 < r2. No-op unless v > 0 and d > noise_floor.
void adapt_radii(Koncept& koncept, double d, const KebaParams& params);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Medium-valued random links; children average their parents' links with a fresh draw.
ActionLinks init_links(int level, std::span<const ActionLinks> parent_links, std::mt19937_64& rng);

struct PropagationReport {
  std::vector<KonceptId> matched;     // koncepts at level n+1 with v > 0
  std::optional<KonceptId> created;
  bool gate_passed = false;
  bool capacity_refused = false;
};

struct VoteResult {
  Action action = Action::none;
  ActionLinks scores{};
};

/// Recursive koncept hierarchy over a 15-channel protokoncept stream.
/// Single-owner; not safe for concurrent use.
class Hierarchy {
 public:
  explicit Hierarchy(KebaParams params, std::uint64_t link_seed = 0);

  /// Rebuilds a hierarchy from stored koncepts (persistence). Validates structure;
  /// throws std::invalid_argument on any invariant violation.
  static Hierarchy restore(KebaParams params, std::vector<std::vector<Koncept>> levels,
                           std::uint32_t next_id, std::mt19937_64 link_rng,
                           std::uint64_t capacity_refusals);

  const KebaParams& params() const { return params_; }
  KebaParams& mutable_params() { return params_; }

  std::size_t level_count() const { return levels_.size(); }
  std::span<const Koncept> level(std::size_t n) const { return levels_.at(n); }
  const std::vector<std::vector<Koncept>>& levels() const { return levels_; }
  std::size_t koncept_count() const;
  std::vector<std::size_t> level_counts() const;

  const Koncept* find(KonceptId id) const;
  std::uint32_t next_id() const { return next_id_; }
  const std::mt19937_64& link_rng() const { return link_rng_; }
  std::uint64_t capacity_refusals() const { return capacity_refusals_; }

  void ingest_protokoncepts(std::span<const double> sensor_vector);

  /// Evaluates level n+1 from the activations of level n.
  PropagationReport propagate_level(std::size_t n);

  /// Parent activations of `koncept`, aligned with its center.
  std::vector<double> parent_activations(const Koncept& koncept) const;

  /// Eq. 4 then Eq. 5 over every koncept on levels 1..through_level.
  void plasticity_pass(std::size_t through_level);

  /// Ingest, bottom-up propagation until the first closed gate, plasticity.
  /// Returns the highest level updated this tick.
  std::size_t step(std::span<const double> sensor_vector);

  void reinforce(Action actual, const StimulusSignal& stimulus);

  VoteResult vote_and_select() const;

  bool operator==(const Hierarchy& other) const;

 private:
  Hierarchy() = default;
  const Koncept& lookup(KonceptId id) const;
  void index_koncept(const Koncept& k, std::size_t slot);

  struct Slot {
    std::int32_t level = -1;
    std::uint32_t index = 0;
  };

  KebaParams params_;
  std::vector<std::vector<Koncept>> levels_;
  std::vector<Slot> slots_;  // indexed by KonceptId::value
  std::uint32_t next_id_ = 0;
  std::mt19937_64 link_rng_;
  std::uint64_t capacity_refusals_ = 0;
};

}  // namespace keba
