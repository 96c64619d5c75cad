#include "keba/persistence.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <system_error>
#include <type_traits>
#include <unistd.h>

namespace keba {

DocumentError::DocumentError(std::string path, const std::string& message)
    : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

std::string encode_double(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("encode_double: non-finite value");
  std::array<char, 64> buf{};
  const bool negative = std::signbit(value);
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), std::fabs(value), std::chars_format::hex);
  if (ec != std::errc{}) throw std::invalid_argument("encode_double: formatting failed");
  return std::string(negative ? "-0x" : "0x") + std::string(buf.data(), end);
}

double decode_double(std::string_view text) {
  std::string_view body = text;
  bool negative = false;
  if (!body.empty() && (body.front() == '-' || body.front() == '+')) {
    negative = body.front() == '-';
    body.remove_prefix(1);
  }
  double value = 0.0;
  std::from_chars_result result{};
  if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
    body.remove_prefix(2);
    result = std::from_chars(body.data(), body.data() + body.size(), value, std::chars_format::hex);
  } else {
    result = std::from_chars(body.data(), body.data() + body.size(), value, std::chars_format::general);
  }
  if (body.empty() || result.ec != std::errc{} || result.ptr != body.data() + body.size() || !std::isfinite(value)) {
    throw std::invalid_argument("not a finite number: '" + std::string(text) + "'");
  }
  return negative ? -value : value;
}

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

enum class Numbers { exact, plain };

ojson number(double v, Numbers mode) { return mode == Numbers::exact ? ojson(encode_double(v)) : ojson(v); }

template <class P, class F>
void visit_keba(P& p, F&& f) {
  f("activation_potential", p.activation_potential);
  f("persistence", p.persistence);
  f("stability_speed", p.stability_speed);
  f("center_rate", p.center_rate);
  f("radius_rate", p.radius_rate);
  f("initial_r1", p.initial_r1);
  f("initial_r2", p.initial_r2);
  f("noise_floor", p.noise_floor);
  f("max_levels", p.max_levels);
  f("max_koncepts_per_level", p.max_koncepts_per_level);
  f("active_threshold", p.active_threshold);
}

template <class Q, class F>
void visit_qualia(Q& q, F&& f) {
  f("redness", q.redness);
  f("greenness", q.greenness);
  f("blueness", q.blueness);
  f("odour_plus", q.odour_plus);
  f("odour_minus", q.odour_minus);
  f("loudness", q.loudness);
  f("flavour_plus", q.flavour_plus);
  f("flavour_minus", q.flavour_minus);
  f("hardness", q.hardness);
}

template <class P, class F>
void visit_world_scalars(P& p, F&& f) {
  f("width", p.width);
  f("height", p.height);
  f("noise_amplitude", p.noise_amplitude);
  f("hunger_rate", p.hunger_rate);
  f("thirst_rate", p.thirst_rate);
  f("high_threshold", p.high_threshold);
  f("low_threshold", p.low_threshold);
  f("energy_drain", p.energy_drain);
  f("energy_gain", p.energy_gain);
  f("eat_relief", p.eat_relief);
  f("drink_relief", p.drink_relief);
  f("penalty", p.penalty);
  f("food_shrink", p.food_shrink);
  f("predation_drain", p.predation_drain);
  f("lightning_ttl", p.lightning_ttl);
  f("rain_ttl", p.rain_ttl);
  f("spawn_rate", p.spawn_rate);
  f("wander_sigma", p.wander_sigma);
  f("circle_turn", p.circle_turn);
  f("speed", p.speed);
  f("perception_radius", p.perception_radius);
  f("animat_size", p.animat_size);
}

constexpr std::array<std::string_view, 4> kKindTableNames{"food", "rock", "lightning", "rain"};

template <class P>
auto& kind_table(P& p, std::size_t i) {
  switch (i) {
    case 0: return p.food;
    case 1: return p.rock;
    case 2: return p.lightning;
    default: return p.rain;
  }
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

// --- writers ---------------------------------------------------------------

template <class P, class Visit>
ojson write_fields(const P& p, Visit visit, Numbers mode) {
  ojson j = ojson::object();
  visit(p, [&](std::string_view k, const auto& v) {
    if constexpr (std::is_same_v<std::decay_t<decltype(v)>, double>) {
      j[std::string(k)] = number(v, mode);
    } else {
      j[std::string(k)] = v;
    }
  });
  return j;
}

ojson write_qualia(const Qualia& q, Numbers mode) {
  return write_fields(q, [](auto& x, auto&& f) { visit_qualia(x, f); }, mode);
}

ojson write_keba(const KebaParams& p, Numbers mode) {
  return write_fields(p, [](auto& x, auto&& f) { visit_keba(x, f); }, mode);
}

ojson write_world_params(const WorldParams& p, Numbers mode) {
  ojson j = write_fields(p, [](auto& x, auto&& f) { visit_world_scalars(x, f); }, mode);
  for (std::size_t i = 0; i < kKindTableNames.size(); ++i) {
    const KindDefaults& d = kind_table(p, i);
    j[std::string(kKindTableNames[i])] = ojson{{"size", number(d.size, mode)}, {"qualia", write_qualia(d.qualia, mode)}};
  }
  j["animat_qualia"] = write_qualia(p.animat_qualia, mode);
  return j;
}

ojson write_links(const ActionLinks& links, Numbers mode) {
  ojson j = ojson::object();
  for (auto a : kAllActions) j[std::string(to_string(a))] = number(links[index_of(a)], mode);
  return j;
}

ojson write_koncept(const Koncept& k, Numbers mode) {
  ojson j;
  j["id"] = k.id.value;
  j["level"] = k.level;
  if (k.level > 0) {
    ojson parents = ojson::array();
    for (auto p : k.parents) parents.push_back(p.value);
    j["parents"] = parents;
    ojson center = ojson::array();
    for (double c : k.center) center.push_back(number(c, mode));
    j["center"] = center;
    j["r1"] = number(k.r1, mode);
    j["r2"] = number(k.r2, mode);
  }
  j["v"] = number(k.v, mode);
  j["a"] = number(k.a, mode);
  j["a_prev"] = number(k.a_prev, mode);
  j["s"] = number(k.s, mode);
  j["links"] = write_links(k.links, mode);
  return j;
}

ojson write_hierarchy(const Hierarchy& h, Numbers mode) {
  ojson j;
  j["params"] = write_keba(h.params(), mode);
  j["next_id"] = h.next_id();
  j["capacity_refusals"] = h.capacity_refusals();
  ojson levels = ojson::array();
  for (const auto& level : h.levels()) {
    ojson arr = ojson::array();
    for (const auto& k : level) arr.push_back(write_koncept(k, mode));
    levels.push_back(arr);
  }
  j["levels"] = levels;
  return j;
}

ojson write_phenomenon(const Phenomenon& p) {
  ojson j;
  j["id"] = p.id;
  j["kind"] = to_string(p.kind);
  j["x"] = encode_double(p.position.x);
  j["y"] = encode_double(p.position.y);
  j["size"] = encode_double(p.size);
  j["age"] = p.age;
  j["qualia"] = write_qualia(p.qualia, Numbers::exact);
  return j;
}

ojson write_body(const AnimatBody& b) {
  ojson j;
  j["id"] = b.id;
  j["x"] = encode_double(b.position.x);
  j["y"] = encode_double(b.position.y);
  j["heading"] = encode_double(b.heading);
  j["locomotion"] = to_string(b.locomotion);
  j["perception_radius"] = encode_double(b.perception_radius);
  j["size"] = encode_double(b.size);
  j["current_action"] = to_string(b.current_action);
  j["energy"] = encode_double(b.physiology.energy);
  j["hunger"] = encode_double(b.physiology.hunger);
  j["thirst"] = encode_double(b.physiology.thirst);
  j["alive"] = b.physiology.alive;
  j["qualia"] = write_qualia(b.qualia, Numbers::exact);
  return j;
}

ojson write_event(const ScheduledEvent& e, Numbers mode) {
  return ojson{{"tick", e.at_tick}, {"kind", to_string(e.kind)}, {"x", number(e.position.x, mode)},
               {"y", number(e.position.y, mode)}};
}

std::string stream_name(std::uint64_t animat_id, std::string_view what) {
  return "animat/" + std::to_string(animat_id) + "/" + std::string(what);
}

// --- reader ----------------------------------------------------------------

struct Node {
  const json* value;
  std::string path;
};

class Reader {
 public:
  explicit Reader(LoadReport* report) : report_(report) {}

  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    throw DocumentError(path, message);
  }

  void warn(const std::string& message) {
    if (report_ != nullptr) report_->warnings.push_back(message);
  }

  void expect_object(const Node& n) const {
    if (!n.value->is_object()) fail(n.path, "expected an object");
  }

  const json& expect_array(const Node& n) const {
    if (!n.value->is_array()) fail(n.path, "expected an array");
    return *n.value;
  }

  std::optional<Node> optional_field(const Node& n, std::string_view key) const {
    expect_object(n);
    auto it = n.value->find(key);
    if (it == n.value->end()) return std::nullopt;
    return Node{&*it, n.path + "." + std::string(key)};
  }

  Node field(const Node& n, std::string_view key) const {
    auto f = optional_field(n, key);
    if (!f) fail(n.path + "." + std::string(key), "missing required field");
    return *f;
  }

  Node element(const Node& n, std::size_t i) const {
    return Node{&(*n.value)[i], n.path + "[" + std::to_string(i) + "]"};
  }

  void known_fields(const Node& n, const std::vector<std::string_view>& keys) {
    expect_object(n);
    for (auto it = n.value->begin(); it != n.value->end(); ++it) {
      if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
        warn(n.path + "." + it.key() + ": unknown field ignored");
      }
    }
  }

  double real(const Node& n) const {
    const json& j = *n.value;
    if (j.is_number()) {
      const double v = j.get<double>();
      if (!std::isfinite(v)) fail(n.path, "expected a finite number");
      return v;
    }
    if (j.is_string()) {
      try {
        return decode_double(j.get_ref<const std::string&>());
      } catch (const std::invalid_argument& e) {
        fail(n.path, e.what());
      }
    }
    fail(n.path, "expected a number or an encoded number string");
  }

  std::uint64_t u64(const Node& n) const {
    const json& j = *n.value;
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
    fail(n.path, "expected a non-negative integer");
  }

  int small_int(const Node& n) const {
    const json& j = *n.value;
    if (j.is_number_integer()) {
      const auto v = j.get<std::int64_t>();
      if (v >= std::numeric_limits<int>::min() && v <= std::numeric_limits<int>::max()) return static_cast<int>(v);
    }
    fail(n.path, "expected an integer");
  }

  std::string str(const Node& n) const {
    if (!n.value->is_string()) fail(n.path, "expected a string");
    return n.value->get<std::string>();
  }

  bool boolean(const Node& n) const {
    if (!n.value->is_boolean()) fail(n.path, "expected true or false");
    return n.value->get<bool>();
  }

  double unit(const Node& n) const {
    const double v = real(n);
    if (!(v >= 0.0 && v <= 1.0)) fail(n.path, "value outside [0, 1]");
    return v;
  }

  template <class T>
  void read_into(const Node& n, T& out) const {
    if constexpr (std::is_same_v<T, double>) {
      out = real(n);
    } else if constexpr (std::is_same_v<T, int>) {
      out = small_int(n);
    } else {
      out = static_cast<T>(u64(n));
    }
  }

  /// Reads every visited field; missing fields are errors when `strict`, otherwise keep their value.
  template <class P, class Visit>
  void read_fields(const Node& n, P& target, Visit visit, bool strict,
                   const std::vector<std::string_view>& extra_keys = {}) {
    expect_object(n);
    std::vector<std::string_view> keys = extra_keys;
    visit(target, [&](std::string_view k, auto& v) {
      keys.push_back(k);
      if (auto f = optional_field(n, k)) {
        read_into(*f, v);
      } else if (strict) {
        fail(n.path + "." + std::string(k), "missing required field");
      }
    });
    known_fields(n, keys);
  }

  Action action(const Node& n) const {
    auto a = parse_action(str(n));
    if (!a) fail(n.path, "unknown action '" + str(n) + "' (expected eat, drink or none)");
    return *a;
  }

  PhenomenonKind kind(const Node& n) const {
    auto k = parse_phenomenon_kind(str(n));
    if (!k) fail(n.path, "unknown phenomenon kind '" + str(n) + "'");
    return *k;
  }

  Locomotion locomotion(const Node& n) const {
    auto l = parse_locomotion(str(n));
    if (!l) fail(n.path, "unknown locomotion '" + str(n) + "' (expected wander, circular or static)");
    return *l;
  }

  ControllerKind controller(const Node& n) const {
    auto c = parse_controller_kind(str(n));
    if (!c) fail(n.path, "unknown controller '" + str(n) + "' (expected keba, random or none)");
    return *c;
  }

  std::mt19937_64 rng(const Node& n) const {
    std::istringstream in(str(n));
    std::mt19937_64 rng;
    in >> rng;
    if (in.fail()) fail(n.path, "malformed random stream state");
    in >> std::ws;
    if (!in.eof()) fail(n.path, "trailing data after random stream state");
    return rng;
  }

 private:
  LoadReport* report_;
};

void check_version(Reader& r, const Node& root, std::string_view format) {
  r.expect_object(root);
  const Node version = r.field(root, "schema_version");
  const auto found = r.u64(version);
  if (found != static_cast<std::uint64_t>(kSchemaVersion)) {
    r.fail(version.path, "unsupported schema version: expected " + std::to_string(kSchemaVersion) + ", found " +
                             std::to_string(found));
  }
  if (auto f = r.optional_field(root, "format")) {
    const auto name = r.str(*f);
    if (name != format) r.fail(f->path, "expected document format '" + std::string(format) + "', found '" + name + "'");
  }
}

Qualia read_qualia(Reader& r, const Node& n, Qualia base, bool strict) {
  r.read_fields(n, base, [](auto& x, auto&& f) { visit_qualia(x, f); }, strict);
  for (double c : base.channels()) {
    if (!(c >= 0.0 && c <= 1.0)) r.fail(n.path, "qualia components must lie in [0, 1]");
  }
  return base;
}

KebaParams read_keba(Reader& r, const Node& n, KebaParams base, bool strict) {
  r.read_fields(n, base, [](auto& x, auto&& f) { visit_keba(x, f); }, strict);
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(n.path, e.what());
  }
  return base;
}

WorldParams read_world_params(Reader& r, const Node& n, WorldParams base, bool strict) {
  std::vector<std::string_view> extra(kKindTableNames.begin(), kKindTableNames.end());
  extra.push_back("animat_qualia");
  r.read_fields(n, base, [](auto& x, auto&& f) { visit_world_scalars(x, f); }, strict, extra);
  for (std::size_t i = 0; i < kKindTableNames.size(); ++i) {
    KindDefaults& d = kind_table(base, i);
    auto table = strict ? std::optional<Node>(r.field(n, kKindTableNames[i])) : r.optional_field(n, kKindTableNames[i]);
    if (!table) continue;
    r.known_fields(*table, {"size", "qualia"});
    if (auto s = strict ? std::optional<Node>(r.field(*table, "size")) : r.optional_field(*table, "size")) {
      d.size = r.real(*s);
    }
    if (auto q = strict ? std::optional<Node>(r.field(*table, "qualia")) : r.optional_field(*table, "qualia")) {
      d.qualia = read_qualia(r, *q, d.qualia, strict);
    }
  }
  if (auto q = strict ? std::optional<Node>(r.field(n, "animat_qualia")) : r.optional_field(n, "animat_qualia")) {
    base.animat_qualia = read_qualia(r, *q, base.animat_qualia, strict);
  }
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(n.path, e.what());
  }
  return base;
}

ActionLinks read_links(Reader& r, const Node& n) {
  r.known_fields(n, {"eat", "drink", "none"});
  ActionLinks links{};
  for (auto a : kAllActions) links[index_of(a)] = r.unit(r.field(n, to_string(a)));
  return links;
}

Koncept read_koncept(Reader& r, const Node& n, int expected_level) {
  Koncept k;
  const Node id = r.field(n, "id");
  const auto raw_id = r.u64(id);
  if (raw_id > std::numeric_limits<std::uint32_t>::max()) r.fail(id.path, "koncept id out of range");
  k.id = KonceptId{static_cast<std::uint32_t>(raw_id)};
  const Node level = r.field(n, "level");
  k.level = r.small_int(level);
  if (k.level != expected_level) r.fail(level.path, "koncept stored on level " + std::to_string(expected_level));
  if (k.level > 0) {
    r.known_fields(n, {"id", "level", "parents", "center", "r1", "r2", "v", "a", "a_prev", "s", "links"});
    const Node parents = r.field(n, "parents");
    const json& pa = r.expect_array(parents);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const auto pid = r.u64(r.element(parents, i));
      if (pid > std::numeric_limits<std::uint32_t>::max()) r.fail(r.element(parents, i).path, "id out of range");
      k.parents.push_back(KonceptId{static_cast<std::uint32_t>(pid)});
    }
    if (k.parents.size() < 2) r.fail(parents.path, "a koncept above level 0 needs at least two parents");
    const Node center = r.field(n, "center");
    const json& ca = r.expect_array(center);
    if (ca.size() != k.parents.size()) r.fail(center.path, "center must have one coordinate per parent");
    for (std::size_t i = 0; i < ca.size(); ++i) k.center.push_back(r.unit(r.element(center, i)));
    const Node r1 = r.field(n, "r1");
    const Node r2 = r.field(n, "r2");
    k.r1 = r.real(r1);
    k.r2 = r.real(r2);
    if (!(k.r1 > 0.0)) r.fail(r1.path, "invariant violation: r1 must be positive");
    if (!(k.r1 < k.r2)) r.fail(r1.path, "invariant violation: r1 must be below r2");
  } else {
    r.known_fields(n, {"id", "level", "v", "a", "a_prev", "s", "links"});
  }
  k.v = r.unit(r.field(n, "v"));
  k.a = r.unit(r.field(n, "a"));
  k.a_prev = r.unit(r.field(n, "a_prev"));
  k.s = r.unit(r.field(n, "s"));
  k.links = read_links(r, r.field(n, "links"));
  return k;
}

Hierarchy read_hierarchy(Reader& r, const Node& n, std::mt19937_64 link_rng) {
  r.known_fields(n, {"params", "next_id", "capacity_refusals", "levels"});
  const KebaParams params = read_keba(r, r.field(n, "params"), KebaParams{}, true);
  const Node next = r.field(n, "next_id");
  const auto next_id = r.u64(next);
  if (next_id > std::numeric_limits<std::uint32_t>::max()) r.fail(next.path, "next_id out of range");
  const auto refusals = r.u64(r.field(n, "capacity_refusals"));
  const Node levels_node = r.field(n, "levels");
  const json& la = r.expect_array(levels_node);
  std::vector<std::vector<Koncept>> levels;
  for (std::size_t lv = 0; lv < la.size(); ++lv) {
    const Node level = r.element(levels_node, lv);
    const json& ka = r.expect_array(level);
    std::vector<Koncept> koncepts;
    koncepts.reserve(ka.size());
    for (std::size_t i = 0; i < ka.size(); ++i) {
      koncepts.push_back(read_koncept(r, r.element(level, i), static_cast<int>(lv)));
    }
    levels.push_back(std::move(koncepts));
  }
  try {
    return Hierarchy::restore(params, std::move(levels), static_cast<std::uint32_t>(next_id), link_rng, refusals);
  } catch (const std::exception& e) {
    r.fail(n.path, std::string("invariant violation: ") + e.what());
  }
}

Vec2 read_position(Reader& r, const Node& n) { return Vec2{r.real(r.field(n, "x")), r.real(r.field(n, "y"))}; }

Phenomenon read_phenomenon(Reader& r, const Node& n) {
  r.known_fields(n, {"id", "kind", "x", "y", "size", "age", "qualia"});
  Phenomenon p;
  p.id = r.u64(r.field(n, "id"));
  p.kind = r.kind(r.field(n, "kind"));
  p.position = read_position(r, n);
  const Node size = r.field(n, "size");
  p.size = r.real(size);
  if (!(p.size > 0.0)) r.fail(size.path, "size must be positive");
  p.age = r.u64(r.field(n, "age"));
  p.qualia = read_qualia(r, r.field(n, "qualia"), Qualia{}, true);
  return p;
}

AnimatBody read_body(Reader& r, const Node& n) {
  r.known_fields(n, {"id", "x", "y", "heading", "locomotion", "perception_radius", "size", "current_action", "energy",
                     "hunger", "thirst", "alive", "qualia"});
  AnimatBody b;
  b.id = r.u64(r.field(n, "id"));
  b.position = read_position(r, n);
  b.heading = r.real(r.field(n, "heading"));
  b.locomotion = r.locomotion(r.field(n, "locomotion"));
  b.perception_radius = r.real(r.field(n, "perception_radius"));
  b.size = r.real(r.field(n, "size"));
  b.current_action = r.action(r.field(n, "current_action"));
  b.physiology.energy = r.unit(r.field(n, "energy"));
  b.physiology.hunger = r.unit(r.field(n, "hunger"));
  b.physiology.thirst = r.unit(r.field(n, "thirst"));
  b.physiology.alive = r.boolean(r.field(n, "alive"));
  b.qualia = read_qualia(r, r.field(n, "qualia"), Qualia{}, true);
  return b;
}

ScheduledEvent read_event(Reader& r, const Node& n) {
  r.known_fields(n, {"tick", "kind", "x", "y"});
  ScheduledEvent e;
  e.at_tick = r.u64(r.field(n, "tick"));
  e.kind = r.kind(r.field(n, "kind"));
  e.position = read_position(r, n);
  return e;
}

ScenarioConfig read_scenario(Reader& r, const Node& root) {
  check_version(r, root, kScenarioFormat);
  r.known_fields(root, {"format", "schema_version", "name", "seed", "ticks", "stop_when_all_dead", "world",
                        "placements", "animats", "events", "metrics", "output"});
  ScenarioConfig c;
  if (auto f = r.optional_field(root, "name")) c.name = r.str(*f);
  if (auto f = r.optional_field(root, "seed")) c.seed = r.u64(*f);
  if (auto f = r.optional_field(root, "ticks")) c.ticks = r.u64(*f);
  if (auto f = r.optional_field(root, "stop_when_all_dead")) c.stop_when_all_dead = r.boolean(*f);
  if (auto f = r.optional_field(root, "world")) c.world = read_world_params(r, *f, WorldParams{}, false);
  if (auto f = r.optional_field(root, "placements")) {
    const json& arr = r.expect_array(*f);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const Node p = r.element(*f, i);
      r.known_fields(p, {"kind", "count"});
      c.placements.push_back({r.kind(r.field(p, "kind")), static_cast<std::size_t>(r.u64(r.field(p, "count")))});
    }
  }
  const Node animats = r.field(root, "animats");
  const json& aa = r.expect_array(animats);
  for (std::size_t i = 0; i < aa.size(); ++i) {
    const Node a = r.element(animats, i);
    r.known_fields(a, {"controller", "locomotion", "x", "y", "heading", "exploration_rate", "keba"});
    AnimatSpec spec;
    if (auto f = r.optional_field(a, "controller")) spec.controller = r.controller(*f);
    if (auto f = r.optional_field(a, "locomotion")) spec.locomotion = r.locomotion(*f);
    const auto x = r.optional_field(a, "x");
    const auto y = r.optional_field(a, "y");
    if (x.has_value() != y.has_value()) r.fail(a.path, "give both x and y, or neither");
    if (x) spec.position = Vec2{r.real(*x), r.real(*y)};
    if (auto f = r.optional_field(a, "heading")) spec.heading = r.real(*f);
    if (auto f = r.optional_field(a, "exploration_rate")) spec.exploration_rate = r.unit(*f);
    if (auto f = r.optional_field(a, "keba")) spec.keba = read_keba(r, *f, KebaParams{}, false);
    c.animats.push_back(spec);
  }
  if (auto f = r.optional_field(root, "events")) {
    const json& arr = r.expect_array(*f);
    for (std::size_t i = 0; i < arr.size(); ++i) c.events.push_back(read_event(r, r.element(*f, i)));
  }
  if (auto f = r.optional_field(root, "metrics")) {
    const json& arr = r.expect_array(*f);
    c.metrics.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) c.metrics.push_back(r.str(r.element(*f, i)));
  }
  if (auto f = r.optional_field(root, "output")) {
    r.known_fields(*f, {"csv", "jsonl"});
    if (auto p = r.optional_field(*f, "csv")) c.csv_path = r.str(*p);
    if (auto p = r.optional_field(*f, "jsonl")) c.jsonl_path = r.str(*p);
  }
  const auto problems = c.diagnostics();
  if (!problems.empty()) {
    std::string message = "invalid scenario:";
    for (const auto& p : problems) message += "\n  " + p;
    r.fail(root.path, message);
  }
  return c;
}

}  // namespace

nlohmann::ordered_json hierarchy_to_json(const Hierarchy& hierarchy, bool exact) {
  return write_hierarchy(hierarchy, exact ? Numbers::exact : Numbers::plain);
}

nlohmann::ordered_json scenario_to_json(const ScenarioConfig& c) {
  ojson j;
  j["format"] = kScenarioFormat;
  j["schema_version"] = kSchemaVersion;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["ticks"] = c.ticks;
  j["stop_when_all_dead"] = c.stop_when_all_dead;
  j["world"] = write_world_params(c.world, Numbers::plain);
  ojson placements = ojson::array();
  for (const auto& p : c.placements) placements.push_back(ojson{{"kind", to_string(p.kind)}, {"count", p.count}});
  j["placements"] = placements;
  ojson animats = ojson::array();
  for (const auto& a : c.animats) {
    ojson s;
    s["controller"] = to_string(a.controller);
    s["locomotion"] = to_string(a.locomotion);
    if (a.position) {
      s["x"] = a.position->x;
      s["y"] = a.position->y;
    }
    if (a.heading) s["heading"] = *a.heading;
    s["exploration_rate"] = a.exploration_rate;
    s["keba"] = write_keba(a.keba, Numbers::plain);
    animats.push_back(s);
  }
  j["animats"] = animats;
  ojson events = ojson::array();
  for (const auto& e : c.events) events.push_back(write_event(e, Numbers::plain));
  j["events"] = events;
  j["metrics"] = c.metrics;
  ojson output = ojson::object();
  if (c.csv_path) output["csv"] = *c.csv_path;
  if (c.jsonl_path) output["jsonl"] = *c.jsonl_path;
  j["output"] = output;
  return j;
}

ScenarioConfig scenario_from_json(const nlohmann::json& document, LoadReport* report) {
  Reader r(report);
  return read_scenario(r, Node{&document, "$"});
}

nlohmann::ordered_json save_state(const Simulation& sim, const ScenarioConfig* scenario_echo) {
  const WorldState& world = sim.world();
  ojson j;
  j["format"] = kStateFormat;
  j["schema_version"] = kSchemaVersion;
  j["code_version"] = kCodeVersion;
  j["seed"] = sim.seed();
  j["tick"] = sim.tick();

  ojson rng = ojson::object();
  rng["world/spawner"] = rng_text(sim.spawner_rng());
  rng["world/placement"] = rng_text(sim.placement_rng());
  for (std::size_t i = 0; i < world.animats.size(); ++i) {
    const auto id = world.animats[i].id;
    const Controller& c = sim.controllers()[i];
    rng[stream_name(id, "noise")] = rng_text(sim.streams()[i].noise);
    rng[stream_name(id, "locomotion")] = rng_text(sim.streams()[i].locomotion);
    rng[stream_name(id, "policy")] = rng_text(c.policy_rng);
    if (c.hierarchy) rng[stream_name(id, "links")] = rng_text(c.hierarchy->link_rng());
  }
  j["rng"] = rng;

  ojson w;
  w["params"] = write_world_params(world.params, Numbers::exact);
  w["next_id"] = world.next_id;
  ojson phenomena = ojson::array();
  for (const auto& p : world.phenomena) phenomena.push_back(write_phenomenon(p));
  w["phenomena"] = phenomena;
  j["world"] = w;

  ojson animats = ojson::array();
  for (std::size_t i = 0; i < world.animats.size(); ++i) {
    const Controller& c = sim.controllers()[i];
    ojson controller;
    controller["kind"] = to_string(c.kind);
    controller["exploration_rate"] = encode_double(c.exploration_rate);
    if (c.hierarchy) controller["hierarchy"] = write_hierarchy(*c.hierarchy, Numbers::exact);
    animats.push_back(ojson{{"body", write_body(world.animats[i])}, {"controller", controller}});
  }
  j["animats"] = animats;

  ojson schedule = ojson::array();
  for (const auto& e : sim.schedule()) schedule.push_back(write_event(e, Numbers::exact));
  j["schedule"] = schedule;
  if (scenario_echo != nullptr) j["scenario"] = scenario_to_json(*scenario_echo);
  return j;
}

Simulation load_state(const nlohmann::json& document, LoadReport* report) {
  Reader r(report);
  const Node root{&document, "$"};
  check_version(r, root, kStateFormat);
  r.known_fields(root, {"format", "schema_version", "code_version", "seed", "tick", "rng", "world", "animats",
                        "schedule", "scenario"});
  if (auto f = r.optional_field(root, "code_version")) {
    const auto version = r.str(*f);
    if (version != kCodeVersion) {
      r.warn("$.code_version: saved by '" + version + "', loading with '" + std::string(kCodeVersion) + "'");
    }
  }
  const auto seed = r.u64(r.field(root, "seed"));
  const auto tick = r.u64(r.field(root, "tick"));

  const Node rng = r.field(root, "rng");
  r.expect_object(rng);
  std::vector<std::string> used_streams;
  auto stream = [&](const std::string& name) {
    used_streams.push_back(name);
    auto it = rng.value->find(name);
    if (it == rng.value->end()) r.fail(rng.path + "." + name, "missing random stream state");
    return r.rng(Node{&*it, rng.path + "." + name});
  };

  const Node world_node = r.field(root, "world");
  r.known_fields(world_node, {"params", "next_id", "phenomena"});
  WorldState world;
  world.params = read_world_params(r, r.field(world_node, "params"), WorldParams{}, true);
  world.next_id = r.u64(r.field(world_node, "next_id"));
  const Node phenomena = r.field(world_node, "phenomena");
  const json& pa = r.expect_array(phenomena);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const Node pn = r.element(phenomena, i);
    Phenomenon p = read_phenomenon(r, pn);
    if (p.id >= world.next_id) r.fail(pn.path + ".id", "id not below world.next_id");
    world.phenomena.push_back(p);
  }

  std::vector<Controller> controllers;
  std::vector<AnimatStreams> streams;
  const Node animats = r.field(root, "animats");
  const json& aa = r.expect_array(animats);
  for (std::size_t i = 0; i < aa.size(); ++i) {
    const Node an = r.element(animats, i);
    r.known_fields(an, {"body", "controller"});
    const Node body_node = r.field(an, "body");
    AnimatBody body = read_body(r, body_node);
    if (body.id >= world.next_id) r.fail(body_node.path + ".id", "id not below world.next_id");
    if (!world.animats.empty() && world.animats.back().id >= body.id) {
      r.fail(body_node.path + ".id", "animats must be listed in ascending id order");
    }
    const Node cn = r.field(an, "controller");
    r.known_fields(cn, {"kind", "exploration_rate", "hierarchy"});
    Controller c;
    c.kind = r.controller(r.field(cn, "kind"));
    c.exploration_rate = r.unit(r.field(cn, "exploration_rate"));
    c.policy_rng = stream(stream_name(body.id, "policy"));
    const auto h = r.optional_field(cn, "hierarchy");
    if (c.kind == ControllerKind::keba) {
      if (!h) r.fail(cn.path + ".hierarchy", "missing required field");
      c.hierarchy = read_hierarchy(r, *h, stream(stream_name(body.id, "links")));
    } else if (h) {
      r.fail(h->path, "only keba controllers carry a hierarchy");
    }
    AnimatStreams s;
    s.noise = stream(stream_name(body.id, "noise"));
    s.locomotion = stream(stream_name(body.id, "locomotion"));
    world.animats.push_back(body);
    controllers.push_back(std::move(c));
    streams.push_back(s);
  }

  std::vector<ScheduledEvent> schedule;
  const Node sched = r.field(root, "schedule");
  const json& sa = r.expect_array(sched);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    schedule.push_back(read_event(r, r.element(sched, i)));
    if (i > 0 && schedule[i - 1].at_tick > schedule[i].at_tick) {
      r.fail(r.element(sched, i).path, "schedule must be sorted by tick");
    }
  }

  const auto spawner = stream("world/spawner");
  const auto placement = stream("world/placement");
  for (auto it = rng.value->begin(); it != rng.value->end(); ++it) {
    if (std::find(used_streams.begin(), used_streams.end(), it.key()) == used_streams.end()) {
      r.warn(rng.path + "." + it.key() + ": unknown random stream ignored");
    }
  }

  if (auto echo = r.optional_field(root, "scenario")) read_scenario(r, *echo);

  try {
    return Simulation::restore(std::move(world), std::move(controllers), std::move(streams), spawner, placement,
                               std::move(schedule), seed, tick);
  } catch (const std::invalid_argument& e) {
    r.fail("$", e.what());
  }
}

nlohmann::json read_document(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DocumentError(path.string(), "cannot open file for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DocumentError(path.string(), std::string("parse error: ") + e.what());
  }
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  const auto tmp = path.string() + ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DocumentError(path.string(), "cannot open file for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw DocumentError(path.string(), "write failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw DocumentError(path.string(), "rename failed: " + ec.message());
  }
}

void write_document_atomic(const std::filesystem::path& path, const nlohmann::ordered_json& document) {
  write_text_atomic(path, document.dump(2) + "\n");
}

void save_state_file(const std::filesystem::path& path, const Simulation& sim, const ScenarioConfig* scenario_echo) {
  write_document_atomic(path, save_state(sim, scenario_echo));
}

Simulation load_state_file(const std::filesystem::path& path, LoadReport* report) {
  return load_state(read_document(path), report);
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path, LoadReport* report) {
  return scenario_from_json(read_document(path), report);
}

}  // namespace keba
