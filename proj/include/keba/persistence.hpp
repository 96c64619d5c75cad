#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "keba/agent.hpp"
#include "keba/scenario.hpp"

namespace keba {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kCodeVersion = "keba-lab 0.1.0";
inline constexpr std::string_view kStateFormat = "keba-lab-state";
inline constexpr std::string_view kScenarioFormat = "keba-lab-scenario";

/// Malformed or unsupported document. `path()` is a JSON path such as `$.animats[0].body.heading`.
class DocumentError : public std::runtime_error {
 public:
  DocumentError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Non-fatal findings while loading, e.g. unknown fields.
struct LoadReport {
  std::vector<std::string> warnings;
};

/// Lossless text form of a double: hexadecimal significand and binary exponent.
std::string encode_double(double value);
/// Accepts the hexadecimal form or a plain decimal string; throws std::invalid_argument.
double decode_double(std::string_view text);

/// Complete simulation state at a tick boundary. Floating-point state is written bit-exactly.
nlohmann::ordered_json save_state(const Simulation& sim, const ScenarioConfig* scenario_echo = nullptr);

/// Rebuilds a simulation. Throws DocumentError on version mismatch or malformed content.
Simulation load_state(const nlohmann::json& document, LoadReport* report = nullptr);

/// Hierarchy tree: params, next_id and per-level koncepts (id, level, parents, center, r1, r2, v, a,
/// a_prev, s, links). `exact` selects the lossless number encoding used in state documents.
nlohmann::ordered_json hierarchy_to_json(const Hierarchy& hierarchy, bool exact);

/// Scenario config in the same document format. Numbers are written in plain decimal.
nlohmann::ordered_json scenario_to_json(const ScenarioConfig& config);
/// Missing optional fields keep their defaults; unknown fields produce warnings.
ScenarioConfig scenario_from_json(const nlohmann::json& document, LoadReport* report = nullptr);

/// Parses a file; truncated or invalid JSON raises DocumentError.
nlohmann::json read_document(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it into place, so no partial file is left behind.
/// Throws DocumentError on failure.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);
void write_document_atomic(const std::filesystem::path& path, const nlohmann::ordered_json& document);

void save_state_file(const std::filesystem::path& path, const Simulation& sim,
                     const ScenarioConfig* scenario_echo = nullptr);
Simulation load_state_file(const std::filesystem::path& path, LoadReport* report = nullptr);
ScenarioConfig load_scenario_file(const std::filesystem::path& path, LoadReport* report = nullptr);

}  // namespace keba
