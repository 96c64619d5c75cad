// Command-line entry point: experiments, live laboratory server and session replay.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "keba/experiments.hpp"
#include "keba/lab_session.hpp"
#include "keba/persistence.hpp"

#ifdef KEBA_HAVE_LAB_SERVER
#include "keba/lab_server.hpp"
#endif

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

keba::ScenarioConfig load_config(const std::string& path) {
  keba::LoadReport report;
  auto config = keba::load_scenario_file(path, &report);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  return config;
}

int run_command(const std::string& config_path, const std::string& csv, const std::string& jsonl,
                const std::string& summary, const std::string& save) {
  auto config = load_config(config_path);
  auto sim = keba::build_simulation(config);
  keba::MetricsRecorder recorder(config, sim);
  recorder.run(sim);
  const auto log = recorder.finish(sim);
  const std::string csv_path = !csv.empty() ? csv : config.csv_path.value_or("");
  const std::string jsonl_path = !jsonl.empty() ? jsonl : config.jsonl_path.value_or("");
  if (!csv_path.empty()) keba::export_metrics(log, keba::ExportFormat::csv, csv_path);
  if (!jsonl_path.empty()) keba::export_metrics(log, keba::ExportFormat::json_lines, jsonl_path);
  if (!summary.empty()) keba::export_summary(log, summary);
  if (!save.empty()) keba::save_state_file(save, sim, &config);
  std::printf("scenario %s seed %llu ticks %llu\n", log.scenario.c_str(), static_cast<unsigned long long>(log.seed),
              static_cast<unsigned long long>(log.ticks_run));
  for (const auto& s : log.summaries) {
    std::printf("  animat %llu (%s): %s at tick %llu, koncepts %zu, late hunger %.3f\n",
                static_cast<unsigned long long>(s.animat_id), std::string(keba::to_string(s.controller)).c_str(),
                s.death_tick ? "died" : "alive", static_cast<unsigned long long>(s.survival), s.total_koncepts,
                s.late_mean_hunger);
  }
  return 0;
}

int sweep_command(const std::string& config_path, const std::string& param, const std::vector<std::string>& values,
                  std::size_t seeds, unsigned workers, const std::string& out) {
  const auto config = load_config(config_path);
  const auto rows = keba::sweep(config, param, values, seeds, workers);
  std::ostringstream table;
  table << param << ",runs,koncepts_mean,koncepts_sd,survival_mean,survival_sd,survival_median,mean_radius\n";
  for (const auto& r : rows) {
    table << r.value << ',' << r.runs << ',' << r.koncepts.mean << ',' << r.koncepts.stddev << ','
          << r.survival.mean << ',' << r.survival.stddev << ',' << r.survival.median << ',' << r.mean_radius.mean
          << '\n';
  }
  std::cout << table.str();
  if (!out.empty()) keba::write_text_atomic(out, table.str());
  return 0;
}

int baselines_command(const std::string& config_path, std::size_t seeds, unsigned workers) {
  const auto config = load_config(config_path);
  const auto r = keba::compare_baselines(config, seeds, workers);
  std::printf("seeds %zu\n", r.seeds.size());
  std::printf("median survival: keba %.0f, no-action %.0f, random %.0f\n", r.median_keba, r.median_none,
              r.median_random);
  std::printf("seed agreement: random < no-action %.2f, keba > no-action %.2f, keba > random %.2f\n",
              r.random_below_none, r.keba_above_none, r.keba_above_random);
  std::printf("late mean hunger: keba %.3f, random %.3f\n", keba::spread_of(r.keba_late_hunger).mean,
              keba::spread_of(r.random_late_hunger).mean);
  return 0;
}

int similarity_command(const std::string& config_path, std::size_t seeds, std::size_t levels, double tol) {
  const auto config = load_config(config_path);
  for (const auto& row : keba::paired_similarity(config, seeds, levels, tol)) {
    std::printf("level %zu: similarity mean %.4f sd %.4f over %zu pairs\n", row.level, row.similarity.mean,
                row.similarity.stddev, row.by_seed.size());
  }
  return 0;
}

int serve_command(const std::string& scenario, const std::string& load, std::uint16_t port,
                  const std::string& address, const std::string& record, bool headless, bool start_running) {
  std::optional<keba::ScenarioConfig> config;
  if (!scenario.empty()) config = load_config(scenario);
  if (headless) {
    if (!config) throw CLI::ValidationError("--headless needs --scenario");
    return run_command(scenario, "", "", "", "");
  }
#ifdef KEBA_HAVE_LAB_SERVER
  auto sim = [&] {
    if (!load.empty()) {
      keba::LoadReport report;
      auto s = keba::load_state_file(load, &report);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      return s;
    }
    return keba::build_simulation(config ? *config : keba::lab_scenario(keba::ControllerKind::keba, 1, 0.1));
  }();
  keba::lab::Session session(std::move(sim), config);
  if (start_running) session.submit(nlohmann::json{{"command", "resume"}});
  keba::lab::ServerOptions options;
  options.port = port;
  options.address = address;
  if (!record.empty()) options.record_path = record;
  keba::lab::LabServer server(session, options);
  const auto bound = server.start();
  std::printf("laboratory listening on ws://%s:%u\n", address.c_str(), static_cast<unsigned>(bound));
  std::fflush(stdout);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run(g_stop);
  return 0;
#else
  (void)load, (void)port, (void)address, (void)record, (void)start_running;
  std::cerr << "this build has no laboratory server; use --headless\n";
  return 2;
#endif
}

int replay_command(const std::string& log_path, const std::string& save) {
  auto sim = keba::lab::Session::replay_file(log_path);
  std::printf("replayed to tick %llu\n", static_cast<unsigned long long>(sim.tick()));
  if (!save.empty()) keba::save_state_file(save, sim);
  return 0;
}

int template_command(const std::string& controller, double noise, std::uint64_t seed, const std::string& out) {
  auto kind = keba::parse_controller_kind(controller);
  if (!kind) throw CLI::ValidationError("--controller must be keba, random or none");
  const auto doc = keba::scenario_to_json(keba::lab_scenario(*kind, seed, noise));
  if (out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    keba::write_document_atomic(out, doc);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KEBA virtual laboratory"};
  app.require_subcommand(1);

  std::string config_path, csv, jsonl, summary, save;
  auto* run = app.add_subcommand("run", "Run one scenario and export its metrics");
  run->add_option("config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--csv", csv, "Series output (CSV)");
  run->add_option("--jsonl", jsonl, "Series output (JSON lines)");
  run->add_option("--summary", summary, "Per-run summary (JSON)");
  run->add_option("--save", save, "Final simulation state");

  std::string param = "noise", out;
  std::vector<std::string> values;
  std::size_t seeds = 20;
  unsigned workers = 1;
  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter over several seeds");
  sweep->add_option("config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", param, "noise, max_levels, locomotion, exploration_rate, persistence, ...");
  sweep->add_option("--values", values, "Values to sweep")->delimiter(',')->required();
  sweep->add_option("--seeds", seeds, "Seeds per value")->check(CLI::PositiveNumber);
  sweep->add_option("--workers", workers, "Parallel runs");
  sweep->add_option("--out", out, "Table output (CSV)");

  auto* baselines = app.add_subcommand("compare-baselines", "KEBA versus no-action and random controllers");
  baselines->add_option("config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
  baselines->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);
  baselines->add_option("--workers", workers, "Parallel runs");

  std::size_t levels = 2;
  double tol = 0.1;
  auto* similarity = app.add_subcommand("similarity", "Koncept similarity between two animats sharing a world");
  similarity->add_option("config", config_path, "Scenario file")->required()->check(CLI::ExistingFile);
  similarity->add_option("--seeds", seeds, "Number of paired runs")->check(CLI::PositiveNumber);
  similarity->add_option("--levels", levels, "Highest level compared")->check(CLI::PositiveNumber);
  similarity->add_option("--tol", tol, "Center distance tolerance");

  std::string scenario, load, address = "127.0.0.1", record;
  std::uint16_t port = 8765;
  bool headless = false, start_running = false;
  auto* serve = app.add_subcommand("serve", "Live laboratory over WebSocket");
  serve->add_option("--scenario", scenario, "Scenario file")->check(CLI::ExistingFile);
  serve->add_option("--load", load, "Saved state to resume")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--address", address, "Listen address");
  serve->add_option("--record", record, "Command log (JSON lines)");
  serve->add_flag("--headless", headless, "No server: run the scenario as an experiment");
  serve->add_flag("--running", start_running, "Start ticking immediately");

  std::string log_path;
  auto* replay = app.add_subcommand("replay", "Replay a recorded session");
  replay->add_option("log", log_path, "Command log")->required()->check(CLI::ExistingFile);
  replay->add_option("--save", save, "Final simulation state");

  std::string controller = "keba";
  double noise = 0.1;
  std::uint64_t seed = 1;
  auto* tmpl = app.add_subcommand("template", "Print the calibrated laboratory scenario");
  tmpl->add_option("--controller", controller, "keba, random or none");
  tmpl->add_option("--noise", noise, "Sensor noise amplitude");
  tmpl->add_option("--seed", seed, "Run seed");
  tmpl->add_option("-o,--out", out, "Output file");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(config_path, csv, jsonl, summary, save);
    if (*sweep) return sweep_command(config_path, param, values, seeds, workers, out);
    if (*baselines) return baselines_command(config_path, seeds, workers);
    if (*similarity) return similarity_command(config_path, seeds, levels, tol);
    if (*serve) return serve_command(scenario, load, port, address, record, headless, start_running);
    if (*replay) return replay_command(log_path, save);
    if (*tmpl) return template_command(controller, noise, seed, out);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
