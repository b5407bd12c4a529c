// sflc: batch simulation, acceptance verification and the live bridge.
//
//   sflc simulate <config> [--out dir]
//   sflc verify [--config file] [--dt x] [--scenarios dir] [--serial]
//   sflc serve <config> [--port n] [--address a] [--run-for seconds]
//
// Exit codes: 0 ok, 1 invalid configuration, 2 singular interaction matrix,
// 3 port in use, 4 non-finite state, 5 acceptance failure.

#include "sflc/acceptance.hpp"
#include "sflc/bridge_server.hpp"
#include "sflc/csv.hpp"
#include "sflc/metrics.hpp"
#include "sflc/scenario_config.hpp"
#include "sflc/simulation.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;

namespace {

enum Exit : int {
  kOk = 0,
  kInvalidConfig = 1,
  kSingular = 2,
  kPortInUse = 3,
  kNonFinite = 4,
  kVerifyFailed = 5,
};

constexpr const char* kOutputEnv = "SFLC_OUTPUT_DIR";

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

fs::path output_dir(const sflc::config::ScenarioConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return cfg.output;
}

int cmd_simulate(const std::string& config_path, const std::string& out_flag) {
  sflc::config::ScenarioConfig cfg;
  sflc::Scenario sc;
  try {
    cfg = sflc::config::load(config_path);
    sc = sflc::config::to_scenario(cfg);
  } catch (const sflc::config::ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  }

  sflc::SimLog log;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    log = sflc::run_scenario(sc);
  } catch (const sflc::SingularInteractionMatrix& e) {
    std::cerr << "simulation stopped: " << e.what() << "\n";
    return kSingular;
  } catch (const sflc::NonFiniteState& e) {
    std::cerr << "simulation stopped: " << e.what() << "\n";
    return kNonFinite;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path dir = output_dir(cfg, out_flag);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "cannot create output directory " << dir << ": " << ec.message() << "\n";
    return kInvalidConfig;
  }
  {
    std::ofstream csv(dir / "log.csv");
    sflc::csv::write(csv, log);
  }
  const auto metrics = sflc::compute_metrics(log);
  {
    auto j = sflc::to_json(metrics);
    j["name"] = cfg.name;
    std::ofstream(dir / "metrics.json") << j.dump(2) << "\n";
  }
  std::cout << cfg.name << ": " << log.steps() << " steps in " << std::fixed << std::setprecision(2) << wall
            << " s; terminal |e1| " << std::scientific << std::setprecision(3) << metrics.terminal_e1 << ", RMS |e1| "
            << metrics.rms_e1 << ", energy " << std::fixed << metrics.total_energy << "\n"
            << "wrote " << (dir / "log.csv").string() << " and " << (dir / "metrics.json").string() << "\n";
  return kOk;
}

int cmd_verify(const std::string& config_path, double dt, const std::string& scenarios, bool serial) {
  sflc::acceptance::VerifyOptions opts;
  opts.scenario_dir = scenarios;
  opts.parallel = !serial;
  if (!config_path.empty()) {
    try {
      const auto cfg = sflc::config::load(config_path);
      opts.gains = sflc::config::build_gains(cfg, false);
      opts.gains.check_against(sflc::mecanum::Plant::relative_degree());
      opts.dt = cfg.dt;
    } catch (const std::exception& e) {
      std::cerr << "invalid config: " << e.what() << "\n";
      return kInvalidConfig;
    }
  }
  if (dt > 0.0) opts.dt = dt;

  const auto results = sflc::acceptance::run_all(opts);
  for (const auto& r : results) std::cout << sflc::acceptance::format_line(r) << "\n";
  const auto passed = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.pass; });
  std::cout << passed << "/" << results.size() << " criteria passed\n";
  return sflc::acceptance::all_pass(results) ? kOk : kVerifyFailed;
}

int cmd_serve(const std::string& config_path, unsigned short port, const std::string& address, double run_for) {
  sflc::live::SessionConfig session;
  try {
    session = sflc::live::SessionConfig::from_scenario(sflc::config::load(config_path));
  } catch (const std::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kInvalidConfig;
  }
  sflc::bridge::ServerOptions opts;
  opts.port = port;
  opts.address = address;
  sflc::bridge::BridgeServer server(std::move(session), opts);
  try {
    server.start();
  } catch (const sflc::bridge::PortInUse& e) {
    std::cerr << e.what() << "\n";
    return kPortInUse;
  }
  std::cout << "listening on ws://" << address << ":" << server.port() << "/ws (health: /health)" << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto t0 = std::chrono::steady_clock::now();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    if (run_for > 0.0 && std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= run_for) break;
  }
  server.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Switched feedback-linearization simulator for a mecanum-wheeled robot"};
  app.require_subcommand(1);

  std::string sim_config, sim_out;
  auto* simulate = app.add_subcommand("simulate", "Run one scenario and write log.csv and metrics.json");
  simulate->add_option("config", sim_config, "Scenario JSON")->required();
  simulate->add_option("--out", sim_out, std::string("Output directory (overrides $") + kOutputEnv + " and config)");

  std::string verify_config, verify_scenarios = SFLC_SCENARIO_DIR;
  double verify_dt = 0.0;
  bool verify_serial = false;
  auto* verify = app.add_subcommand("verify", "Run the acceptance criteria");
  verify->add_option("--config", verify_config, "Scenario JSON supplying gains and dt");
  verify->add_option("--dt", verify_dt, "Override the integration step")->check(CLI::PositiveNumber);
  verify->add_option("--scenarios", verify_scenarios, "Directory with the bundled scenarios");
  verify->add_flag("--serial", verify_serial, "Run criteria one after another");

  std::string serve_config, serve_address = "127.0.0.1";
  unsigned short serve_port = 8765;
  double serve_run_for = 0.0;
  auto* serve = app.add_subcommand("serve", "Run the live WebSocket bridge");
  serve->add_option("config", serve_config, "Scenario JSON")->required();
  serve->add_option("--port", serve_port, "TCP port, 0 for an ephemeral port");
  serve->add_option("--address", serve_address, "Bind address");
  serve->add_option("--run-for", serve_run_for, "Stop after this many seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (simulate->parsed()) return cmd_simulate(sim_config, sim_out);
  if (verify->parsed()) return cmd_verify(verify_config, verify_dt, verify_scenarios, verify_serial);
  return cmd_serve(serve_config, serve_port, serve_address, serve_run_for);
}
