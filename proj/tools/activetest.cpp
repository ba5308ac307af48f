// activetest: command-line entry point.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "activetest/error.hpp"
#include "activetest/estimcheck.hpp"
#include "activetest/harness.hpp"
#include "activetest/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace activetest;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidation, path.string() + ": " + e.what());
  }
}

fs::path data_root(const json& cfg, const fs::path& config_dir) {
  if (const char* env = std::getenv("ACTIVETEST_DATA_DIR"); env && *env) return env;
  if (cfg.contains("data_dir")) return config_dir / cfg.at("data_dir").get<std::string>();
  return config_dir;
}

int serve(const fs::path& config_path, int port) {
  const json cfg = read_json(config_path);
  const fs::path dir = config_path.parent_path();
  ServiceOptions options;
  options.data_dir = data_root(cfg, dir);
  if (cfg.contains("trace_dir")) options.trace_dir = dir / cfg.at("trace_dir").get<std::string>();
  options.id_seed = cfg.value("id_seed", std::uint64_t{0});
  SessionManager manager(options);
  const auto restored = manager.replay();
  if (restored > 0) std::cerr << "restored " << restored << " session(s) from traces\n";
  httplib::Server server;
  install_routes(server, manager);
  const std::string host = cfg.value("host", std::string("127.0.0.1"));
  std::cerr << "listening on " << host << ':' << port << '\n';
  if (!server.listen(host, port)) {
    std::cerr << "error: cannot bind " << host << ':' << port << '\n';
    return 1;
  }
  return 0;
}

// Config: {"dataset": "<manifest or dir>"} or {"synthetic": {...}}, plus the
// sweep keys (strategies, budgets, seeds, run, threads).
int simulate(const fs::path& config_path, const fs::path& out_dir) {
  const json cfg = read_json(config_path);
  std::shared_ptr<const Dataset> dataset;
  if (cfg.contains("synthetic")) {
    dataset = std::make_shared<Dataset>(make_synthetic(SynthSpec::from_json(cfg.at("synthetic"))));
  } else if (cfg.contains("dataset")) {
    fs::path path = data_root(cfg, config_path.parent_path()) / cfg.at("dataset").get<std::string>();
    if (fs::is_directory(path)) path /= "manifest.json";
    dataset = std::make_shared<Dataset>(load_dataset(path));
  } else {
    throw Error(ErrorCode::kInvalidArgument, "simulate config needs 'dataset' or 'synthetic'");
  }
  const auto sweep_cfg = SweepConfig::from_json(cfg);
  const auto result = sweep(dataset, sweep_cfg);
  write_sweep_outputs(result, out_dir);
  std::cout << "wrote " << result.rows.size() << " runs to " << out_dir.string() << '\n';
  for (const auto& [strategy, value] : result.auecc) {
    std::cout << strategy << " auecc=" << value << '\n';
  }
  return 0;
}

int report(const fs::path& runs, const std::string& format) {
  const fs::path file = fs::is_directory(runs) ? runs / "runs.csv" : runs;
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const auto result = summarize(parse_rows_csv(buf.str()));
  if (format == "json") {
    std::cout << summary_json(result).dump(2) << '\n';
    return 0;
  }
  std::cout << "strategy,budget,mean_error,std_error,seeds\n";
  for (const auto& [strategy, c] : result.curves) {
    for (std::size_t k = 0; k < c.budgets.size(); ++k) {
      std::cout << strategy << ',' << c.budgets[k] << ',' << c.mean[k] << ',' << c.stddev[k] << ','
                << c.per_seed[k].size() << '\n';
    }
  }
  return 0;
}

int estimcheck() {
  int failures = 0;
  for (const auto& r : run_estimator_checks()) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  (" << r.detail << ")\n";
    if (!r.passed) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

int synth(const fs::path& spec_path, const fs::path& out_dir) {
  const auto ds = make_synthetic(SynthSpec::from_json(read_json(spec_path)));
  std::cout << write_dataset(ds, out_dir).string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained active testing of model predictions"};
  app.require_subcommand(1);

  fs::path serve_config;
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP annotation service");
  serve_cmd->add_option("--config", serve_config, "Service config (JSON)")->required();
  serve_cmd->add_option("--port", port, "Listen port");

  fs::path sim_config;
  fs::path sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "Run an oracle-mode sweep");
  sim_cmd->add_option("--config", sim_config, "Sweep config (JSON)")->required();
  sim_cmd->add_option("--out", sim_out, "Output directory")->required();

  fs::path runs;
  std::string format = "csv";
  auto* report_cmd = app.add_subcommand("report", "Summarize a sweep");
  report_cmd->add_option("--runs", runs, "Sweep output directory or runs.csv")->required();
  report_cmd->add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* check_cmd = app.add_subcommand("estimcheck", "Check estimators against exact oracles");

  fs::path spec_path;
  fs::path synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted synthetic dataset");
  synth_cmd->add_option("--spec", spec_path, "Generator spec (JSON)")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*serve_cmd) return serve(serve_config, port);
    if (*sim_cmd) return simulate(sim_config, sim_out);
    if (*report_cmd) return report(runs, format);
    if (*check_cmd) return estimcheck();
    if (*synth_cmd) return synth(spec_path, synth_out);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
