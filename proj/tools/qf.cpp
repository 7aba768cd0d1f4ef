// qf: experiment driver. Exit codes: 0 success, 2 config error, 3 runtime failure.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "qf/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int run_experiment(qf::ExperimentKind kind, const std::string& config_path, const std::string& backend,
                   const std::string& out) {
  qf::ExperimentConfig config;
  try {
    config = qf::load_experiment_config(config_path, kind);
    if (!backend.empty()) {
      // re-validate so a remote override still demands a URL
      auto j = nlohmann::json::parse(qf::read_file(config_path));
      j["qa"]["backend"] = backend;
      config = qf::parse_experiment_config(j, kind);
    }
    if (!out.empty()) config.output_dir = out;
    if (config.output_dir.empty()) throw qf::ConfigError("output_dir: required (config or --out)");
  } catch (const qf::ConfigError& e) {
    std::cerr << "qf: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "qf: cannot read config: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    qf::ExperimentRunner runner(config, nullptr, &std::cerr);
    const auto result = runner.run();
    if (result.exit_code != 0) {
      std::cerr << "qf: one or more jobs failed; see " << (config.output_dir / qf::kManifestFile).string() << "\n";
    } else if (kind == qf::ExperimentKind::Aggregate) {
      std::cout << qf::read_file(config.output_dir / "summary.txt");
    }
    return result.exit_code;
  } catch (const qf::ConfigError& e) {
    std::cerr << "qf: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "qf: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qf: query-feature experiments (extraction, bandit, grid agents)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qf::kVersion));

  std::string config_path, backend, out;
  for (auto kind : {qf::ExperimentKind::GenCorpus, qf::ExperimentKind::EvalExtraction, qf::ExperimentKind::RunBandit,
                    qf::ExperimentKind::RunGridworld, qf::ExperimentKind::Aggregate}) {
    auto* sub = app.add_subcommand(std::string(qf::to_string(kind)));
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--qa-backend", backend, "QA backend; remote reads QF_QA_URL")->check(CLI::IsMember({"mock", "remote"}));
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    sub->final_callback([&, kind] { std::exit(run_experiment(kind, config_path, backend, out)); });
  }

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve-mock", "serve the extractive mock over the QA wire protocol");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->final_callback([&] {
    qf::QaServer server(std::make_shared<qf::MockQaClient>());
    std::cerr << "qf: mock QA service on http://" << host << ":" << port << "\n";
    server.run(host, port);
    std::exit(0);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  return 0;
}
