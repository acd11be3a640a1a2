// sheaflab: run the sheaf network vs. GCN comparison, generate datasets, and
// run the operator/gradient self-checks.
//
// Exit codes: 0 success, 2 configuration error, 3 degenerate data,
// 4 every trial of some (cell, model) ended with a non-finite loss.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "invariant_checks.hpp"
#include "sheaflab/sheaflab.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitNonFinite = 4;

struct RunArgs {
  std::string preset = "desk";
  std::string feature_mode = "linear";
  std::size_t nodes = 0;
  std::size_t epochs = 0;
  double lr = 0.0;
  std::vector<double> sigma_feat;
  std::vector<double> sigma_w;
  std::size_t trials = 0;
  std::vector<std::string> models;
  std::uint64_t seed = 0;
  std::size_t log_interval = 10;
  std::string degree = "weighted";
  std::string out = "results.csv";
  bool quiet = false;
};

int run_command(const RunArgs& args, const CLI::App& cmd) {
  using namespace sheaflab;
  harness::ExperimentConfig config = harness::make_preset(args.preset);
  config.data.feature_mode = synth::parse_feature_mode(args.feature_mode);
  if (cmd.count("--nodes")) config.data.num_nodes = args.nodes;
  if (cmd.count("--epochs")) config.epochs = args.epochs;
  if (cmd.count("--lr")) config.lr = args.lr;
  if (cmd.count("--sigma-feat")) config.sigma_feat_grid = args.sigma_feat;
  if (cmd.count("--sigma-w")) config.sigma_w_grid = args.sigma_w;
  if (cmd.count("--trials")) config.trials = args.trials;
  if (cmd.count("--models")) {
    config.models.clear();
    for (const auto& name : args.models) config.models.push_back(harness::parse_model_spec(name));
  }
  config.master_seed = args.seed;
  config.log_interval = args.log_interval;
  config.degree_mode = synth::parse_degree_mode(args.degree);
  config.validate();

  std::ofstream csv(args.out);
  if (!csv) throw ConfigError("cannot write " + args.out);

  const harness::GridResult result = harness::run_grid(config, args.quiet ? nullptr : &std::cerr);
  harness::write_csv(csv, result.records);
  harness::print_summary(std::cout, result);
  for (const auto& f : result.failures) std::cerr << "failed trial: " << f.message << '\n';
  return result.has_fully_failed_cell() ? kExitNonFinite : 0;
}

int gen_command(const std::string& config_path, const std::string& out_path) {
  using namespace sheaflab;
  const synth::SyntheticConfig config =
      config_path.empty() ? synth::SyntheticConfig{} : synth::config_from_json(io::read_json_file(config_path));
  const synth::SyntheticDataset data = synth::generate_dataset(config);
  io::write_json_file(out_path, synth::dataset_to_json(data));
  std::cout << "wrote " << out_path << ": " << data.graph.num_nodes() << " nodes, " << data.graph.num_edges()
            << " edges\n";
  return 0;
}

int check_command(std::uint64_t seed) {
  const auto results = sheaflab::checks::run_invariant_suite(seed);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sheaf neural networks on signed graphs"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "train models over the noise grid and write CSV metrics");
  run_cmd->add_option("--preset", run.preset, "desk|paper")->check(CLI::IsMember({"desk", "paper"}));
  run_cmd->add_option("--feature-mode", run.feature_mode, "linear|nonlinear")
      ->check(CLI::IsMember({"linear", "nonlinear"}));
  run_cmd->add_option("--nodes", run.nodes, "number of nodes");
  run_cmd->add_option("--epochs", run.epochs, "training epochs");
  run_cmd->add_option("--lr", run.lr, "Adam learning rate");
  run_cmd->add_option("--sigma-feat", run.sigma_feat, "feature noise variances (comma separated)")->delimiter(',');
  run_cmd->add_option("--sigma-w", run.sigma_w, "edge weight noise variances (comma separated)")->delimiter(',');
  run_cmd->add_option("--trials", run.trials, "random graphs per grid cell");
  run_cmd->add_option("--models", run.models, "SheafNN-32,SheafNN-16,GCN-32,GCN-16")->delimiter(',');
  run_cmd->add_option("--seed", run.seed, "master seed");
  run_cmd->add_option("--log-interval", run.log_interval, "epochs between CSV records");
  run_cmd->add_option("--degree", run.degree, "d_max in D_F: weighted (sum of |w|) or unweighted (edge count)")
      ->check(CLI::IsMember({"weighted", "unweighted"}));
  run_cmd->add_option("--out", run.out, "output CSV path");
  run_cmd->add_flag("--quiet", run.quiet, "suppress per-trial progress");

  std::string gen_config;
  std::string gen_out = "data.json";
  auto* gen_cmd = app.add_subcommand("gen", "generate one synthetic dataset as JSON");
  gen_cmd->add_option("--config", gen_config, "synthetic config JSON (defaults when omitted)");
  gen_cmd->add_option("--out", gen_out, "output path");

  std::uint64_t check_seed = 1;
  auto* check_cmd = app.add_subcommand("check", "run the operator and gradient invariant suite");
  check_cmd->add_option("--seed", check_seed, "seed for the random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run_cmd) return run_command(run, *run_cmd);
    if (*gen_cmd) return gen_command(gen_config, gen_out);
    if (*check_cmd) return check_command(check_seed);
  } catch (const sheaflab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sheaflab::InvalidGraph& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sheaflab::DegenerateGraph& e) {
    std::cerr << "degenerate data: " << e.what() << '\n';
    return kExitDegenerate;
  } catch (const sheaflab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
