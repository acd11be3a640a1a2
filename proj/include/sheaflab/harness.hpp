#pragma once

// Experiment runner comparing sheaf networks against GCN baselines on the
// synthetic signed-graph task.
//
// Seeding: every trial t draws its dataset from
//   derive(derive(master_seed, "dataset"), t)
// and every grid cell of that trial reuses it, so cells differ only in the
// noise variances (the unit-variance noise draws themselves are shared).
// A model's initialization seed is derive(dataset_seed, "model:" + name), so
// adding or removing models never changes any dataset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cctype>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sheaflab/block_sparse.hpp"
#include "sheaflab/errors.hpp"
#include "sheaflab/graph.hpp"
#include "sheaflab/neural/adam.hpp"
#include "sheaflab/neural/loss.hpp"
#include "sheaflab/neural/model.hpp"
#include "sheaflab/rng.hpp"
#include "sheaflab/synthgen.hpp"

namespace sheaflab::harness {

/// Kipf-Welling propagation D~^{-1/2} (|A| + I) D~^{-1/2}, with |A| the
/// absolute edge weights and D~ its degree matrix including the self-loops.
inline BlockSparseMatrix build_gcn_operator(const Graph& graph) {
  if (graph.num_edges() == 0) throw DegenerateGraph("build_gcn_operator: graph has no edges");
  if (!graph.isolated_nodes().empty()) throw DegenerateGraph("build_gcn_operator: graph has isolated nodes");
  std::vector<double> deg = graph.weighted_degrees();
  std::vector<double> inv_sqrt(deg.size());
  for (std::size_t i = 0; i < deg.size(); ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i] + 1.0);

  const BlockPartition nodes = BlockPartition::uniform(graph.num_nodes(), 1);
  BlockSparseMatrix::Builder builder(nodes, nodes);
  for (std::size_t i = 0; i < graph.num_nodes(); ++i) builder.add_scalar(i, i, inv_sqrt[i] * inv_sqrt[i]);
  for (const Edge& e : graph.edges()) {
    const double value = inv_sqrt[e.u] * std::abs(e.weight) * inv_sqrt[e.v];
    builder.add_scalar(e.u, e.v, value);
    builder.add_scalar(e.v, e.u, value);
  }
  return std::move(builder).build();
}

/// Fraction of masked rows whose argmax equals the label; ties go to the
/// lower class index.
inline double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const std::size_t> mask) {
  if (mask.empty()) throw EmptyMask("accuracy: empty mask");
  std::size_t hits = 0;
  for (std::size_t node : mask) {
    Eigen::Index best = 0;
    const auto row = logits.row(static_cast<Eigen::Index>(node));
    for (Eigen::Index c = 1; c < row.size(); ++c)
      if (row(c) > row(best)) best = c;
    if (best == labels[node]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

enum class ModelKind { kSheaf, kGcn };

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::kSheaf;
  std::size_t depth = 3;
  std::size_t hidden = 32;
};

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// SheafNN-32 / GCN-32: three layers of width 32. SheafNN-16 / GCN-16: four
/// layers of width 16. Names are case-insensitive.
inline ModelSpec parse_model_spec(const std::string& name) {
  const std::string key = lowercase(name);
  if (key == "sheafnn-32") return {"SheafNN-32", ModelKind::kSheaf, 3, 32};
  if (key == "sheafnn-16") return {"SheafNN-16", ModelKind::kSheaf, 4, 16};
  if (key == "gcn-32") return {"GCN-32", ModelKind::kGcn, 3, 32};
  if (key == "gcn-16") return {"GCN-16", ModelKind::kGcn, 4, 16};
  throw ConfigError("unknown model '" + name + "' (expected SheafNN-32, SheafNN-16, GCN-32 or GCN-16)");
}

struct ExperimentConfig {
  std::vector<ModelSpec> models;
  synth::SyntheticConfig data;  // noise variances and seed are overridden per cell/trial
  std::vector<double> sigma_feat_grid{0.0, 0.5};
  std::vector<double> sigma_w_grid{0.0, 0.5};
  std::size_t trials = 5;
  std::size_t epochs = 300;
  double lr = 0.001;
  std::size_t log_interval = 10;
  std::uint64_t master_seed = 0;
  synth::DegreeMode degree_mode = synth::DegreeMode::kWeighted;

  void validate() const {
    if (models.empty()) throw ConfigError("no models selected");
    if (sigma_feat_grid.empty() || sigma_w_grid.empty()) throw ConfigError("noise grids must be nonempty");
    for (double s : sigma_feat_grid)
      if (!(s >= 0.0)) throw ConfigError("sigma_feat_sq values must be non-negative");
    for (double s : sigma_w_grid)
      if (!(s >= 0.0)) throw ConfigError("sigma_w_sq values must be non-negative");
    if (trials == 0) throw ConfigError("trials must be at least 1");
    if (log_interval == 0) throw ConfigError("log interval must be positive");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    data.validate();
  }
};

inline std::vector<ModelSpec> default_models() {
  return {parse_model_spec("SheafNN-32"), parse_model_spec("SheafNN-16"), parse_model_spec("GCN-32"),
          parse_model_spec("GCN-16")};
}

/// "desk": 500 nodes, 300 epochs. "paper": 5000 nodes, 1000 epochs. Both use
/// 5 trials, the {0, 0.5} x {0, 0.5} noise grid and all four models.
inline ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig config;
  config.models = default_models();
  if (name == "desk") {
    config.data.num_nodes = 500;
    config.epochs = 300;
  } else if (name == "paper") {
    config.data.num_nodes = 5000;
    config.epochs = 1000;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected desk|paper)");
  }
  return config;
}

inline std::uint64_t trial_dataset_seed(std::uint64_t master_seed, std::size_t trial) {
  return rng::derive(rng::derive(master_seed, "dataset"), static_cast<std::uint64_t>(trial));
}

inline std::uint64_t model_init_seed(std::uint64_t dataset_seed, const std::string& model_name) {
  return rng::derive(dataset_seed, "model:" + model_name);
}

struct MetricsRecord {
  std::string model;
  std::size_t layers = 0;
  std::size_t hidden = 0;
  synth::FeatureMode feature_mode = synth::FeatureMode::kLinear;
  double sigma_feat_sq = 0.0;
  double sigma_w_sq = 0.0;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double wall_ms = 0.0;
};

/// Operators shared read-only by every model trained on one dataset.
struct Operators {
  nn::SharedOperator sheaf_diffusion;
  nn::SharedOperator gcn_propagation;
};

inline Operators prepare_operators(const synth::SyntheticDataset& data,
                                   synth::DegreeMode mode = synth::DegreeMode::kWeighted) {
  return {std::make_shared<const BlockSparseMatrix>(synth::build_diffusion(data.sheaf, mode)),
          std::make_shared<const BlockSparseMatrix>(build_gcn_operator(data.graph))};
}

inline nn::Model build_model(const ModelSpec& spec, const Operators& ops, std::size_t in_features,
                             std::uint64_t seed) {
  constexpr std::size_t kClasses = 2;
  if (spec.kind == ModelKind::kSheaf) {
    return nn::make_sheaf_model(ops.sheaf_diffusion, 1, in_features, spec.hidden, spec.depth, kClasses, {seed});
  }
  return nn::make_gcn_model(ops.gcn_propagation, in_features, spec.hidden, spec.depth, kClasses, {seed});
}

struct TrialOptions {
  std::size_t epochs = 300;
  double lr = 0.001;
  std::size_t log_interval = 10;
  std::uint64_t seed = 0;  // reported in the records
  std::uint64_t init_seed = 0;
};

/// Full-graph training. Epoch e reports the model after e Adam steps; epochs
/// divisible by the log interval and the final epoch are recorded.
inline std::vector<MetricsRecord> run_trial(const synth::SyntheticDataset& data, const Operators& ops,
                                            const ModelSpec& spec, const TrialOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  nn::Model model = build_model(spec, ops, static_cast<std::size_t>(data.features.cols()), opt.init_seed);
  nn::AdamState adam(nn::AdamConfig{.lr = opt.lr});
  std::vector<MetricsRecord> records;
  for (std::size_t epoch = 0; epoch <= opt.epochs; ++epoch) {
    model.zero_grad();
    const Matrix logits = model.forward(data.features);
    nn::LossResult loss = nn::softmax_cross_entropy(logits, data.labels, data.train_idx);
    if (!std::isfinite(loss.loss)) {
      throw NonFiniteLoss(epoch, spec.name + ": non-finite training loss at epoch " + std::to_string(epoch));
    }
    if (epoch % opt.log_interval == 0 || epoch == opt.epochs) {
      const double elapsed =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      records.push_back({spec.name, spec.depth, spec.hidden, data.config.feature_mode, data.config.sigma_feat_sq,
                         data.config.sigma_w_sq, opt.seed, epoch, loss.loss,
                         accuracy(logits, data.labels, data.train_idx), accuracy(logits, data.labels, data.test_idx),
                         elapsed});
    }
    if (epoch == opt.epochs) break;
    model.backward(loss.dlogits);
    const auto params = model.parameters();
    adam.step(params);
  }
  return records;
}

/// Convenience overload that assembles the operators itself.
inline std::vector<MetricsRecord> run_trial(const synth::SyntheticDataset& data, const ModelSpec& spec,
                                            const TrialOptions& opt) {
  return run_trial(data, prepare_operators(data), spec, opt);
}

inline constexpr const char* kCsvHeader =
    "model,layers,hidden,feature_mode,sigma_feat_sq,sigma_w_sq,seed,epoch,train_loss,train_acc,test_acc,wall_ms";

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

inline std::string csv_row(const MetricsRecord& r) {
  std::string s = r.model;
  s += ',' + std::to_string(r.layers) + ',' + std::to_string(r.hidden) + ',' + synth::to_string(r.feature_mode);
  s += ',' + format_double(r.sigma_feat_sq) + ',' + format_double(r.sigma_w_sq);
  s += ',' + std::to_string(r.seed) + ',' + std::to_string(r.epoch);
  s += ',' + format_double(r.train_loss) + ',' + format_double(r.train_acc) + ',' + format_double(r.test_acc);
  char wall[32];
  std::snprintf(wall, sizeof(wall), "%.3f", r.wall_ms);
  s += ',';
  s += wall;
  return s;
}

struct CellSummary {
  double sigma_feat_sq = 0.0;
  double sigma_w_sq = 0.0;
  std::string model;
  std::size_t completed = 0;
  std::size_t failed = 0;
  double mean_test_acc = 0.0;
  double std_test_acc = 0.0;  // sample standard deviation; 0 for a single trial
  std::vector<double> final_test_acc;
};

struct TrialFailure {
  double sigma_feat_sq = 0.0;
  double sigma_w_sq = 0.0;
  std::string model;
  std::size_t trial = 0;
  std::string message;
};

struct GridResult {
  std::vector<MetricsRecord> records;  // sorted by cell, model, trial, epoch
  std::vector<CellSummary> summaries;  // one per (cell, model), grid order
  std::vector<TrialFailure> failures;

  const CellSummary* find(const std::string& model, double sigma_feat_sq, double sigma_w_sq) const {
    for (const CellSummary& s : summaries)
      if (s.model == model && s.sigma_feat_sq == sigma_feat_sq && s.sigma_w_sq == sigma_w_sq) return &s;
    return nullptr;
  }

  /// True when some (cell, model) pair lost every trial to a non-finite loss.
  bool has_fully_failed_cell() const {
    for (const CellSummary& s : summaries)
      if (s.completed == 0) return true;
    return false;
  }
};

/// Trains every model on every (grid cell, trial). All models in a cell and
/// trial see the same dataset. A trial that hits a non-finite loss is
/// recorded as a failure and skipped; DegenerateGraph propagates.
inline GridResult run_grid(const ExperimentConfig& config, std::ostream* progress = nullptr) {
  config.validate();
  GridResult result;
  for (double sf : config.sigma_feat_grid) {
    for (double sw : config.sigma_w_grid) {
      // records[model][trial]
      std::vector<std::vector<std::vector<MetricsRecord>>> cell(
          config.models.size(), std::vector<std::vector<MetricsRecord>>(config.trials));
      std::vector<CellSummary> summaries(config.models.size());
      for (std::size_t m = 0; m < config.models.size(); ++m) {
        summaries[m].sigma_feat_sq = sf;
        summaries[m].sigma_w_sq = sw;
        summaries[m].model = config.models[m].name;
      }
      for (std::size_t t = 0; t < config.trials; ++t) {
        synth::SyntheticConfig data_config = config.data;
        data_config.sigma_feat_sq = sf;
        data_config.sigma_w_sq = sw;
        data_config.seed = trial_dataset_seed(config.master_seed, t);
        const synth::SyntheticDataset data = synth::generate_dataset(data_config);
        const Operators ops = prepare_operators(data, config.degree_mode);
        for (std::size_t m = 0; m < config.models.size(); ++m) {
          const ModelSpec& spec = config.models[m];
          const TrialOptions opt{config.epochs, config.lr, config.log_interval, data_config.seed,
                                 model_init_seed(data_config.seed, spec.name)};
          try {
            cell[m][t] = run_trial(data, ops, spec, opt);
            summaries[m].final_test_acc.push_back(cell[m][t].back().test_acc);
            ++summaries[m].completed;
            if (progress) {
              *progress << "  sigma_feat_sq=" << sf << " sigma_w_sq=" << sw << " trial " << t << " " << spec.name
                        << ": test_acc=" << format_double(cell[m][t].back().test_acc) << '\n';
            }
          } catch (const NonFiniteLoss& ex) {
            ++summaries[m].failed;
            result.failures.push_back({sf, sw, spec.name, t, ex.what()});
            if (progress) *progress << "  trial failed: " << ex.what() << '\n';
          }
        }
      }
      for (std::size_t m = 0; m < config.models.size(); ++m) {
        for (std::size_t t = 0; t < config.trials; ++t)
          result.records.insert(result.records.end(), cell[m][t].begin(), cell[m][t].end());
        CellSummary& s = summaries[m];
        const auto n = static_cast<double>(s.final_test_acc.size());
        if (n > 0) {
          double sum = 0.0;
          for (double a : s.final_test_acc) sum += a;
          s.mean_test_acc = sum / n;
          double ss = 0.0;
          for (double a : s.final_test_acc) ss += (a - s.mean_test_acc) * (a - s.mean_test_acc);
          s.std_test_acc = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        }
        result.summaries.push_back(std::move(s));
      }
    }
  }
  return result;
}

inline void write_csv(std::ostream& out, std::span<const MetricsRecord> records) {
  out << kCsvHeader << '\n';
  for (const MetricsRecord& r : records) out << csv_row(r) << '\n';
}

inline void print_summary(std::ostream& out, const GridResult& result) {
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %-12s %-12s %8s %8s %6s\n", "sigma_feat", "sigma_w", "model", "mean",
                "std", "trials");
  out << line;
  for (const CellSummary& s : result.summaries) {
    std::snprintf(line, sizeof(line), "%-12g %-12g %-12s %8.4f %8.4f %6zu\n", s.sigma_feat_sq, s.sigma_w_sq,
                  s.model.c_str(), s.mean_test_acc, s.std_test_acc, s.completed);
    out << line;
  }
}

}  // namespace sheaflab::harness
