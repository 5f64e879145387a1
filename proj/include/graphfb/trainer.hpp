#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "graphfb/graph.hpp"
#include "graphfb/models.hpp"
#include "graphfb/smoothness.hpp"

namespace graphfb {

struct TrainConfig {
    double lr = 0.05;  // 0 is allowed and freezes the parameters
    double weight_decay = 5e-4;
    std::size_t max_epochs = 500;
    /// Epochs without a new best validation accuracy before stopping.
    std::size_t patience = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Hyperparameters tuned per dataset and architecture.
struct Hyperparameters {
    double lr = 0.05;
    double weight_decay = 5e-4;
    double dropout = 0.5;
    std::size_t hidden = 32;
};

/// Tuned defaults for the nine benchmark datasets (case-insensitive name;
/// "actor" and "film" are synonyms). Lazy selects the lazy-random-walk filter
/// pair for FB-GCN. Returns nullopt for unknown combinations.
std::optional<Hyperparameters> tuned_hyperparameters(std::string_view dataset, Arch arch,
                                                     bool lazy = false);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    /// Effective (α_L, α_H) per layer after this epoch's update; empty for
    /// one-channel models.
    std::vector<std::pair<double, double>> alphas;
};

enum class OutputEncoding { Argmax, Softmax };

struct TrainResult {
    double test_accuracy = 0.0;  // at best_epoch
    double val_accuracy = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    std::vector<std::pair<double, double>> alphas;  // at best_epoch
    std::vector<EpochRecord> history;
    double output_s = 0.0;  // under hatL_sym, argmax one-hot
    double label_s = 0.0;
    double wall_time_s = 0.0;
    DenseMatrix best_logits;
    ParamSet best_params;
};

double accuracy(const DenseMatrix& logits, std::span<const int> labels,
                std::span<const std::size_t> nodes);
std::vector<int> argmax_rows(const DenseMatrix& logits);

/// S-value of the predicted signal under `kind` (hatL_sym by default).
/// Argmax encodes predictions as one-hot rows; Softmax uses probabilities.
double output_smoothness(const DenseMatrix& logits, const Graph& graph,
                         OutputEncoding encoding = OutputEncoding::Argmax,
                         OperatorKind kind = OperatorKind::HatLsym);

TrainResult train(const Graph& graph, const ModelSpec& spec, const TrainConfig& config,
                  const Split& split);
/// Same, reusing operators already built for this graph and spec.
TrainResult train(const Graph& graph, const ModelSpec& spec, const ModelOperators& ops,
                  const TrainConfig& config, const Split& split);

enum class EmbeddingChannel { Lp, Hp, Combined };
EmbeddingChannel parse_embedding_channel(std::string_view name);
std::string_view to_string(EmbeddingChannel channel);

/// Hidden representation after layer `layer` (1-based) in inference mode.
DenseMatrix embeddings(const Graph& graph, const ModelSpec& spec, ParamSet& params,
                       std::size_t layer, EmbeddingChannel channel);
/// Writes the representation as TSV with the node label as last column.
void export_embeddings(const Graph& graph, const ModelSpec& spec, ParamSet& params,
                       std::size_t layer, EmbeddingChannel channel,
                       const std::filesystem::path& file);

struct ExperimentEntry {
    std::string name;
    ModelSpec spec;
    TrainConfig config;
    /// Name of another entry; per-split accuracy deltas are reported against it.
    std::optional<std::string> baseline;
};

struct ModelSummary {
    std::string name;
    std::vector<double> test_accuracies;
    std::vector<double> output_s;
    std::vector<std::size_t> best_epochs;
    std::vector<std::vector<std::pair<double, double>>> alphas;
    double mean = 0.0;
    double stddev = 0.0;
    std::optional<std::string> baseline;
    std::vector<double> deltas;  // per split, this - baseline
    double mean_delta = 0.0;
    /// Median over splits of |output_s - label_s|.
    double median_s_gap = 0.0;
};

struct ExperimentReport {
    std::string dataset;
    double label_s = 0.0;
    std::vector<ModelSummary> models;

    const ModelSummary& model(std::string_view name) const;
    std::string to_json() const;
};

struct ExperimentOptions {
    std::size_t workers = 1;
    /// When set, per-run histories, alpha trajectories and parameters are written here.
    std::optional<std::filesystem::path> out_dir;
    std::string dataset;
};

ExperimentReport run_experiment(const Graph& graph, const std::vector<ExperimentEntry>& entries,
                                 const SplitSet& splits, const ExperimentOptions& options = {});

std::string history_csv(const TrainResult& result);
std::string alphas_csv(const TrainResult& result);

}  // namespace graphfb
