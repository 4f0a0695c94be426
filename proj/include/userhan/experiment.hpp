#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "userhan/baselines.hpp"
#include "userhan/corpus.hpp"
#include "userhan/han.hpp"
#include "userhan/metrics.hpp"

namespace userhan {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 32;
    int epochs = 50;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::string selection_metric = "f1";  // dev F1 drives checkpoint selection
    std::uint64_t seed = 0;
    int min_freq = 1;           // vocabulary floor for the HAN
    int charngram_buckets = 100000;
    int charngram_epochs = 100;
    double charngram_lr = 0.1;

    void validate() const;
};

// Bias-corrected Adam over the parameter list; first-/second-moment buffers
// live in the state, one slot per parameter tensor.
struct AdamState {
    std::vector<std::vector<double>> m, v;
};

void adam_step(std::vector<Tensor>& params, AdamState& state, long long t,
               const TrainConfig& cfg);

enum class ModelKind { han, logreg, svm, charngram };
ModelKind parse_model_kind(const std::string& s);
std::string model_kind_name(ModelKind k);

struct EpochStats {
    double train_loss = 0;
    Metrics dev;
};

struct RunReport {
    std::string condition;
    std::string model;
    std::uint64_t control_seed = 0;
    Metrics test;
    std::vector<EpochStats> history;
    int best_epoch = -1;  // HAN only
    double wall_seconds = 0;
};

// Users of the sub-dataset resolved against the corpus, posts optionally
// capped (ablation). Users whose posts all tokenize to nothing are dropped
// with a warning.
struct ResolvedData {
    std::vector<UserRecord> train, dev, test;
};
ResolvedData resolve_subdataset(const Corpus& corpus, const SubDataset& ds, int post_cap = 0);

// Trains one model on one sub-dataset; reports test metrics of the retained
// checkpoint. checkpoint_path may be empty (no file written).
RunReport train_run(ModelKind kind, const ResolvedData& data, const TrainConfig& cfg,
                    const HanConfig& han_cfg, const std::string& condition,
                    std::uint64_t control_seed, const std::string& checkpoint_path);

// Metrics of a saved checkpoint on the test split; for the HAN, traces of
// test users predicted diagnosed can be captured.
Metrics evaluate_checkpoint(ModelKind kind, const std::string& checkpoint_path,
                            const ResolvedData& data, const HanConfig& han_cfg,
                            std::vector<AttentionTrace>* traces_out = nullptr);

struct ProtocolResult {
    std::vector<RunReport> runs;  // n_resamplings x model kinds
};

// Control seeds 1..n: select controls, split, train every model kind.
// A failed run propagates; nothing is skipped silently.
ProtocolResult run_protocol(const Corpus& corpus, const std::string& condition,
                            const std::vector<ModelKind>& kinds, int n_resamplings,
                            const TrainConfig& cfg, const HanConfig& han_cfg);

struct AblationCell {
    int cap = 0;
    std::vector<RunReport> runs;  // one per control seed
};

struct AblationReport {
    std::string condition;
    std::vector<AblationCell> cells;  // one per cap, in grid order
};

AblationReport run_ablation(const Corpus& corpus, const std::string& condition,
                            const std::vector<int>& caps, int n_seeds, const TrainConfig& cfg,
                            const HanConfig& han_cfg);

// mean and population standard deviation
std::pair<double, double> mean_std(const std::vector<double>& values);

// CSV: one row per run plus mean/std rows per model; fixed 6-decimal
// formatting so identical inputs give identical bytes.
void write_report_csv(const std::vector<RunReport>& runs, std::ostream& os);
void write_report_table(const std::vector<RunReport>& runs, std::ostream& os);
void write_ablation_csv(const AblationReport& report, std::ostream& os);
void write_ablation_table(const AblationReport& report, std::ostream& os);

// Flat key=value config files.
std::map<std::string, std::string> parse_kv_file(const std::string& path);
struct ExperimentConfig {
    TrainConfig train;
    HanConfig han;
};
ExperimentConfig load_experiment_config(const std::string& path);
SyntheticConfig load_synthetic_config(const std::string& path);

}  // namespace userhan
