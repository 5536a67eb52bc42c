#ifndef TYPECTL_HARNESS_HPP_
#define TYPECTL_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "typectl/classifier.hpp"
#include "typectl/corpus.hpp"
#include "typectl/decoding.hpp"
#include "typectl/lm.hpp"
#include "typectl/metrics.hpp"

namespace typectl {

struct CorpusConfig {
  int n_tables = 2000;
  int refs_per_table = 5;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  CorpusConfig corpus;
  ModelConfig model;
  TrainConfig train;  // p_mask and seed here are overridden per sweep point
  std::vector<double> p_mask_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> top_p_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double temperature = 1.0;
  int max_new_tokens = 32;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int k = 5;
  std::string classifier = "learned";  // "learned" | "rule"
  int classifier_epochs = 5;
  double classifier_lr = 0.1;
  int max_test_tables = 0;  // 0 = whole test split
  bool record_wall_time = false;
  std::string out_dir = "out";

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are a ConfigError.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  // FNV-1a of the canonical JSON dump.
  std::uint64_t hash() const;  // ignores out_dir
};

struct Splits {
  std::vector<CorpusRecord> train, dev, test;
  std::vector<std::string> warnings;
};

// Deterministic 80/10/10 split by table. Throws ConfigError when
// n_tables < 30.
Splits build_corpus(const CorpusConfig& cfg);

struct TrainedModel {
  ModelParams params;
  Vocab vocab;
  TrainLog log;
  double p_mask = 0.0;
};

TrainedModel train_model(const std::vector<CorpusRecord>& train_split, const ExperimentConfig& cfg,
                         double p_mask, std::uint64_t seed);

ClassifierModel train_type_classifier(const std::vector<CorpusRecord>& train_split,
                                      const ExperimentConfig& cfg, std::uint64_t seed);

TypeClassifierFn make_classifier(const ExperimentConfig& cfg, const ClassifierModel& learned);

// One generated statement with its provenance.
struct Generation {
  std::string table_id;
  Control control;
  Statement statement;
};

struct ConsistencyRun {
  TypeConsistency consistency;
  std::vector<Generation> generations;
};

// Five uniform controls per test table, greedy decoding, classification
// against the controls.
ConsistencyRun run_type_consistency(const ModelParams& params, const Vocab& vocab,
                                    const std::vector<CorpusRecord>& test,
                                    const TypeClassifierFn& classify, std::uint64_t seed,
                                    int k = 5);

struct SweepRow {
  std::string method;
  std::optional<double> p_mask;
  std::optional<double> top_p;  // empty for greedy decoding
  std::uint64_t seed = 0;
  double factuality_acc = 0.0;
  double ent4 = 0.0;
  double dist2 = 0.0;
  double self_bleu4 = 0.0;
  std::optional<double> type_consistency_macro;
  std::optional<double> wall_ms;

  // Stable file-name stem for the generation dump of this row.
  std::string condition_key() const;
  bool operator==(const SweepRow&) const = default;
};

struct SweepOutput {
  std::vector<SweepRow> rows;
  std::vector<std::vector<Generation>> generations;  // parallel to rows
};

// Set-level metrics of one sweep condition: each table's k statements form
// one set; factuality and diversity are averaged over sets.
SweepRow score_generations(const std::vector<Generation>& gens,
                           const std::vector<CorpusRecord>& tables,
                           const TypeClassifierFn* classify);

// DevTC set generation: uniform types, greedy, k per table.
std::vector<Generation> devtc_generations(const ModelParams& params, const Vocab& vocab,
                                          const std::vector<CorpusRecord>& test,
                                          const TypeSource& source, int k, std::uint64_t seed);

// Baseline set generation: masked control, nucleus sampling at top_p.
std::vector<Generation> baseline_generations(const ModelParams& params, const Vocab& vocab,
                                             const std::vector<CorpusRecord>& test, double top_p,
                                             const ExperimentConfig& cfg, std::uint64_t seed);

// One seed of the trade-off protocol: a DevTC row (devtc trained with
// p_mask 0.5), one baseline row per top_p (baseline trained with p_mask 1),
// and a "devtc-empirical" row whose types follow the classified type
// distribution of the baseline's top_p = 1 output.
SweepOutput run_tradeoff(const TrainedModel& devtc, const TrainedModel& baseline,
                         const std::vector<CorpusRecord>& test, const ExperimentConfig& cfg,
                         const TypeClassifierFn& classify, std::uint64_t seed);

// Trains one model per (p_mask, seed) and scores it with the DevTC protocol.
SweepOutput run_mask_sweep(const Splits& splits, const ExperimentConfig& cfg,
                           const TypeClassifierFn& classify);

std::vector<CorpusRecord> limit_tables(const std::vector<CorpusRecord>& test, int max_tables);

// sweep.csv, summary.json, tradeoff.svg.
void emit_results(const std::vector<SweepRow>& rows, const std::filesystem::path& out_dir);

std::string rows_to_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> rows_from_csv(const std::string& text);
nlohmann::json summarize(const std::vector<SweepRow>& rows);
std::string render_svg(const std::vector<SweepRow>& rows);

void save_generations(const std::vector<Generation>& gens, const std::filesystem::path& path);
std::vector<Generation> load_generations(const std::filesystem::path& path);

nlohmann::json consistency_to_json(const TypeConsistency& tc);
nlohmann::json report_to_json(const EvalReport& report);

// Full evaluation of a generation dump against the records it came from.
EvalReport evaluate_generations(const std::vector<Generation>& gens,
                                const std::vector<CorpusRecord>& records,
                                const TypeClassifierFn* classify, int set_size);

// Writes text to path, throwing IoError on failure.
void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

std::string format_number(double x);

}  // namespace typectl

#endif  // TYPECTL_HARNESS_HPP_
