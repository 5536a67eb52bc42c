#ifndef TYPECTL_LM_HPP_
#define TYPECTL_LM_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "typectl/corpus.hpp"
#include "typectl/logic.hpp"

namespace typectl {

// Aligned so vectorized reductions over tensor views sum in the same order
// on every allocation.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

// Word-level vocabulary. Ids 0..14 are the special tokens in a fixed order;
// the remaining ids are the sorted corpus tokens.
class Vocab {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kStmt = 2;
  static constexpr int kMask = 3;
  static constexpr int kTitle = 4;
  static constexpr int kHeader = 5;
  static constexpr int kRow = 6;
  static constexpr int kBar = 7;
  static constexpr int kFirstType = 8;
  static constexpr int kNumSpecials = kFirstType + kNumTypes;

  static const std::vector<std::string>& special_tokens();

  // Specials, then the sorted union of every linearized table token and
  // reference token in `corpus` plus the fixed table-domain inventory
  // (built-in name pools and the integers 0..100).
  static Vocab build(const std::vector<CorpusRecord>& corpus);
  // Throws VocabError unless `tokens` starts with the specials and is
  // duplicate-free.
  static Vocab from_tokens(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  std::optional<int> find(const std::string& token) const;
  // Throws VocabError for unknown tokens.
  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool is_special(int id) const { return id < kNumSpecials; }
  int control_id(const Control& c) const;

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int context_len = 160;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  double p_mask = 0.0;
  double lr = 1e-3;
  int batch_size = 32;
  int epochs = 12;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct TensorInfo {
  std::string name;
  int rows;
  int cols;
  std::size_t offset;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// All weights live in one flat buffer; named tensors are views into it.
// The output projection is tied to the token embedding "wte".
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const ModelConfig& config);  // zero-filled

  // GPT-2 style init: N(0, init_std), residual projections scaled by
  // 1/sqrt(2 * n_layers), layer-norm gains 1, biases 0.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed, double init_std = 0.02);

  const ModelConfig& config() const { return config_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& info(const std::string& name) const;

  ParamVector& data() { return data_; }
  const ParamVector& data() const { return data_; }

  Eigen::Map<RowMat> tensor(const std::string& name);
  Eigen::Map<const RowMat> tensor(const std::string& name) const;

  std::size_t parameter_count() const { return data_.size(); }
  // FNV-1a over the raw bytes of every weight.
  std::uint64_t checksum() const;
  bool all_finite() const;

 private:
  ModelConfig config_;
  std::vector<TensorInfo> tensors_;
  std::map<std::string, std::size_t> index_;
  ParamVector data_;
};

struct Example {
  std::vector<int> ids;
  // loss_mask[t] == 1 iff the prediction of ids[t + 1] at position t is scored.
  std::vector<std::uint8_t> loss_mask;
};

// [BOS] [control] table-tokens [STMT] statement [EOS]. Throws LengthError
// (naming the table id) when longer than context_len, VocabError on
// unknown tokens.
Example encode_example(const Table& table, const Control& control, const Statement& statement,
                       const Vocab& vocab, int context_len);

// The generation prompt: the encoded example up to and including [STMT].
std::vector<int> encode_prompt(const Table& table, const Control& control, const Vocab& vocab);

struct ForwardResult {
  double loss = 0.0;
  int scored_positions = 0;
  // Per example [T x V], filled only when requested.
  std::vector<RowMat> logits;
};

// Mean next-token cross-entropy over scored positions of the whole batch;
// 0 when nothing is scored. Throws NumericError on non-finite values.
ForwardResult forward_loss(const ModelParams& params, std::span<const Example> batch,
                           bool want_logits = false);

// Loss times `loss_scale`, with its gradient written to `grad` (resized to
// parameter_count()).
double loss_and_gradient(const ModelParams& params, std::span<const Example> batch,
                         ParamVector& grad, double loss_scale = 1.0);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::map<std::string, double> per_tensor;  // max error per parameter group
  int coordinates = 0;
};

// Central differences on at least `min_coords` sampled coordinates, with at
// least four from every tensor. Error is |a-n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const ModelParams& params, std::span<const Example> batch,
                           double epsilon = 1e-4, int min_coords = 200, std::uint64_t seed = 0);

// Per-example mask decisions for one epoch: true replaces the control token.
std::vector<bool> mask_draws(std::uint64_t seed, int epoch, std::size_t n, double p_mask);

struct TrainLog {
  double initial_loss = 0.0;             // first batch, before any update
  std::vector<double> epoch_loss;        // token-weighted mean per epoch
  std::vector<std::size_t> masked_count;  // control slots replaced per epoch
  std::size_t examples = 0;
};

// One example per (table, reference) with the gold type as control.
std::vector<Example> training_examples(const std::vector<CorpusRecord>& corpus, const Vocab& vocab,
                                       int context_len);

ModelParams train(const std::vector<CorpusRecord>& corpus, const Vocab& vocab,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  TrainLog* log = nullptr);

// Incremental forward pass with a key/value cache. Copyable, so a primed
// prompt can be forked for several continuations.
class Decoder {
 public:
  explicit Decoder(const ModelParams& params);

  // Appends tokens and returns the next-token logits after the last one.
  // Throws LengthError past context_len.
  Eigen::VectorXd feed(std::span<const int> ids);
  Eigen::VectorXd feed_one(int id);
  int length() const { return length_; }

 private:
  const ModelParams* params_;
  int length_ = 0;
  std::vector<RowMat> keys_;    // per layer [context_len x d]
  std::vector<RowMat> values_;  // per layer [context_len x d]
};

struct Checkpoint {
  ModelParams params;
  Vocab vocab;
};

void save_checkpoint(const ModelParams& params, const Vocab& vocab,
                     const std::filesystem::path& path);
// Validates tensor names and shapes against the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace typectl

#endif  // TYPECTL_LM_HPP_
