#ifndef TYPECTL_DECODING_HPP_
#define TYPECTL_DECODING_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "typectl/common.hpp"
#include "typectl/lm.hpp"
#include "typectl/logic.hpp"
#include "typectl/table.hpp"

namespace typectl {

enum class Strategy { kGreedy, kNucleus };

struct GenerationConfig {
  Strategy strategy = Strategy::kGreedy;
  double top_p = 1.0;
  double temperature = 1.0;
  int max_new_tokens = 32;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Nucleus filter: sort descending (ties by lower index first), keep the
// shortest prefix whose cumulative mass reaches top_p, renormalize. Throws
// NumericError for an invalid distribution.
std::vector<double> next_token_filter(std::span<const double> probs, double top_p);

// Greedy argmax with ties broken by lowest token id.
int argmax_token(const Eigen::VectorXd& logits);

// Draws one token from the temperature-scaled, nucleus-filtered softmax.
int sample_token(const Eigen::VectorXd& logits, double top_p, double temperature, Rng& rng);

// Autoregressive continuation of [BOS] [control] table [STMT]; special
// tokens other than the terminating [EOS] are dropped from the result.
// Throws LengthError when prompt plus budget exceeds context_len.
Statement generate(const ModelParams& params, const Table& table, const Control& control,
                   const GenerationConfig& cfg, const Vocab& vocab);

struct TypeSource {
  enum class Kind { kUniform, kFixedList, kEmpirical, kMasked };
  Kind kind = Kind::kUniform;
  std::vector<Control> fixed;                   // kFixedList
  std::array<double, kNumTypes> distribution{};  // kEmpirical

  static TypeSource uniform() { return {}; }
  static TypeSource masked() { return {Kind::kMasked, {}, {}}; }
  static TypeSource fixed_list(std::vector<Control> controls) {
    return {Kind::kFixedList, std::move(controls), {}};
  }
  static TypeSource empirical(const std::array<double, kNumTypes>& dist) {
    return {Kind::kEmpirical, {}, dist};
  }
};

// k controls drawn from `source` with Rng(seed). Throws NumericError if an
// empirical distribution does not sum to 1 within 1e-6, RangeError if a fixed
// list is shorter than k.
std::vector<Control> draw_controls(const TypeSource& source, int k, std::uint64_t seed);

struct GeneratedItem {
  Control control;
  Statement statement;
};

// Draws k controls, then generates one statement per control; the i-th call
// uses seed derive_seed(seed, i + 1).
std::vector<GeneratedItem> generate_set(const ModelParams& params, const Table& table,
                                        const TypeSource& source, int k,
                                        const GenerationConfig& cfg, const Vocab& vocab,
                                        std::uint64_t seed);

// Per-table seed: derive_seed(seed, fnv1a(table_id)).
std::uint64_t table_seed(std::uint64_t seed, const std::string& table_id);

}  // namespace typectl

#endif  // TYPECTL_DECODING_HPP_
