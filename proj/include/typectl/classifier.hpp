#ifndef TYPECTL_CLASSIFIER_HPP_
#define TYPECTL_CLASSIFIER_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "typectl/logic.hpp"

namespace typectl {

// Multinomial logistic regression over binary unigram+bigram presence
// features of whitespace tokens.
struct ClassifierModel {
  std::map<std::string, int> feature_map;  // n-gram key -> dense index
  std::vector<double> weights;             // [kNumTypes x feature_count], row-major
  std::array<double, kNumTypes> bias{};

  int feature_count() const { return static_cast<int>(feature_map.size()); }
  double weight(int type, int feature) const {
    return weights[static_cast<std::size_t>(type) * feature_count() + feature];
  }
  bool operator==(const ClassifierModel&) const = default;
};

// Unigram keys are the token itself; bigram keys join two tokens with a
// single space.
std::vector<std::string> ngram_keys(const std::vector<std::string>& tokens);

// Sorted, deduplicated indices of known features.
std::vector<int> featurize(const ClassifierModel& model, const Statement& s);

using LabeledStatement = std::pair<Statement, LogicType>;

// Seeded SGD over shuffled epochs, one example per update. Throws
// CoverageError if any type is missing from the data.
ClassifierModel train_classifier(const std::vector<LabeledStatement>& pairs, int epochs, double lr,
                                 std::uint64_t seed);

struct TypePrediction {
  LogicType type;
  std::array<double, kNumTypes> probabilities;
};

TypePrediction predict_type(const ClassifierModel& model, const Statement& s);

// Mean cross-entropy of the model on the given data.
double classifier_loss(const ClassifierModel& model, const std::vector<LabeledStatement>& data);

// Analytic gradient of classifier_loss, laid out as weights then bias.
std::vector<double> classifier_loss_gradient(const ClassifierModel& model,
                                             const std::vector<LabeledStatement>& data);

// Unweighted mean of per-class F1 over classes present in golds or
// predictions. Throws RangeError on length mismatch or empty input.
double macro_f1(const std::vector<LogicType>& predictions, const std::vector<LogicType>& golds);

void save_classifier(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_classifier(const std::filesystem::path& path);

}  // namespace typectl

#endif  // TYPECTL_CLASSIFIER_HPP_
