#include "typectl/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"
#include "typectl/common.hpp"

namespace typectl {

namespace {

std::array<double, kNumTypes> softmax_logits(const ClassifierModel& m, const std::vector<int>& feats) {
  std::array<double, kNumTypes> z = m.bias;
  for (int c = 0; c < kNumTypes; ++c)
    for (int f : feats) z[c] += m.weight(c, f);
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : z) v /= total;
  return z;
}

}  // namespace

std::vector<std::string> ngram_keys(const std::vector<std::string>& tokens) {
  std::vector<std::string> keys(tokens.begin(), tokens.end());
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) keys.push_back(tokens[i] + " " + tokens[i + 1]);
  return keys;
}

std::vector<int> featurize(const ClassifierModel& model, const Statement& s) {
  std::vector<int> out;
  for (const auto& k : ngram_keys(s.tokens)) {
    auto it = model.feature_map.find(k);
    if (it != model.feature_map.end()) out.push_back(it->second);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ClassifierModel train_classifier(const std::vector<LabeledStatement>& pairs, int epochs, double lr,
                                 std::uint64_t seed) {
  if (pairs.empty()) throw CoverageError("classifier training data is empty");
  std::set<LogicType> seen;
  for (const auto& p : pairs) seen.insert(p.second);
  if (static_cast<int>(seen.size()) != kNumTypes)
    throw CoverageError("classifier training data covers only " + std::to_string(seen.size()) +
                        " of 7 types");

  ClassifierModel m;
  std::set<std::string> keys;
  for (const auto& p : pairs)
    for (auto& k : ngram_keys(p.first.tokens)) keys.insert(std::move(k));
  int idx = 0;
  for (const auto& k : keys) m.feature_map.emplace(k, idx++);
  m.weights.assign(static_cast<std::size_t>(kNumTypes) * m.feature_count(), 0.0);

  std::vector<std::vector<int>> feats;
  feats.reserve(pairs.size());
  for (const auto& p : pairs) feats.push_back(featurize(m, p.first));

  Rng rng(seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  const int nf = m.feature_count();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      const auto p = softmax_logits(m, feats[i]);
      const int gold = static_cast<int>(pairs[i].second);
      for (int c = 0; c < kNumTypes; ++c) {
        const double g = p[c] - (c == gold ? 1.0 : 0.0);
        m.bias[c] -= lr * g;
        for (int f : feats[i]) m.weights[static_cast<std::size_t>(c) * nf + f] -= lr * g;
      }
    }
  }
  return m;
}

TypePrediction predict_type(const ClassifierModel& model, const Statement& s) {
  TypePrediction out;
  out.probabilities = softmax_logits(model, featurize(model, s));
  // First maximum wins, which is enum order.
  const auto it = std::max_element(out.probabilities.begin(), out.probabilities.end());
  out.type = static_cast<LogicType>(it - out.probabilities.begin());
  return out;
}

double classifier_loss(const ClassifierModel& model, const std::vector<LabeledStatement>& data) {
  CompensatedSum total;
  for (const auto& [s, t] : data) {
    const auto p = softmax_logits(model, featurize(model, s));
    total.add(-std::log(p[static_cast<int>(t)]));
  }
  return total.value() / static_cast<double>(data.size());
}

std::vector<double> classifier_loss_gradient(const ClassifierModel& model,
                                             const std::vector<LabeledStatement>& data) {
  const int nf = model.feature_count();
  std::vector<double> grad(static_cast<std::size_t>(kNumTypes) * nf + kNumTypes, 0.0);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (const auto& [s, t] : data) {
    const auto feats = featurize(model, s);
    const auto p = softmax_logits(model, feats);
    for (int c = 0; c < kNumTypes; ++c) {
      const double g = (p[c] - (c == static_cast<int>(t) ? 1.0 : 0.0)) * scale;
      for (int f : feats) grad[static_cast<std::size_t>(c) * nf + f] += g;
      grad[static_cast<std::size_t>(kNumTypes) * nf + c] += g;
    }
  }
  return grad;
}

double macro_f1(const std::vector<LogicType>& predictions, const std::vector<LogicType>& golds) {
  if (predictions.size() != golds.size())
    throw RangeError("macro_f1: predictions and golds differ in length");
  if (golds.empty()) throw RangeError("macro_f1: empty input");
  std::array<int, kNumTypes> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const int p = static_cast<int>(predictions[i]);
    const int g = static_cast<int>(golds[i]);
    if (p == g) {
      ++tp[g];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < kNumTypes; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    ++classes;
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    sum += denom > 0 ? 2.0 * tp[c] / denom : 0.0;
  }
  return sum / classes;
}

void save_classifier(const ClassifierModel& model, const std::filesystem::path& path) {
  nlohmann::json fm = nlohmann::json::object();
  for (const auto& [k, v] : model.feature_map) fm[k] = v;
  nlohmann::json w = nlohmann::json::array();
  for (int c = 0; c < kNumTypes; ++c) {
    auto first = model.weights.begin() + static_cast<std::ptrdiff_t>(c) * model.feature_count();
    w.push_back(std::vector<double>(first, first + model.feature_count()));
  }
  nlohmann::json j = {{"feature_map", fm},
                      {"weights", w},
                      {"bias", std::vector<double>(model.bias.begin(), model.bias.end())}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

ClassifierModel load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("classifier " + path.string() + ": " + e.what());
  }
  ClassifierModel m;
  for (const auto& [k, v] : j.at("feature_map").items()) m.feature_map.emplace(k, v.get<int>());
  std::vector<bool> used(m.feature_map.size(), false);
  for (const auto& [k, v] : m.feature_map) {
    if (v < 0 || v >= m.feature_count() || used[v])
      throw ConfigError("classifier feature indices are not dense");
    used[v] = true;
  }
  const auto& w = j.at("weights");
  if (w.size() != kNumTypes) throw ConfigError("classifier weights must have 7 rows");
  for (const auto& row : w) {
    if (static_cast<int>(row.size()) != m.feature_count())
      throw ConfigError("classifier weight row has wrong width");
    for (const auto& x : row) m.weights.push_back(x.get<double>());
  }
  const auto bias = j.at("bias").get<std::vector<double>>();
  if (bias.size() != kNumTypes) throw ConfigError("classifier bias must have 7 entries");
  std::copy(bias.begin(), bias.end(), m.bias.begin());
  for (double x : m.weights)
    if (!std::isfinite(x)) throw ConfigError("classifier weights must be finite");
  return m;
}

}  // namespace typectl
