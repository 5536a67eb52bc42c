#include "typectl/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "typectl/common.hpp"

namespace typectl {

void GenerationConfig::validate() const {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
}

constexpr double kTopPSlack = 1e-12;

std::vector<double> next_token_filter(std::span<const double> probs, double top_p) {
  if (probs.empty()) throw NumericError("empty distribution");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw NumericError("distribution has invalid entries");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw NumericError("distribution does not sum to 1");

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<double> out(probs.size(), 0.0);
  double kept = 0.0;
  std::size_t n_keep = 0;
  while (n_keep < order.size()) {
    kept += probs[order[n_keep]];
    ++n_keep;
    // Softmax rounding can leave an exact boundary like 0.5 + 0.3 just short of 0.8.
    if (kept >= top_p - kTopPSlack) break;
  }
  CompensatedSum mass;
  for (std::size_t i = 0; i < n_keep; ++i) mass.add(probs[order[i]]);
  const double z = mass.value();
  for (std::size_t i = 0; i < n_keep; ++i) out[order[i]] = probs[order[i]] / z;
  return out;
}

int argmax_token(const Eigen::VectorXd& logits) {
  int best = 0;
  for (int i = 1; i < logits.size(); ++i)
    if (logits(i) > logits(best)) best = i;
  return best;
}

int sample_token(const Eigen::VectorXd& logits, double top_p, double temperature, Rng& rng) {
  const Eigen::VectorXd z = logits / temperature;
  Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
  p /= p.sum();
  const auto filtered = next_token_filter(std::span<const double>(p.data(), p.size()), top_p);
  // Walk the support in id order.
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    if (filtered[i] <= 0.0) continue;
    acc += filtered[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  return last;
}

namespace {

struct Primed {
  Decoder decoder;
  Eigen::VectorXd logits;
};

Primed prime(const ModelParams& params, const Table& table, const Control& control,
             const GenerationConfig& cfg, const Vocab& vocab) {
  cfg.validate();
  const std::vector<int> prompt = encode_prompt(table, control, vocab);
  if (static_cast<int>(prompt.size()) + cfg.max_new_tokens > params.config().context_len)
    throw LengthError("table " + table.id + ": prompt plus generation budget exceeds context_len");
  Primed p{Decoder(params), {}};
  p.logits = p.decoder.feed(prompt);
  return p;
}

Statement continue_from(Primed state, const GenerationConfig& cfg, const Vocab& vocab) {
  Rng rng(cfg.seed);
  std::vector<std::string> out;
  for (int step = 0; step < cfg.max_new_tokens; ++step) {
    const int next = cfg.strategy == Strategy::kGreedy
                         ? argmax_token(state.logits)
                         : sample_token(state.logits, cfg.top_p, cfg.temperature, rng);
    if (next == Vocab::kEos) break;
    if (!vocab.is_special(next)) out.push_back(vocab.token(next));
    if (step + 1 < cfg.max_new_tokens) state.logits = state.decoder.feed_one(next);
  }
  return Statement::from_tokens(std::move(out));
}

}  // namespace

Statement generate(const ModelParams& params, const Table& table, const Control& control,
                   const GenerationConfig& cfg, const Vocab& vocab) {
  return continue_from(prime(params, table, control, cfg, vocab), cfg, vocab);
}

std::vector<Control> draw_controls(const TypeSource& source, int k, std::uint64_t seed) {
  if (k < 1) throw RangeError("k must be >= 1");
  Rng rng(seed);
  std::vector<Control> out;
  switch (source.kind) {
    case TypeSource::Kind::kUniform:
      for (int i = 0; i < k; ++i) out.push_back(Control::of(kAllTypes[rng.below(kNumTypes)]));
      break;
    case TypeSource::Kind::kMasked:
      out.assign(k, Control::masked());
      break;
    case TypeSource::Kind::kFixedList:
      if (static_cast<int>(source.fixed.size()) < k)
        throw RangeError("fixed control list shorter than k");
      out.assign(source.fixed.begin(), source.fixed.begin() + k);
      break;
    case TypeSource::Kind::kEmpirical: {
      double total = 0.0;
      for (double p : source.distribution) {
        if (!(p >= 0.0)) throw NumericError("empirical distribution has negative mass");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-6)
        throw NumericError("empirical distribution does not sum to 1");
      for (int i = 0; i < k; ++i) {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        int pick = -1;
        for (int t = 0; t < kNumTypes; ++t) {
          if (source.distribution[t] <= 0.0) continue;
          acc += source.distribution[t];
          pick = t;
          if (u < acc) break;
        }
        out.push_back(Control::of(static_cast<LogicType>(pick)));
      }
      break;
    }
  }
  return out;
}

std::vector<GeneratedItem> generate_set(const ModelParams& params, const Table& table,
                                        const TypeSource& source, int k,
                                        const GenerationConfig& cfg, const Vocab& vocab,
                                        std::uint64_t seed) {
  const auto controls = draw_controls(source, k, seed);
  // Prompts are primed once per distinct control; greedy results are reused.
  std::vector<std::pair<Control, Primed>> primed;
  std::vector<std::pair<Control, Statement>> greedy_done;
  std::vector<GeneratedItem> out;
  for (std::size_t i = 0; i < controls.size(); ++i) {
    GenerationConfig c = cfg;
    c.seed = derive_seed(seed, i + 1);
    const Control& ctl = controls[i];
    if (cfg.strategy == Strategy::kGreedy) {
      auto hit = std::find_if(greedy_done.begin(), greedy_done.end(),
                              [&](const auto& e) { return e.first == ctl; });
      if (hit != greedy_done.end()) {
        out.push_back({ctl, hit->second});
        continue;
      }
    }
    auto it = std::find_if(primed.begin(), primed.end(), [&](const auto& e) { return e.first == ctl; });
    if (it == primed.end()) {
      primed.emplace_back(ctl, prime(params, table, ctl, c, vocab));
      it = primed.end() - 1;
    }
    Statement s = continue_from(it->second, c, vocab);
    if (cfg.strategy == Strategy::kGreedy) greedy_done.emplace_back(ctl, s);
    out.push_back({ctl, std::move(s)});
  }
  return out;
}

std::uint64_t table_seed(std::uint64_t seed, const std::string& table_id) {
  return derive_seed(seed, fnv1a(table_id));
}

}  // namespace typectl
