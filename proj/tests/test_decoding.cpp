#include <cmath>
#include <numeric>

#include "doctest.h"
#include "generators.hpp"
#include "typectl/decoding.hpp"
#include "typectl/harness.hpp"

using namespace typectl;

namespace {

std::vector<std::size_t> descending_order(const std::vector<double>& p) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p[a] > p[b]; });
  return idx;
}

struct Small {
  std::vector<CorpusRecord> corpus;
  Vocab vocab;
  ModelParams params;
};

const Small& small_model() {
  static const Small s = [] {
    Small out;
    CorpusConfig cc;
    cc.n_tables = 60;
    cc.seed = 3;
    out.corpus = build_corpus(cc).train;
    out.vocab = Vocab::build(out.corpus);
    ModelConfig mc;
    mc.d_model = 16;
    mc.n_heads = 2;
    mc.n_layers = 1;
    TrainConfig tc;
    tc.epochs = 2;
    tc.lr = 3e-3;
    tc.p_mask = 0.5;
    out.params = train(out.corpus, out.vocab, mc, tc);
    return out;
  }();
  return s;
}

}  // namespace

TEST_CASE("nucleus filter examples") {
  const std::vector<double> p = {0.5, 0.3, 0.2};
  CHECK(next_token_filter(p, 0.5) == std::vector<double>{1.0, 0.0, 0.0});
  const auto f = next_token_filter(p, 0.8);
  CHECK(f[0] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(f[1] == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(f[2] == 0.0);
  CHECK(next_token_filter(p, 1.0) == p);
  const auto tie = next_token_filter(std::vector<double>{0.25, 0.5, 0.25}, 0.6);
  CHECK(tie[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(tie[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(tie[2] == 0.0);
  CHECK_THROWS_AS(next_token_filter(std::vector<double>{0.5, 0.6}, 0.5), NumericError);
  CHECK_THROWS_AS(next_token_filter(std::vector<double>{1.5, -0.5}, 0.5), NumericError);
  CHECK_THROWS(next_token_filter(p, 0.0));
}

TEST_CASE("nucleus filter properties on random distributions") {
  Rng rng(10);
  for (int i = 0; i < 10000; ++i) {
    const auto p = gen::distribution(rng, rng.range(1, 12));
    const double top_p = rng.uniform() * 0.999 + 0.001;
    const auto f = next_token_filter(p, top_p);
    double total = 0.0;
    for (double x : f) {
      REQUIRE(x >= 0.0);
      total += x;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
    // Support is a prefix of the (id-stable) descending order.
    const auto order = descending_order(p);
    std::size_t support = 0;
    while (support < order.size() && f[order[support]] > 0.0) ++support;
    for (std::size_t k = support; k < order.size(); ++k) CHECK(f[order[k]] == 0.0);
    CHECK(support >= 1);
    double kept = 0.0;
    for (std::size_t k = 0; k < support; ++k) kept += p[order[k]];
    CHECK(kept >= top_p - 1e-12);
    if (support > 1) CHECK(kept - p[order[support - 1]] < top_p - 1e-12);
    // Support size is monotone in top_p.
    const double higher = std::min(1.0, top_p + rng.uniform() * (1.0 - top_p));
    const auto g = next_token_filter(p, higher);
    CHECK(std::count_if(g.begin(), g.end(), [](double x) { return x > 0; }) >=
          std::count_if(f.begin(), f.end(), [](double x) { return x > 0; }));
  }
}

TEST_CASE("sampling frequencies match the filtered distribution") {
  Eigen::VectorXd logits(3);
  logits << std::log(0.5), std::log(0.3), std::log(0.2);
  Rng rng(123);
  std::array<int, 3> counts{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[sample_token(logits, 0.8, 1.0, rng)];
  CHECK(std::abs(counts[0] / double(n) - 0.625) <= 0.01);
  CHECK(std::abs(counts[1] / double(n) - 0.375) <= 0.01);
  CHECK(counts[2] == 0);
  // Tiny top_p reduces to the argmax.
  for (int i = 0; i < 100; ++i) CHECK(sample_token(logits, 1e-9, 1.0, rng) == 0);
}

TEST_CASE("argmax breaks ties toward the lowest id") {
  Eigen::VectorXd z(4);
  z << 1.0, 3.0, 3.0, 2.0;
  CHECK(argmax_token(z) == 1);
}

TEST_CASE("control draws") {
  const auto a = draw_controls(TypeSource::uniform(), 5, 7);
  CHECK(a == draw_controls(TypeSource::uniform(), 5, 7));
  for (const auto& c : a) CHECK_FALSE(c.is_masked());
  for (const auto& c : draw_controls(TypeSource::masked(), 4, 1)) CHECK(c.is_masked());
  std::array<double, kNumTypes> point{};
  point[static_cast<int>(LogicType::kSuperlative)] = 1.0;
  for (const auto& c : draw_controls(TypeSource::empirical(point), 50, 2))
    CHECK(c == Control::of(LogicType::kSuperlative));
  std::array<double, kNumTypes> bad{};
  bad[0] = 0.9;
  CHECK_THROWS_AS(draw_controls(TypeSource::empirical(bad), 3, 2), NumericError);
  CHECK_THROWS_AS(draw_controls(TypeSource::fixed_list({Control::masked()}), 3, 2), RangeError);
  const std::vector<Control> fixed = {Control::of(LogicType::kCount), Control::of(LogicType::kUnique)};
  CHECK(draw_controls(TypeSource::fixed_list(fixed), 2, 9) == fixed);
}

TEST_CASE("empirical draws converge (chi-square, alpha 0.001)") {
  const std::array<double, kNumTypes> dist = {0.3, 0.05, 0.15, 0.1, 0.2, 0.1, 0.1};
  const int n = 10000;
  for (const auto& source : {TypeSource::empirical(dist), TypeSource::uniform()}) {
    std::array<int, kNumTypes> counts{};
    for (const auto& c : draw_controls(source, n, 77)) ++counts[static_cast<int>(*c.type)];
    double chi2 = 0.0;
    for (int t = 0; t < kNumTypes; ++t) {
      const double expected =
          n * (source.kind == TypeSource::Kind::kUniform ? 1.0 / kNumTypes : dist[t]);
      chi2 += (counts[t] - expected) * (counts[t] - expected) / expected;
    }
    CHECK(chi2 < 22.458);  // 6 degrees of freedom
  }
}

TEST_CASE("generation: determinism and greedy seed independence") {
  const auto& m = small_model();
  const Table& t = m.corpus[0].table;
  GenerationConfig g;
  const Control c = Control::of(LogicType::kCount);
  const auto a = generate(m.params, t, c, g, m.vocab);
  g.seed = 99;
  CHECK(generate(m.params, t, c, g, m.vocab) == a);
  for (const auto& tok : a.tokens) CHECK_FALSE(m.vocab.is_special(m.vocab.id(tok)));
  CHECK(static_cast<int>(a.tokens.size()) <= g.max_new_tokens);

  g.strategy = Strategy::kNucleus;
  g.top_p = 0.9;
  CHECK(generate(m.params, t, c, g, m.vocab) == generate(m.params, t, c, g, m.vocab));
  g.top_p = 1e-9;
  CHECK(generate(m.params, t, c, g, m.vocab) == a);
}

TEST_CASE("generate_set") {
  const auto& m = small_model();
  const Table& t = m.corpus[1].table;
  GenerationConfig g;
  const auto fixed = generate_set(m.params, t, TypeSource::fixed_list(std::vector<Control>(5, Control::of(LogicType::kCount))), 5, g, m.vocab, 4);
  REQUIRE(fixed.size() == 5);
  for (const auto& item : fixed) CHECK(item.statement == fixed[0].statement);
  const auto u1 = generate_set(m.params, t, TypeSource::uniform(), 5, g, m.vocab, 11);
  const auto u2 = generate_set(m.params, t, TypeSource::uniform(), 5, g, m.vocab, 11);
  REQUIRE(u1.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(u1[i].control == u2[i].control);
    CHECK(u1[i].statement == u2[i].statement);
    CHECK(u1[i].statement == generate(m.params, t, u1[i].control, g, m.vocab));
  }
  g.strategy = Strategy::kNucleus;
  const auto s = generate_set(m.params, t, TypeSource::masked(), 3, g, m.vocab, 5);
  for (int i = 0; i < 3; ++i) {
    GenerationConfig gi = g;
    gi.seed = derive_seed(5, i + 1);
    CHECK(s[i].statement == generate(m.params, t, Control::masked(), gi, m.vocab));
  }
}

TEST_CASE("generation config and context errors") {
  GenerationConfig g;
  g.top_p = 0.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.top_p = 1.0;
  g.max_new_tokens = 0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.max_new_tokens = 32;
  g.temperature = 0.0;
  CHECK_THROWS_AS(g.validate(), ConfigError);
  const auto& m = small_model();
  GenerationConfig big;
  big.max_new_tokens = 1000;
  CHECK_THROWS_AS(generate(m.params, m.corpus[0].table, Control::masked(), big, m.vocab), LengthError);
}
