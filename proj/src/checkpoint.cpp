#include <fstream>

#include "json.hpp"
#include "typectl/common.hpp"
#include "typectl/lm.hpp"

namespace typectl {

namespace {
constexpr const char* kFormat = "typectl-lm/1";
}

void save_checkpoint(const ModelParams& params, const Vocab& vocab,
                     const std::filesystem::path& path) {
  const auto& c = params.config();
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : params.tensors()) {
    auto first = params.data().begin() + static_cast<std::ptrdiff_t>(t.offset);
    tensors.push_back({{"name", t.name},
                       {"shape", {t.rows, t.cols}},
                       {"data", std::vector<double>(first, first + static_cast<std::ptrdiff_t>(t.size()))}});
  }
  nlohmann::json j = {{"format", kFormat},
                      {"config",
                       {{"vocab_size", c.vocab_size},
                        {"d_model", c.d_model},
                        {"n_heads", c.n_heads},
                        {"n_layers", c.n_layers},
                        {"context_len", c.context_len}}},
                      {"vocab", vocab.tokens()},
                      {"tensors", tensors}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kFormat) throw ConfigError("checkpoint: unknown format");
  const auto& jc = j.at("config");
  ModelConfig c;
  c.vocab_size = jc.at("vocab_size").get<int>();
  c.d_model = jc.at("d_model").get<int>();
  c.n_heads = jc.at("n_heads").get<int>();
  c.n_layers = jc.at("n_layers").get<int>();
  c.context_len = jc.at("context_len").get<int>();
  c.validate();

  Vocab vocab = Vocab::from_tokens(j.at("vocab").get<std::vector<std::string>>());
  if (vocab.size() != c.vocab_size) throw ConfigError("checkpoint: vocab size disagrees with config");

  ModelParams params(c);
  const auto& jt = j.at("tensors");
  if (jt.size() != params.tensors().size()) throw ConfigError("checkpoint: wrong tensor count");
  for (std::size_t i = 0; i < jt.size(); ++i) {
    const auto& want = params.tensors()[i];
    const auto& t = jt[i];
    const auto shape = t.at("shape").get<std::vector<int>>();
    if (t.at("name").get<std::string>() != want.name || shape.size() != 2 ||
        shape[0] != want.rows || shape[1] != want.cols)
      throw ConfigError("checkpoint: tensor " + want.name + " has the wrong name or shape");
    const auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != want.size()) throw ConfigError("checkpoint: tensor " + want.name + " truncated");
    std::copy(data.begin(), data.end(), params.data().begin() + static_cast<std::ptrdiff_t>(want.offset));
  }
  if (!params.all_finite()) throw NumericError("checkpoint: non-finite weights");
  return {std::move(params), std::move(vocab)};
}

}  // namespace typectl
