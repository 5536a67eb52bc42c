// Decoder-only transformer with hand-written backward pass, float64
// throughout. Pre-LN GPT-2 block: x += attn(ln1(x)); x += mlp(ln2(x)).

#include "typectl/lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "typectl/common.hpp"
#include "typectl/table.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace typectl {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

using Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

std::string layer_name(int l, const char* suffix) {
  return "h" + std::to_string(l) + "." + suffix;
}

std::vector<TensorInfo> make_layout(const ModelConfig& c) {
  std::vector<TensorInfo> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    out.push_back({std::move(name), rows, cols, offset});
    offset += static_cast<std::size_t>(rows) * cols;
  };
  const int d = c.d_model;
  add("wte", c.vocab_size, d);
  add("wpe", c.context_len, d);
  for (int l = 0; l < c.n_layers; ++l) {
    add(layer_name(l, "ln1.g"), 1, d);
    add(layer_name(l, "ln1.b"), 1, d);
    add(layer_name(l, "attn.w_qkv"), d, 3 * d);
    add(layer_name(l, "attn.b_qkv"), 1, 3 * d);
    add(layer_name(l, "attn.w_proj"), d, d);
    add(layer_name(l, "attn.b_proj"), 1, d);
    add(layer_name(l, "ln2.g"), 1, d);
    add(layer_name(l, "ln2.b"), 1, d);
    add(layer_name(l, "mlp.w_fc"), d, 4 * d);
    add(layer_name(l, "mlp.b_fc"), 1, 4 * d);
    add(layer_name(l, "mlp.w_proj"), 4 * d, d);
    add(layer_name(l, "mlp.b_proj"), 1, d);
  }
  add("lnf.g", 1, d);
  add("lnf.b", 1, d);
  return out;
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

void layer_norm(const RowMat& x, Eigen::Map<const RowMat> g, Eigen::Map<const RowMat> b,
                RowMat& xhat, VectorXd& rstd, RowMat& y) {
  const Eigen::Index n = x.rows(), d = x.cols();
  xhat.resize(n, d);
  rstd.resize(n);
  y.resize(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    rstd(r) = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(r) = (x.row(r).array() - mean) * rstd(r);
  }
  y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
}

// dy -> dx, accumulating gain/bias gradients.
RowMat layer_norm_backward(const RowMat& dy, const RowMat& xhat, const VectorXd& rstd,
                           Eigen::Map<const RowMat> g, Eigen::Map<RowMat> dg,
                           Eigen::Map<RowMat> db) {
  dg.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  RowMat dxhat = dy.array().rowwise() * g.row(0).array();
  RowMat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).mean();
    const double m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
    dx.row(r) = rstd(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
  }
  return dx;
}

struct LayerCache {
  RowMat x_in, xhat1, h1, qkv, att, x_mid, xhat2, h2, fc, act;
  VectorXd rstd1, rstd2;
  std::vector<RowMat> probs;  // [seq * n_heads + head], each T x T
};

struct Pass {
  std::vector<int> offsets, lengths;
  int n_tokens = 0;
  std::vector<LayerCache> layers;
  RowMat x_final, xhat_f, hf;
  VectorXd rstd_f;
};

void run_forward(const ModelParams& p, std::span<const Example> batch, Pass& pass) {
  const ModelConfig& c = p.config();
  const int d = c.d_model, nh = c.n_heads, hd = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  pass.offsets.clear();
  pass.lengths.clear();
  int n = 0;
  for (const auto& ex : batch) {
    const int len = static_cast<int>(ex.ids.size());
    if (len > c.context_len) throw LengthError("sequence longer than context_len");
    pass.offsets.push_back(n);
    pass.lengths.push_back(len);
    n += len;
  }
  pass.n_tokens = n;

  const auto wte = p.tensor("wte");
  const auto wpe = p.tensor("wpe");
  RowMat x(n, d);
  for (std::size_t s = 0; s < batch.size(); ++s)
    for (int t = 0; t < pass.lengths[s]; ++t) {
      const int id = batch[s].ids[t];
      if (id < 0 || id >= c.vocab_size) throw VocabError("token id out of range");
      x.row(pass.offsets[s] + t) = wte.row(id) + wpe.row(t);
    }

  pass.layers.assign(c.n_layers, {});
  for (int l = 0; l < c.n_layers; ++l) {
    LayerCache& L = pass.layers[l];
    L.x_in = x;
    layer_norm(x, p.tensor(layer_name(l, "ln1.g")), p.tensor(layer_name(l, "ln1.b")), L.xhat1,
               L.rstd1, L.h1);
    L.qkv = L.h1 * p.tensor(layer_name(l, "attn.w_qkv"));
    L.qkv.rowwise() += p.tensor(layer_name(l, "attn.b_qkv")).row(0);

    L.att.setZero(n, d);
    L.probs.resize(batch.size() * nh);
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const int o = pass.offsets[s], T = pass.lengths[s];
      for (int h = 0; h < nh; ++h) {
        const auto q = L.qkv.block(o, h * hd, T, hd);
        const auto k = L.qkv.block(o, d + h * hd, T, hd);
        const auto v = L.qkv.block(o, 2 * d + h * hd, T, hd);
        RowMat& P = L.probs[s * nh + h];
        P.noalias() = (q * k.transpose()) * scale;
        for (int i = 0; i < T; ++i) {
          const double mx = P.row(i).head(i + 1).maxCoeff();
          double total = 0.0;
          for (int j = 0; j <= i; ++j) {
            P(i, j) = std::exp(P(i, j) - mx);
            total += P(i, j);
          }
          P.row(i).head(i + 1) /= total;
          P.row(i).tail(T - i - 1).setZero();
        }
        L.att.block(o, h * hd, T, hd).noalias() = P * v;
      }
    }
    L.x_mid = x + L.att * p.tensor(layer_name(l, "attn.w_proj"));
    L.x_mid.rowwise() += p.tensor(layer_name(l, "attn.b_proj")).row(0);

    layer_norm(L.x_mid, p.tensor(layer_name(l, "ln2.g")), p.tensor(layer_name(l, "ln2.b")),
               L.xhat2, L.rstd2, L.h2);
    L.fc = L.h2 * p.tensor(layer_name(l, "mlp.w_fc"));
    L.fc.rowwise() += p.tensor(layer_name(l, "mlp.b_fc")).row(0);
    L.act = L.fc.unaryExpr(&gelu);
    x = L.x_mid + L.act * p.tensor(layer_name(l, "mlp.w_proj"));
    x.rowwise() += p.tensor(layer_name(l, "mlp.b_proj")).row(0);
  }
  pass.x_final = x;
  layer_norm(x, p.tensor("lnf.g"), p.tensor("lnf.b"), pass.xhat_f, pass.rstd_f, pass.hf);
  if (!pass.hf.allFinite()) throw NumericError("non-finite activation in forward pass");
}

struct Scored {
  std::vector<int> rows;
  std::vector<int> targets;
};

Scored scored_positions(std::span<const Example> batch, const Pass& pass) {
  Scored out;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& ex = batch[s];
    if (ex.loss_mask.size() != ex.ids.size())
      throw LengthError("loss mask and ids differ in length");
    for (int t = 0; t + 1 < pass.lengths[s]; ++t)
      if (ex.loss_mask[t]) {
        out.rows.push_back(pass.offsets[s] + t);
        out.targets.push_back(ex.ids[t + 1]);
      }
  }
  return out;
}

// Log-softmax of each row, in place.
void log_softmax_rows(RowMat& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    z.row(r).array() -= lse;
  }
}

Eigen::Map<RowMat> grad_view(ParamVector& g, const TensorInfo& t) {
  return {g.data() + t.offset, t.rows, t.cols};
}

}  // namespace

// ---------------------------------------------------------------- Vocab --

const std::vector<std::string>& Vocab::special_tokens() {
  static const std::vector<std::string> specials = [] {
    std::vector<std::string> s = {"[BOS]", "[EOS]", "[STMT]", "[MASK]",
                                  kTitleMarker, kHeaderMarker, kRowMarker, kBarMarker};
    for (LogicType t : kAllTypes) s.push_back("[T:" + std::string(type_name(t)) + "]");
    return s;
  }();
  return specials;
}

Vocab Vocab::build(const std::vector<CorpusRecord>& corpus) {
  std::set<std::string> words;
  for (const auto& rec : corpus) {
    for (auto& tok : linearize_table(rec.table)) words.insert(std::move(tok));
    for (const auto& ref : rec.references)
      for (const auto& tok : ref.statement.tokens) words.insert(tok);
  }
  for (const auto* pool : {&entity_name_pool(), &entity_column_pool(), &numeric_column_pool(),
                           &title_word_pool()})
    words.insert(pool->begin(), pool->end());
  for (int v = 0; v <= kMaxCellValue; ++v) words.insert(std::to_string(v));
  for (const auto& s : special_tokens()) words.erase(s);

  std::vector<std::string> tokens = special_tokens();
  tokens.insert(tokens.end(), words.begin(), words.end());
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens.begin()))
    throw VocabError("vocabulary must start with the special tokens");
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i)
    if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second)
      throw VocabError("duplicate vocabulary token '" + v.tokens_[i] + "'");
  return v;
}

std::optional<int> Vocab::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw VocabError("token '" + token + "' is not in the vocabulary");
  return it->second;
}

int Vocab::control_id(const Control& c) const {
  return c.is_masked() ? kMask : kFirstType + static_cast<int>(*c.type);
}

// -------------------------------------------------------------- configs --

void ModelConfig::validate() const {
  if (vocab_size <= Vocab::kNumSpecials) throw ConfigError("vocab_size too small");
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
    throw ConfigError("d_model must be a positive multiple of n_heads");
  if (n_layers <= 0) throw ConfigError("n_layers must be positive");
  if (context_len <= 0) throw ConfigError("context_len must be positive");
}

void TrainConfig::validate() const {
  if (!(p_mask >= 0.0 && p_mask <= 1.0)) throw ConfigError("p_mask must be in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
}

// --------------------------------------------------------------- params --

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
  config_.validate();
  tensors_ = make_layout(config_);
  for (std::size_t i = 0; i < tensors_.size(); ++i) index_.emplace(tensors_[i].name, i);
  data_.assign(tensors_.back().offset + tensors_.back().size(), 0.0);
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed, double init_std) {
  ModelParams p(config);
  Rng rng(seed);
  const double resid_std = init_std / std::sqrt(2.0 * config.n_layers);
  for (const auto& t : p.tensors_) {
    double* w = p.data_.data() + t.offset;
    const bool gain = t.name.ends_with(".g");
    const bool vector = t.rows == 1;
    const bool resid = t.name.ends_with("attn.w_proj") || t.name.ends_with("mlp.w_proj");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (gain) w[i] = 1.0;
      else if (vector) w[i] = 0.0;
      else w[i] = rng.normal() * (resid ? resid_std : init_std);
    }
  }
  return p;
}

const TensorInfo& ModelParams::info(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no tensor named " + name);
  return tensors_[it->second];
}

Eigen::Map<RowMat> ModelParams::tensor(const std::string& name) {
  const auto& t = info(name);
  return {data_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const RowMat> ModelParams::tensor(const std::string& name) const {
  const auto& t = info(name);
  return {data_.data() + t.offset, t.rows, t.cols};
}

std::uint64_t ModelParams::checksum() const {
  return fnv1a_bytes(data_.data(), data_.size() * sizeof(double));
}

bool ModelParams::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

// ------------------------------------------------------------- encoding --

std::vector<int> encode_prompt(const Table& table, const Control& control, const Vocab& vocab) {
  std::vector<int> ids = {Vocab::kBos, vocab.control_id(control)};
  for (const auto& tok : linearize_table(table)) {
    auto id = vocab.find(tok);
    if (!id) throw VocabError("table " + table.id + ": token '" + tok + "' is not in the vocabulary");
    ids.push_back(*id);
  }
  ids.push_back(Vocab::kStmt);
  return ids;
}

Example encode_example(const Table& table, const Control& control, const Statement& statement,
                       const Vocab& vocab, int context_len) {
  Example ex;
  ex.ids = encode_prompt(table, control, vocab);
  const std::size_t stmt_pos = ex.ids.size() - 1;
  for (const auto& tok : statement.tokens) {
    auto id = vocab.find(tok);
    if (!id) throw VocabError("statement token '" + tok + "' is not in the vocabulary");
    ex.ids.push_back(*id);
  }
  ex.ids.push_back(Vocab::kEos);
  if (static_cast<int>(ex.ids.size()) > context_len)
    throw LengthError("table " + table.id + ": encoded length " + std::to_string(ex.ids.size()) +
                      " exceeds context_len " + std::to_string(context_len));
  ex.loss_mask.assign(ex.ids.size(), 0);
  for (std::size_t t = stmt_pos; t + 1 < ex.ids.size(); ++t) ex.loss_mask[t] = 1;
  return ex;
}

// -------------------------------------------------------- forward/backward --

ForwardResult forward_loss(const ModelParams& params, std::span<const Example> batch,
                           bool want_logits) {
  if (batch.empty()) throw RangeError("forward_loss: empty batch");
  Pass pass;
  run_forward(params, batch, pass);
  const auto wte = params.tensor("wte");
  const Scored sc = scored_positions(batch, pass);

  ForwardResult out;
  out.scored_positions = static_cast<int>(sc.rows.size());
  if (!sc.rows.empty()) {
    RowMat hsel(sc.rows.size(), params.config().d_model);
    for (std::size_t i = 0; i < sc.rows.size(); ++i) hsel.row(i) = pass.hf.row(sc.rows[i]);
    RowMat z = hsel * wte.transpose();
    log_softmax_rows(z);
    CompensatedSum total;
    for (std::size_t i = 0; i < sc.rows.size(); ++i) total.add(-z(i, sc.targets[i]));
    out.loss = total.value() / static_cast<double>(sc.rows.size());
  }
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  if (want_logits) {
    for (std::size_t s = 0; s < batch.size(); ++s)
      out.logits.push_back(pass.hf.block(pass.offsets[s], 0, pass.lengths[s], pass.hf.cols()) *
                           wte.transpose());
  }
  return out;
}

double loss_and_gradient(const ModelParams& params, std::span<const Example> batch,
                         ParamVector& grad, double loss_scale) {
  if (batch.empty()) throw RangeError("loss_and_gradient: empty batch");
  const ModelConfig& c = params.config();
  const int d = c.d_model, nh = c.n_heads, hd = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  grad.assign(params.parameter_count(), 0.0);

  Pass pass;
  run_forward(params, batch, pass);
  const Scored sc = scored_positions(batch, pass);
  if (sc.rows.empty()) return 0.0;

  const auto wte = params.tensor("wte");
  auto gwte = grad_view(grad, params.info("wte"));
  auto gwpe = grad_view(grad, params.info("wpe"));
  const auto M = static_cast<double>(sc.rows.size());

  RowMat hsel(sc.rows.size(), d);
  for (std::size_t i = 0; i < sc.rows.size(); ++i) hsel.row(i) = pass.hf.row(sc.rows[i]);
  RowMat z = hsel * wte.transpose();
  log_softmax_rows(z);
  CompensatedSum total;
  for (std::size_t i = 0; i < sc.rows.size(); ++i) total.add(-z(i, sc.targets[i]));
  const double loss = total.value() / M;
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");

  // dlogits = (softmax - onehot) * scale / M
  RowMat dz = z.array().exp();
  for (std::size_t i = 0; i < sc.rows.size(); ++i) dz(i, sc.targets[i]) -= 1.0;
  dz *= loss_scale / M;
  gwte.noalias() += dz.transpose() * hsel;
  const RowMat dhsel = dz * wte;

  RowMat dhf = RowMat::Zero(pass.n_tokens, d);
  for (std::size_t i = 0; i < sc.rows.size(); ++i) dhf.row(sc.rows[i]) += dhsel.row(i);

  RowMat dx = layer_norm_backward(dhf, pass.xhat_f, pass.rstd_f, params.tensor("lnf.g"),
                                  grad_view(grad, params.info("lnf.g")),
                                  grad_view(grad, params.info("lnf.b")));

  for (int l = c.n_layers - 1; l >= 0; --l) {
    const LayerCache& L = pass.layers[l];
    auto G = [&](const char* suffix) { return grad_view(grad, params.info(layer_name(l, suffix))); };
    auto W = [&](const char* suffix) { return params.tensor(layer_name(l, suffix)); };

    // MLP
    G("mlp.w_proj").noalias() += L.act.transpose() * dx;
    G("mlp.b_proj").row(0) += dx.colwise().sum();
    RowMat dfc = dx * W("mlp.w_proj").transpose();
    dfc.array() *= L.fc.unaryExpr(&gelu_grad).array();
    G("mlp.w_fc").noalias() += L.h2.transpose() * dfc;
    G("mlp.b_fc").row(0) += dfc.colwise().sum();
    const RowMat dh2 = dfc * W("mlp.w_fc").transpose();
    RowMat dmid = dx + layer_norm_backward(dh2, L.xhat2, L.rstd2, W("ln2.g"), G("ln2.g"), G("ln2.b"));

    // Attention
    G("attn.w_proj").noalias() += L.att.transpose() * dmid;
    G("attn.b_proj").row(0) += dmid.colwise().sum();
    const RowMat datt = dmid * W("attn.w_proj").transpose();
    RowMat dqkv = RowMat::Zero(pass.n_tokens, 3 * d);
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const int o = pass.offsets[s], T = pass.lengths[s];
      for (int h = 0; h < nh; ++h) {
        const RowMat& P = L.probs[s * nh + h];
        const auto q = L.qkv.block(o, h * hd, T, hd);
        const auto k = L.qkv.block(o, d + h * hd, T, hd);
        const auto v = L.qkv.block(o, 2 * d + h * hd, T, hd);
        const auto dout = datt.block(o, h * hd, T, hd);
        RowMat dP = dout * v.transpose();
        dqkv.block(o, 2 * d + h * hd, T, hd).noalias() = P.transpose() * dout;
        const VectorXd rowdot = (dP.array() * P.array()).rowwise().sum();
        RowMat dS = (P.array() * (dP.colwise() - rowdot).array()) * scale;
        dqkv.block(o, h * hd, T, hd).noalias() = dS * k;
        dqkv.block(o, d + h * hd, T, hd).noalias() = dS.transpose() * q;
      }
    }
    G("attn.w_qkv").noalias() += L.h1.transpose() * dqkv;
    G("attn.b_qkv").row(0) += dqkv.colwise().sum();
    const RowMat dh1 = dqkv * W("attn.w_qkv").transpose();
    dx = dmid + layer_norm_backward(dh1, L.xhat1, L.rstd1, W("ln1.g"), G("ln1.g"), G("ln1.b"));
  }

  for (std::size_t s = 0; s < batch.size(); ++s)
    for (int t = 0; t < pass.lengths[s]; ++t) {
      const auto r = dx.row(pass.offsets[s] + t);
      gwte.row(batch[s].ids[t]) += r;
      gwpe.row(t) += r;
    }
  return loss * loss_scale;
}

GradCheckResult grad_check(const ModelParams& params, std::span<const Example> batch,
                           double epsilon, int min_coords, std::uint64_t seed) {
  ParamVector analytic;
  loss_and_gradient(params, batch, analytic);
  ModelParams probe = params;
  Rng rng(seed);
  GradCheckResult out;
  const double total = static_cast<double>(params.parameter_count());
  for (const auto& t : params.tensors()) {
    const auto want = static_cast<std::size_t>(
        std::max(4.0, std::ceil(min_coords * static_cast<double>(t.size()) / total)));
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t k = std::min(want, idx.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    double worst = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t at = t.offset + idx[i];
      const double orig = probe.data()[at];
      probe.data()[at] = orig + epsilon;
      const double up = forward_loss(probe, batch).loss;
      probe.data()[at] = orig - epsilon;
      const double down = forward_loss(probe, batch).loss;
      probe.data()[at] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[at];
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, err);
      ++out.coordinates;
    }
    out.per_tensor[t.name] = worst;
    out.max_rel_error = std::max(out.max_rel_error, worst);
  }
  return out;
}

// --------------------------------------------------------------- training --

std::vector<bool> mask_draws(std::uint64_t seed, int epoch, std::size_t n, double p_mask) {
  Rng rng(derive_seed(derive_seed(seed, 0x6d61736bULL), static_cast<std::uint64_t>(epoch)));
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.bernoulli(p_mask);
  return out;
}

std::vector<Example> training_examples(const std::vector<CorpusRecord>& corpus, const Vocab& vocab,
                                       int context_len) {
  std::vector<Example> out;
  for (const auto& rec : corpus)
    for (const auto& ref : rec.references)
      out.push_back(encode_example(rec.table, Control::of(ref.gold_type), ref.statement, vocab,
                                   context_len));
  return out;
}

ModelParams train(const std::vector<CorpusRecord>& corpus, const Vocab& vocab,
                  const ModelConfig& model_config, const TrainConfig& tc, TrainLog* log) {
  if (corpus.empty()) throw RangeError("train: empty corpus");
  tc.validate();
#if defined(__GLIBC__)
  // Keep large activation buffers on the heap instead of mmap/munmap per step.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  ModelConfig mc = model_config;
  mc.vocab_size = vocab.size();
  ModelParams params = ModelParams::init(mc, derive_seed(tc.seed, 0x696e6974ULL));

  const std::vector<Example> examples = training_examples(corpus, vocab, mc.context_len);
  const std::size_t n = examples.size();
  std::vector<double> m(params.parameter_count(), 0.0), v(params.parameter_count(), 0.0);
  ParamVector grad;
  Rng order_rng(derive_seed(tc.seed, 0x73687566ULL));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  TrainLog local;
  local.examples = n;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto masked = mask_draws(tc.seed, epoch, n, tc.p_mask);
    local.masked_count.push_back(static_cast<std::size_t>(std::count(masked.begin(), masked.end(), true)));
    order_rng.shuffle(order);
    CompensatedSum epoch_loss;
    double epoch_tokens = 0.0;
    for (std::size_t start = 0; start < n; start += tc.batch_size) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(tc.batch_size));
      std::vector<Example> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(examples[order[i]]);
        if (masked[order[i]]) batch.back().ids[1] = Vocab::kMask;
      }
      const double loss = loss_and_gradient(params, batch, grad);
      if (step == 0) local.initial_loss = loss;
      double tokens = 0.0;
      for (const auto& ex : batch) tokens += std::count(ex.loss_mask.begin(), ex.loss_mask.end(), 1);
      epoch_loss.add(loss * tokens);
      epoch_tokens += tokens;

      ++step;
      const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
      auto& w = params.data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = tc.beta1 * m[i] + (1.0 - tc.beta1) * grad[i];
        v[i] = tc.beta2 * v[i] + (1.0 - tc.beta2) * grad[i] * grad[i];
        w[i] -= tc.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + tc.adam_eps);
      }
    }
    local.epoch_loss.push_back(epoch_loss.value() / std::max(epoch_tokens, 1.0));
    if (!params.all_finite() || !std::isfinite(local.epoch_loss.back()))
      throw NumericError("training diverged in epoch " + std::to_string(epoch));
  }
  if (log) *log = std::move(local);
  return params;
}

// --------------------------------------------------------------- decoder --

Decoder::Decoder(const ModelParams& params) : params_(&params) {
  const auto& c = params.config();
  keys_.assign(c.n_layers, RowMat(c.context_len, c.d_model));
  values_.assign(c.n_layers, RowMat(c.context_len, c.d_model));
}

Eigen::VectorXd Decoder::feed(std::span<const int> ids) {
  if (ids.empty()) throw RangeError("Decoder::feed: no tokens");
  Eigen::VectorXd logits;
  for (int id : ids) logits = feed_one(id);
  return logits;
}

Eigen::VectorXd Decoder::feed_one(int id) {
  const ModelParams& p = *params_;
  const ModelConfig& c = p.config();
  const int d = c.d_model, nh = c.n_heads, hd = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const int pos = length_;
  if (pos >= c.context_len) throw LengthError("decoder context overflow");
  if (id < 0 || id >= c.vocab_size) throw VocabError("token id out of range");

  auto ln = [](const RowVec& x, Eigen::Map<const RowMat> g, Eigen::Map<const RowMat> b) {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    return RowVec(((x.array() - mean) * rstd) * g.row(0).array() + b.row(0).array());
  };

  RowVec x = p.tensor("wte").row(id) + p.tensor("wpe").row(pos);
  for (int l = 0; l < c.n_layers; ++l) {
    const RowVec h1 = ln(x, p.tensor(layer_name(l, "ln1.g")), p.tensor(layer_name(l, "ln1.b")));
    const RowVec qkv = h1 * p.tensor(layer_name(l, "attn.w_qkv")) +
                       p.tensor(layer_name(l, "attn.b_qkv")).row(0);
    keys_[l].row(pos) = qkv.segment(d, d);
    values_[l].row(pos) = qkv.segment(2 * d, d);
    RowVec att(d);
    for (int h = 0; h < nh; ++h) {
      const auto q = qkv.segment(h * hd, hd);
      const auto k = keys_[l].block(0, h * hd, pos + 1, hd);
      const auto v = values_[l].block(0, h * hd, pos + 1, hd);
      Eigen::VectorXd s = (k * q.transpose()) * scale;
      s = (s.array() - s.maxCoeff()).exp();
      s /= s.sum();
      att.segment(h * hd, hd) = s.transpose() * v;
    }
    x += att * p.tensor(layer_name(l, "attn.w_proj")) + p.tensor(layer_name(l, "attn.b_proj")).row(0);
    const RowVec h2 = ln(x, p.tensor(layer_name(l, "ln2.g")), p.tensor(layer_name(l, "ln2.b")));
    RowVec fc = h2 * p.tensor(layer_name(l, "mlp.w_fc")) + p.tensor(layer_name(l, "mlp.b_fc")).row(0);
    fc = fc.unaryExpr(&gelu);
    x += fc * p.tensor(layer_name(l, "mlp.w_proj")) + p.tensor(layer_name(l, "mlp.b_proj")).row(0);
  }
  const RowVec hf = ln(x, p.tensor("lnf.g"), p.tensor("lnf.b"));
  ++length_;
  Eigen::VectorXd logits = p.tensor("wte") * hf.transpose();
  if (!logits.allFinite()) throw NumericError("non-finite logits in decoder");
  return logits;
}

}  // namespace typectl
