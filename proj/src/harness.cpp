#include "typectl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "typectl/common.hpp"

namespace typectl {

using nlohmann::json;

// ------------------------------------------------------------------ files --

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_number(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw NumericError("cannot format number");
  return std::string(buf, p);
}

// ----------------------------------------------------------------- config --

void ExperimentConfig::validate() const {
  if (corpus.n_tables < 30) throw ConfigError("corpus.n_tables must be >= 30");
  if (corpus.refs_per_table < 1 || corpus.refs_per_table > 5)
    throw ConfigError("corpus.refs_per_table must be in [1, 5]");
  ModelConfig m = model;
  m.vocab_size = Vocab::kNumSpecials + 1;
  m.validate();
  train.validate();
  if (p_mask_grid.empty()) throw ConfigError("p_mask_grid must be nonempty");
  for (double p : p_mask_grid)
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p_mask_grid values must be in [0, 1]");
  if (top_p_grid.empty()) throw ConfigError("top_p_grid must be nonempty");
  for (double p : top_p_grid)
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("top_p_grid values must be in (0, 1]");
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seeds must be distinct");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (classifier != "learned" && classifier != "rule")
    throw ConfigError("classifier must be \"learned\" or \"rule\"");
  if (classifier_epochs < 1 || !(classifier_lr > 0.0))
    throw ConfigError("classifier_epochs and classifier_lr must be positive");
  if (max_test_tables < 0) throw ConfigError("max_test_tables must be >= 0");
  GenerationConfig g;
  g.temperature = temperature;
  g.max_new_tokens = max_new_tokens;
  g.validate();
}

json ExperimentConfig::to_json() const {
  return {
      {"corpus", {{"n_tables", corpus.n_tables}, {"refs_per_table", corpus.refs_per_table},
                  {"seed", corpus.seed}}},
      {"model", {{"d_model", model.d_model}, {"n_heads", model.n_heads},
                 {"n_layers", model.n_layers}, {"context_len", model.context_len}}},
      {"train", {{"lr", train.lr}, {"batch_size", train.batch_size}, {"epochs", train.epochs},
                 {"beta1", train.beta1}, {"beta2", train.beta2}, {"adam_eps", train.adam_eps}}},
      {"p_mask_grid", p_mask_grid},
      {"top_p_grid", top_p_grid},
      {"temperature", temperature},
      {"max_new_tokens", max_new_tokens},
      {"seeds", seeds},
      {"k", k},
      {"classifier", classifier},
      {"classifier_epochs", classifier_epochs},
      {"classifier_lr", classifier_lr},
      {"max_test_tables", max_test_tables},
      {"record_wall_time", record_wall_time},
      {"out_dir", out_dir},
  };
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown config key " + where + "." + k);
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    reject_unknown(j,
                   {"corpus", "model", "train", "p_mask_grid", "top_p_grid", "temperature",
                    "max_new_tokens", "seeds", "k", "classifier", "classifier_epochs",
                    "classifier_lr", "max_test_tables", "record_wall_time", "out_dir"},
                   "config");
    if (j.contains("corpus")) {
      const auto& s = j.at("corpus");
      reject_unknown(s, {"n_tables", "refs_per_table", "seed"}, "corpus");
      take(s, "n_tables", c.corpus.n_tables);
      take(s, "refs_per_table", c.corpus.refs_per_table);
      take(s, "seed", c.corpus.seed);
    }
    if (j.contains("model")) {
      const auto& s = j.at("model");
      reject_unknown(s, {"d_model", "n_heads", "n_layers", "context_len"}, "model");
      take(s, "d_model", c.model.d_model);
      take(s, "n_heads", c.model.n_heads);
      take(s, "n_layers", c.model.n_layers);
      take(s, "context_len", c.model.context_len);
    }
    if (j.contains("train")) {
      const auto& s = j.at("train");
      reject_unknown(s, {"lr", "batch_size", "epochs", "beta1", "beta2", "adam_eps"}, "train");
      take(s, "lr", c.train.lr);
      take(s, "batch_size", c.train.batch_size);
      take(s, "epochs", c.train.epochs);
      take(s, "beta1", c.train.beta1);
      take(s, "beta2", c.train.beta2);
      take(s, "adam_eps", c.train.adam_eps);
    }
    take(j, "p_mask_grid", c.p_mask_grid);
    take(j, "top_p_grid", c.top_p_grid);
    take(j, "temperature", c.temperature);
    take(j, "max_new_tokens", c.max_new_tokens);
    take(j, "seeds", c.seeds);
    take(j, "k", c.k);
    take(j, "classifier", c.classifier);
    take(j, "classifier_epochs", c.classifier_epochs);
    take(j, "classifier_lr", c.classifier_lr);
    take(j, "max_test_tables", c.max_test_tables);
    take(j, "record_wall_time", c.record_wall_time);
    take(j, "out_dir", c.out_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return from_json(j);
}

// The output location is not part of an experiment's identity.
std::uint64_t ExperimentConfig::hash() const {
  auto j = to_json();
  j.erase("out_dir");
  return fnv1a(j.dump());
}

// ----------------------------------------------------------------- corpus --

Splits build_corpus(const CorpusConfig& cfg) {
  if (cfg.n_tables < 30) throw ConfigError("build_corpus needs n_tables >= 30");
  if (cfg.refs_per_table < 1 || cfg.refs_per_table > 5)
    throw ConfigError("refs_per_table must be in [1, 5]");
  std::vector<CorpusRecord> all;
  std::vector<std::string> warnings;
  for (int i = 0; i < cfg.n_tables; ++i) {
    const std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    Rng rng(ts);
    const int rows = rng.range(kMinRows, kMaxRows);
    const int cols = rng.range(kMinNumericCols, kMaxNumericCols);
    CorpusRecord rec;
    rec.table = gen_synthetic_table(ts, rows, cols);
    char id[32];
    std::snprintf(id, sizeof(id), "tbl-%05d", i);
    rec.table.id = id;

    const auto forms = enumerate_forms(rec.table, kNumTypes + cfg.refs_per_table, ts);
    // The enumerator yields one form per supported type first.
    std::vector<TypedForm> per_type, extra;
    std::set<LogicType> seen;
    for (const auto& f : forms) (seen.insert(f.type).second ? per_type : extra).push_back(f);
    if (static_cast<int>(per_type.size()) < kNumTypes)
      warnings.push_back(rec.table.id + ": only " + std::to_string(per_type.size()) +
                         " of 7 types supported");
    rng.shuffle(per_type);
    std::vector<TypedForm> chosen(per_type.begin(),
                                  per_type.begin() + std::min<std::size_t>(per_type.size(), cfg.refs_per_table));
    for (std::size_t j = 0; chosen.size() < static_cast<std::size_t>(cfg.refs_per_table) && j < extra.size(); ++j)
      chosen.push_back(extra[j]);
    for (const auto& f : chosen) {
      const int variant = static_cast<int>(rng.below(kVariantsPerType));
      rec.references.push_back({realize(f.form, rec.table, variant), f.type, f.form});
    }
    all.push_back(std::move(rec));
  }

  std::vector<std::size_t> order(all.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(derive_seed(cfg.seed, 0x73706c6974ULL));
  split_rng.shuffle(order);
  const std::size_t n = all.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_dev = n / 10;
  Splits s;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? s.train : i < n_train + n_dev ? s.dev : s.test;
    dst.push_back(all[order[i]]);
  }
  s.warnings = std::move(warnings);
  return s;
}

std::vector<CorpusRecord> limit_tables(const std::vector<CorpusRecord>& test, int max_tables) {
  if (max_tables <= 0 || max_tables >= static_cast<int>(test.size())) return test;
  return {test.begin(), test.begin() + max_tables};
}

// --------------------------------------------------------------- training --

TrainedModel train_model(const std::vector<CorpusRecord>& train_split, const ExperimentConfig& cfg,
                         double p_mask, std::uint64_t seed) {
  TrainedModel out{ModelParams{}, Vocab::build(train_split), {}, p_mask};
  TrainConfig tc = cfg.train;
  tc.p_mask = p_mask;
  tc.seed = seed;
  out.params = train(train_split, out.vocab, cfg.model, tc, &out.log);
  return out;
}

ClassifierModel train_type_classifier(const std::vector<CorpusRecord>& train_split,
                                      const ExperimentConfig& cfg, std::uint64_t seed) {
  std::vector<LabeledStatement> pairs;
  for (const auto& rec : train_split)
    for (const auto& ref : rec.references) pairs.emplace_back(ref.statement, ref.gold_type);
  return train_classifier(pairs, cfg.classifier_epochs, cfg.classifier_lr, seed);
}

TypeClassifierFn make_classifier(const ExperimentConfig& cfg, const ClassifierModel& learned) {
  return cfg.classifier == "rule" ? rule_classifier() : learned_classifier(learned);
}

// ------------------------------------------------------------- protocols --

namespace {

GenerationConfig greedy_config(int max_new_tokens) {
  GenerationConfig g;
  g.strategy = Strategy::kGreedy;
  g.max_new_tokens = max_new_tokens;
  return g;
}

void append_set(std::vector<Generation>& out, const std::string& table_id,
                const std::vector<GeneratedItem>& items) {
  for (const auto& it : items) out.push_back({table_id, it.control, it.statement});
}

double now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

std::vector<Generation> devtc_generations(const ModelParams& params, const Vocab& vocab,
                                          const std::vector<CorpusRecord>& test,
                                          const TypeSource& source, int k, std::uint64_t seed) {
  std::vector<Generation> out;
  const auto g = greedy_config(32);
  for (const auto& rec : test)
    append_set(out, rec.table.id,
               generate_set(params, rec.table, source, k, g, vocab, table_seed(seed, rec.table.id)));
  return out;
}

std::vector<Generation> baseline_generations(const ModelParams& params, const Vocab& vocab,
                                             const std::vector<CorpusRecord>& test, double top_p,
                                             const ExperimentConfig& cfg, std::uint64_t seed) {
  GenerationConfig g;
  g.strategy = Strategy::kNucleus;
  g.top_p = top_p;
  g.temperature = cfg.temperature;
  g.max_new_tokens = cfg.max_new_tokens;
  std::vector<Generation> out;
  for (const auto& rec : test)
    append_set(out, rec.table.id,
               generate_set(params, rec.table, TypeSource::masked(), cfg.k, g, vocab,
                            table_seed(seed, rec.table.id)));
  return out;
}

ConsistencyRun run_type_consistency(const ModelParams& params, const Vocab& vocab,
                                    const std::vector<CorpusRecord>& test,
                                    const TypeClassifierFn& classify, std::uint64_t seed, int k) {
  ConsistencyRun run;
  run.generations = devtc_generations(params, vocab, test, TypeSource::uniform(), k, seed);
  std::unordered_map<std::string, const Table*> tables;
  for (const auto& rec : test) tables.emplace(rec.table.id, &rec.table);
  std::vector<ConsistencyItem> items;
  for (const auto& g : run.generations)
    items.push_back({*g.control.type, g.statement, tables.at(g.table_id)});
  run.consistency = type_consistency(items, classify);
  return run;
}

SweepRow score_generations(const std::vector<Generation>& gens,
                           const std::vector<CorpusRecord>& tables,
                           const TypeClassifierFn* classify) {
  std::unordered_map<std::string, const Table*> by_id;
  for (const auto& rec : tables) by_id.emplace(rec.table.id, &rec.table);

  // Sets in order of first appearance.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const Generation*>> sets;
  for (const auto& g : gens) {
    if (!by_id.count(g.table_id)) throw ValidityError("generation for unknown table " + g.table_id);
    auto& v = sets[g.table_id];
    if (v.empty()) order.push_back(g.table_id);
    v.push_back(&g);
  }

  CompensatedSum fact, ent, dist, sb;
  bool all_controlled = true;
  std::vector<ConsistencyItem> items;
  for (const auto& id : order) {
    const Table& table = *by_id.at(id);
    std::vector<Statement> stmts;
    std::vector<std::pair<Table, Statement>> pairs;
    for (const auto* g : sets.at(id)) {
      stmts.push_back(g->statement);
      pairs.emplace_back(table, g->statement);
      if (g->control.is_masked()) all_controlled = false;
      else items.push_back({*g->control.type, g->statement, &table});
    }
    fact.add(factuality_acc(pairs));
    ent.add(ngram_total(stmts, 4) > 0 ? ent_n(stmts, 4) : 0.0);
    dist.add(ngram_total(stmts, 1) > 0 ? dist_n(stmts, 2) : 0.0);
    sb.add(stmts.size() >= 2 ? self_bleu_n(stmts, 4) : 0.0);
  }
  SweepRow row;
  const double n = static_cast<double>(std::max<std::size_t>(order.size(), 1));
  row.factuality_acc = fact.value() / n;
  row.ent4 = ent.value() / n;
  row.dist2 = dist.value() / n;
  row.self_bleu4 = sb.value() / n;
  if (classify && all_controlled && !items.empty())
    row.type_consistency_macro = type_consistency(items, *classify).macro;
  return row;
}

SweepOutput run_tradeoff(const TrainedModel& devtc, const TrainedModel& baseline,
                         const std::vector<CorpusRecord>& test, const ExperimentConfig& cfg,
                         const TypeClassifierFn& classify, std::uint64_t seed) {
  SweepOutput out;
  auto push = [&](SweepRow row, std::vector<Generation> gens, double t0) {
    if (cfg.record_wall_time) row.wall_ms = now_ms() - t0;
    row.seed = seed;
    out.rows.push_back(std::move(row));
    out.generations.push_back(std::move(gens));
  };

  double t0 = now_ms();
  auto gens = devtc_generations(devtc.params, devtc.vocab, test, TypeSource::uniform(), cfg.k,
                                derive_seed(seed, 1));
  SweepRow row = score_generations(gens, test, &classify);
  row.method = "devtc";
  row.p_mask = devtc.p_mask;
  push(std::move(row), std::move(gens), t0);

  std::vector<Generation> last_baseline;
  double last_top_p = -1.0;
  for (std::size_t i = 0; i < cfg.top_p_grid.size(); ++i) {
    const double top_p = cfg.top_p_grid[i];
    t0 = now_ms();
    gens = baseline_generations(baseline.params, baseline.vocab, test, top_p, cfg,
                                derive_seed(seed, 100 + i));
    row = score_generations(gens, test, nullptr);
    row.method = "baseline";
    row.p_mask = baseline.p_mask;
    row.top_p = top_p;
    if (top_p >= last_top_p) {
      last_top_p = top_p;
      last_baseline = gens;
    }
    push(std::move(row), std::move(gens), t0);
  }

  // Empirical type distribution of the least-truncated baseline output.
  std::unordered_map<std::string, const Table*> by_id;
  for (const auto& rec : test) by_id.emplace(rec.table.id, &rec.table);
  std::array<double, kNumTypes> dist{};
  double classified = 0.0;
  for (const auto& g : last_baseline)
    if (auto t = classify(g.statement, *by_id.at(g.table_id))) {
      dist[static_cast<int>(*t)] += 1.0;
      classified += 1.0;
    }
  for (double& d : dist) d = classified > 0 ? d / classified : 1.0 / kNumTypes;
  t0 = now_ms();
  gens = devtc_generations(devtc.params, devtc.vocab, test, TypeSource::empirical(dist), cfg.k,
                           derive_seed(seed, 2));
  row = score_generations(gens, test, &classify);
  row.method = "devtc-empirical";
  row.p_mask = devtc.p_mask;
  push(std::move(row), std::move(gens), t0);
  return out;
}

SweepOutput run_mask_sweep(const Splits& splits, const ExperimentConfig& cfg,
                           const TypeClassifierFn& classify) {
  SweepOutput out;
  const auto test = limit_tables(splits.test, cfg.max_test_tables);
  for (double p : cfg.p_mask_grid)
    for (std::uint64_t seed : cfg.seeds) {
      const double t0 = now_ms();
      const TrainedModel m = train_model(splits.train, cfg, p, seed);
      auto gens = devtc_generations(m.params, m.vocab, test, TypeSource::uniform(), cfg.k,
                                    derive_seed(seed, 1));
      SweepRow row = score_generations(gens, test, &classify);
      row.method = "devtc";
      row.p_mask = p;
      row.seed = seed;
      if (cfg.record_wall_time) row.wall_ms = now_ms() - t0;
      out.rows.push_back(std::move(row));
      out.generations.push_back(std::move(gens));
    }
  return out;
}

// ---------------------------------------------------------------- results --

std::string SweepRow::condition_key() const {
  std::string key = method;
  if (p_mask) key += "_pm" + format_number(*p_mask);
  if (top_p) key += "_tp" + format_number(*top_p);
  key += "_s" + std::to_string(seed);
  return key;
}

namespace {

const char* kCsvHeader =
    "method,p_mask,top_p,seed,factuality_acc,ent4,dist2,self_bleu4,type_consistency_macro,wall_ms";

std::string opt(const std::optional<double>& x) { return x ? format_number(*x) : ""; }

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("bad CSV number: " + s);
  return v;
}

}  // namespace

std::string rows_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += r.method + "," + opt(r.p_mask) + "," + opt(r.top_p) + "," + std::to_string(r.seed) +
           "," + format_number(r.factuality_acc) + "," + format_number(r.ent4) + "," +
           format_number(r.dist2) + "," + format_number(r.self_bleu4) + "," +
           opt(r.type_consistency_macro) + "," + opt(r.wall_ms) + "\n";
  }
  return out;
}

std::vector<SweepRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError("sweep CSV: bad header");
  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 10) throw ParseError(lineno, "sweep CSV: expected 10 fields");
    SweepRow r;
    r.method = f[0];
    r.p_mask = parse_opt(f[1]);
    r.top_p = parse_opt(f[2]);
    r.seed = std::stoull(f[3]);
    r.factuality_acc = parse_opt(f[4]).value_or(0.0);
    r.ent4 = parse_opt(f[5]).value_or(0.0);
    r.dist2 = parse_opt(f[6]).value_or(0.0);
    r.self_bleu4 = parse_opt(f[7]).value_or(0.0);
    r.type_consistency_macro = parse_opt(f[8]);
    r.wall_ms = parse_opt(f[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

struct ConditionKey {
  std::string method;
  std::optional<double> p_mask, top_p;
  auto operator<=>(const ConditionKey&) const = default;
};

struct MeanSem {
  double mean = 0.0;
  std::optional<double> sem;
};

MeanSem mean_sem(const std::vector<double>& xs) {
  MeanSem out;
  out.mean = mean_of(xs);
  if (xs.size() >= 2) {
    CompensatedSum ss;
    for (double x : xs) ss.add((x - out.mean) * (x - out.mean));
    const double var = ss.value() / static_cast<double>(xs.size() - 1);
    out.sem = std::sqrt(var / static_cast<double>(xs.size()));
  }
  return out;
}

json ms_json(const MeanSem& m) {
  return {{"mean", m.mean}, {"sem", m.sem ? json(*m.sem) : json(nullptr)}};
}

std::map<ConditionKey, std::vector<const SweepRow*>> group_rows(const std::vector<SweepRow>& rows) {
  std::map<ConditionKey, std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) groups[{r.method, r.p_mask, r.top_p}].push_back(&r);
  return groups;
}

}  // namespace

json summarize(const std::vector<SweepRow>& rows) {
  json conditions = json::array();
  for (const auto& [key, members] : group_rows(rows)) {
    std::vector<double> fact, ent, dist, sb, tc;
    for (const auto* r : members) {
      fact.push_back(r->factuality_acc);
      ent.push_back(r->ent4);
      dist.push_back(r->dist2);
      sb.push_back(r->self_bleu4);
      if (r->type_consistency_macro) tc.push_back(*r->type_consistency_macro);
    }
    json c = {{"method", key.method},
              {"p_mask", key.p_mask ? json(*key.p_mask) : json(nullptr)},
              {"top_p", key.top_p ? json(*key.top_p) : json(nullptr)},
              {"n_seeds", members.size()},
              {"factuality_acc", ms_json(mean_sem(fact))},
              {"ent4", ms_json(mean_sem(ent))},
              {"dist2", ms_json(mean_sem(dist))},
              {"self_bleu4", ms_json(mean_sem(sb))}};
    c["type_consistency_macro"] = tc.empty() ? json(nullptr) : ms_json(mean_sem(tc));
    conditions.push_back(std::move(c));
  }
  return {{"entropy_log_base", "e"},
          {"bleu", "sentence-level, averaged per table"},
          {"sem", "sample standard deviation over seeds / sqrt(n); null for one seed"},
          {"conditions", conditions}};
}

std::string render_svg(const std::vector<SweepRow>& rows) {
  struct Point {
    std::string label;
    double x, y;
    double ex, ey;
  };
  std::map<std::string, std::vector<Point>> series;
  for (const auto& [key, members] : group_rows(rows)) {
    std::vector<double> xs, ys;
    for (const auto* r : members) {
      xs.push_back(r->ent4);
      ys.push_back(r->factuality_acc);
    }
    const auto mx = mean_sem(xs), my = mean_sem(ys);
    std::string label;
    if (key.top_p) label = "p=" + format_number(*key.top_p);
    else if (key.p_mask) label = "m=" + format_number(*key.p_mask);
    series[key.method].push_back(
        {label, mx.mean, my.mean, mx.sem.value_or(0.0), my.sem.value_or(0.0)});
  }
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& [m, pts] : series)
    for (const auto& p : pts) {
      x0 = std::min(x0, p.x - p.ex), x1 = std::max(x1, p.x + p.ex);
      y0 = std::min(y0, p.y - p.ey), y1 = std::max(y1, p.y + p.ey);
    }
  if (series.empty()) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const double padx = std::max(0.05, 0.08 * (x1 - x0)), pady = std::max(0.02, 0.08 * (y1 - y0));
  x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;

  const double W = 640, H = 480, L = 70, R = 160, T = 30, B = 60;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  auto f2 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  const std::map<std::string, std::string> colors = {
      {"baseline", "#e67e22"}, {"devtc", "#2471a3"}, {"devtc-empirical", "#229954"}};

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
  s += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  s += "<line x1=\"" + f2(L) + "\" y1=\"" + f2(H - B) + "\" x2=\"" + f2(W - R) + "\" y2=\"" +
       f2(H - B) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + f2(L) + "\" y1=\"" + f2(T) + "\" x2=\"" + f2(L) + "\" y2=\"" + f2(H - B) +
       "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    s += "<text x=\"" + f2(sx(xv)) + "\" y=\"" + f2(H - B + 18) +
         "\" font-size=\"11\" text-anchor=\"middle\">" + f2(xv) + "</text>\n";
    s += "<text x=\"" + f2(L - 6) + "\" y=\"" + f2(sy(yv) + 4) +
         "\" font-size=\"11\" text-anchor=\"end\">" + f2(yv) + "</text>\n";
  }
  s += "<text x=\"" + f2((L + W - R) / 2) + "\" y=\"" + f2(H - 15) +
       "\" font-size=\"13\" text-anchor=\"middle\">Ent-4 (nats)</text>\n";
  s += "<text x=\"18\" y=\"" + f2((T + H - B) / 2) + "\" font-size=\"13\" text-anchor=\"middle\" "
       "transform=\"rotate(-90 18 " + f2((T + H - B) / 2) + ")\">factuality accuracy</text>\n";

  int legend = 0;
  for (const auto& [method, pts] : series) {
    const auto it = colors.find(method);
    const std::string color = it == colors.end() ? "#7f8c8d" : it->second;
    if (pts.size() > 1) {
      s += "<polyline fill=\"none\" stroke=\"" + color + "\" points=\"";
      for (const auto& p : pts) s += f2(sx(p.x)) + "," + f2(sy(p.y)) + " ";
      s += "\"/>\n";
    }
    for (const auto& p : pts) {
      s += "<line x1=\"" + f2(sx(p.x - p.ex)) + "\" y1=\"" + f2(sy(p.y)) + "\" x2=\"" +
           f2(sx(p.x + p.ex)) + "\" y2=\"" + f2(sy(p.y)) + "\" stroke=\"" + color + "\"/>\n";
      s += "<line x1=\"" + f2(sx(p.x)) + "\" y1=\"" + f2(sy(p.y - p.ey)) + "\" x2=\"" +
           f2(sx(p.x)) + "\" y2=\"" + f2(sy(p.y + p.ey)) + "\" stroke=\"" + color + "\"/>\n";
      s += "<circle cx=\"" + f2(sx(p.x)) + "\" cy=\"" + f2(sy(p.y)) + "\" r=\"4\" fill=\"" +
           color + "\"/>\n";
      if (!p.label.empty())
        s += "<text x=\"" + f2(sx(p.x) + 6) + "\" y=\"" + f2(sy(p.y) - 6) +
             "\" font-size=\"9\" fill=\"" + color + "\">" + p.label + "</text>\n";
    }
    const double ly = T + 16.0 * legend++;
    s += "<circle cx=\"" + f2(W - R + 20) + "\" cy=\"" + f2(ly) + "\" r=\"4\" fill=\"" + color +
         "\"/>\n";
    s += "<text x=\"" + f2(W - R + 30) + "\" y=\"" + f2(ly + 4) + "\" font-size=\"12\">" +
         method + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void emit_results(const std::vector<SweepRow>& rows, const std::filesystem::path& out_dir) {
  if (rows.empty()) throw RangeError("emit_results: no rows");
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "sweep.csv", rows_to_csv(rows));
  write_file(out_dir / "summary.json", summarize(rows).dump(2) + "\n");
  write_file(out_dir / "tradeoff.svg", render_svg(rows));
}

// ------------------------------------------------------------ generations --

void save_generations(const std::vector<Generation>& gens, const std::filesystem::path& path) {
  std::string text;
  for (const auto& g : gens)
    text += json{{"table_id", g.table_id},
                 {"control", control_name(g.control)},
                 {"text", g.statement.text}}.dump() + "\n";
  write_file(path, text);
}

std::vector<Generation> load_generations(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Generation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      auto c = control_from_name(j.at("control").get<std::string>());
      if (!c) throw ParseError(lineno, "unknown control");
      out.push_back({j.at("table_id").get<std::string>(), *c,
                     Statement::from_text(j.at("text").get<std::string>())});
    } catch (const json::exception& e) {
      throw ParseError(lineno, path.string() + ": " + e.what());
    }
  }
  return out;
}

json consistency_to_json(const TypeConsistency& tc) {
  json per = json::object(), counts = json::object();
  for (const auto& [t, v] : tc.per_type) per[std::string(type_name(t))] = v;
  for (const auto& [t, v] : tc.counts) counts[std::string(type_name(t))] = v;
  json empty = json::array();
  for (LogicType t : tc.empty_types) empty.push_back(std::string(type_name(t)));
  return {{"per_type", per}, {"counts", counts}, {"macro", tc.macro},
          {"excluded_empty_types", empty}, {"unknown", tc.unknown}};
}

json report_to_json(const EvalReport& r) {
  auto opt_json = [](const std::optional<double>& x) { return x ? json(*x) : json(nullptr); };
  auto map_json = [](const std::map<int, double>& m) {
    json j = json::object();
    for (const auto& [n, v] : m) j[std::to_string(n)] = v;
    return j;
  };
  json reasons = json::object();
  for (const auto& [k, v] : r.failure_reasons) reasons[k] = v;
  return {{"bleu_1", opt_json(r.bleu_1)},
          {"bleu_2", opt_json(r.bleu_2)},
          {"bleu_3", opt_json(r.bleu_3)},
          {"factuality_acc", r.factuality_acc},
          {"type_consistency",
           r.type_consistency ? consistency_to_json(*r.type_consistency) : json(nullptr)},
          {"ent_n", map_json(r.ent_n)},
          {"dist_n", map_json(r.dist_n)},
          {"self_bleu_n", map_json(r.self_bleu_n)},
          {"set_size", r.set_size},
          {"sets", r.sets},
          {"statements", r.statements},
          {"parse_failures", r.parse_failures},
          {"parse_failure_reasons", reasons},
          {"entropy_log_base", "e"},
          {"bleu", "sentence-level, averaged per table"}};
}

EvalReport evaluate_generations(const std::vector<Generation>& gens,
                                const std::vector<CorpusRecord>& records,
                                const TypeClassifierFn* classify, int set_size) {
  std::unordered_map<std::string, const CorpusRecord*> by_id;
  for (const auto& rec : records) by_id.emplace(rec.table.id, &rec);
  std::vector<std::string> order;
  std::map<std::string, std::vector<const Generation*>> sets;
  for (const auto& g : gens) {
    if (!by_id.count(g.table_id)) throw ValidityError("generation for unknown table " + g.table_id);
    auto& v = sets[g.table_id];
    if (v.empty()) order.push_back(g.table_id);
    v.push_back(&g);
  }

  EvalReport r;
  r.set_size = set_size;
  r.sets = static_cast<int>(order.size());
  r.statements = static_cast<int>(gens.size());
  std::array<CompensatedSum, 3> bleu;
  bool have_refs = false;
  std::map<int, CompensatedSum> ent, dist, sb;
  long true_count = 0;
  bool all_controlled = true;
  std::vector<ConsistencyItem> items;
  for (const auto& id : order) {
    const CorpusRecord& rec = *by_id.at(id);
    std::vector<Statement> refs;
    for (const auto& ref : rec.references) refs.push_back(ref.statement);
    std::vector<Statement> stmts;
    std::array<CompensatedSum, 3> table_bleu;
    for (const auto* g : sets.at(id)) {
      stmts.push_back(g->statement);
      const auto parsed = parse_statement(g->statement.text, rec.table);
      if (const auto* f = std::get_if<LogicalForm>(&parsed)) {
        if (evaluate(*f, rec.table)) ++true_count;
      } else {
        ++r.parse_failures;
        ++r.failure_reasons[std::string(failure_name(std::get<ParseFailure>(parsed).reason))];
      }
      if (!refs.empty())
        for (int n = 1; n <= 3; ++n) table_bleu[n - 1].add(bleu_n(g->statement, refs, n));
      if (g->control.is_masked()) all_controlled = false;
      else items.push_back({*g->control.type, g->statement, &rec.table});
    }
    if (!refs.empty()) {
      have_refs = true;
      for (int n = 0; n < 3; ++n) bleu[n].add(table_bleu[n].value() / static_cast<double>(stmts.size()));
    }
    for (int n = 1; n <= 4; ++n) {
      ent[n].add(ngram_total(stmts, n) > 0 ? ent_n(stmts, n) : 0.0);
      dist[n].add(ngram_total(stmts, 1) > 0 ? dist_n(stmts, n) : 0.0);
      sb[n].add(stmts.size() >= 2 ? self_bleu_n(stmts, n) : 0.0);
    }
  }
  const double ns = static_cast<double>(std::max<std::size_t>(order.size(), 1));
  if (have_refs) {
    r.bleu_1 = bleu[0].value() / ns;
    r.bleu_2 = bleu[1].value() / ns;
    r.bleu_3 = bleu[2].value() / ns;
  }
  r.factuality_acc = gens.empty() ? 0.0 : static_cast<double>(true_count) / static_cast<double>(gens.size());
  for (int n = 1; n <= 4; ++n) {
    r.ent_n[n] = ent[n].value() / ns;
    r.dist_n[n] = dist[n].value() / ns;
    r.self_bleu_n[n] = sb[n].value() / ns;
  }
  if (classify && all_controlled && !items.empty()) r.type_consistency = type_consistency(items, *classify);
  return r;
}

}  // namespace typectl
