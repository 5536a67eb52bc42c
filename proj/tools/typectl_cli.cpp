#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "typectl/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace typectl;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string config_path;
  std::string out;
};

ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config_path);
  if (!g.out.empty()) cfg.out_dir = g.out;
  cfg.validate();
  return cfg;
}

std::string hex(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

// Stage seeds, all derived from --seed.
std::uint64_t classifier_seed(std::uint64_t seed) { return derive_seed(seed, 0x636c66ULL); }
std::uint64_t generation_seed(std::uint64_t seed) { return derive_seed(seed, 0x67656eULL); }

void write_manifest(const std::string& command, const Globals& g, const ExperimentConfig& cfg,
                    json stages) {
  json m = {{"command", command},
            {"config_hash", hex(cfg.hash())},
            {"config", cfg.to_json()},
            {"seed", g.seed},
            {"stages", std::move(stages)}};
  write_file(fs::path(cfg.out_dir) / "manifest.json", m.dump(2) + "\n");
}

Splits corpus_from(const std::string& dir, const ExperimentConfig& cfg) {
  if (dir.empty()) return build_corpus(cfg.corpus);
  Splits s;
  s.train = load_corpus(fs::path(dir) / "train.jsonl");
  s.dev = load_corpus(fs::path(dir) / "dev.jsonl");
  s.test = load_corpus(fs::path(dir) / "test.jsonl");
  return s;
}

const std::vector<CorpusRecord>& pick_split(const Splits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "dev") return s.dev;
  if (name == "test") return s.test;
  throw ConfigError("unknown split " + name);
}

json train_log_json(const TrainLog& log) {
  return {{"initial_loss", log.initial_loss},
          {"epoch_loss", log.epoch_loss},
          {"masked_count", log.masked_count},
          {"examples", log.examples}};
}

void save_sweep(const SweepOutput& sweep, const ExperimentConfig& cfg) {
  const fs::path out(cfg.out_dir);
  for (std::size_t i = 0; i < sweep.rows.size(); ++i)
    save_generations(sweep.generations[i],
                     out / "generations" / (sweep.rows[i].condition_key() + ".jsonl"));
  emit_results(sweep.rows, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"typectl: type-controlled table-to-text experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Experiment seed")->capture_default_str();
  app.add_option("--config", g.config_path, "JSON experiment config");
  app.add_option("--out", g.out, "Output directory (overrides config out_dir)");

  std::string corpus_dir, model_path, classifier_path, generations_path, sweep_path;
  std::string split = "test", strategy = "greedy", types = "uniform";
  double p_mask = 0.5, top_p = 1.0;
  int k = 0;

  auto* gen_corpus = app.add_subcommand("gen-corpus", "Build the synthetic corpus and its splits");

  auto* train_cmd = app.add_subcommand("train", "Train a language model");
  train_cmd->add_option("--corpus", corpus_dir, "Corpus directory from gen-corpus");
  train_cmd->add_option("--p-mask", p_mask, "Control masking probability")->capture_default_str();

  auto* classify = app.add_subcommand("classify", "Train and evaluate the type classifier");
  classify->add_option("--corpus", corpus_dir, "Corpus directory from gen-corpus");

  auto* generate_cmd = app.add_subcommand("generate", "Generate statement sets");
  generate_cmd->add_option("--model", model_path, "Model checkpoint")->required();
  generate_cmd->add_option("--corpus", corpus_dir, "Corpus directory from gen-corpus");
  generate_cmd->add_option("--split", split, "train|dev|test")->capture_default_str();
  generate_cmd->add_option("--strategy", strategy, "greedy|nucleus")->capture_default_str();
  generate_cmd->add_option("--top-p", top_p, "Nucleus mass")->capture_default_str();
  generate_cmd->add_option("--types", types, "uniform|masked|<type>,<type>,...")
      ->capture_default_str();
  generate_cmd->add_option("-k", k, "Statements per table (default from config)");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a generation dump");
  evaluate_cmd->add_option("--generations", generations_path, "Generations JSONL")->required();
  evaluate_cmd->add_option("--corpus", corpus_dir, "Corpus directory from gen-corpus");
  evaluate_cmd->add_option("--split", split, "train|dev|test")->capture_default_str();
  evaluate_cmd->add_option("--classifier", classifier_path, "Classifier JSON for type consistency");

  auto* sweep_mask = app.add_subcommand("sweep-mask", "Train and score one model per p_mask and seed");
  sweep_mask->add_option("--corpus", corpus_dir, "Corpus directory from gen-corpus");

  auto* sweep_tradeoff =
      app.add_subcommand("sweep-tradeoff", "DevTC against the nucleus baseline, per seed");
  sweep_tradeoff->add_option("--corpus", corpus_dir, "Corpus directory from gen-corpus");

  auto* report = app.add_subcommand("report", "Rebuild summary.json and tradeoff.svg from a sweep CSV");
  report->add_option("--sweep", sweep_path, "sweep.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig cfg = load_config(g);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);

    if (*gen_corpus) {
      CorpusConfig cc = cfg.corpus;
      const Splits s = build_corpus(cc);
      save_corpus(s.train, out / "train.jsonl");
      save_corpus(s.dev, out / "dev.jsonl");
      save_corpus(s.test, out / "test.jsonl");
      write_manifest("gen-corpus", g, cfg,
                     {{"corpus_seed", cc.seed},
                      {"tables", {{"train", s.train.size()}, {"dev", s.dev.size()}, {"test", s.test.size()}}},
                      {"warnings", s.warnings}});
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
    } else if (*train_cmd) {
      const Splits s = corpus_from(corpus_dir, cfg);
      const TrainedModel m = train_model(s.train, cfg, p_mask, g.seed);
      save_checkpoint(m.params, m.vocab, out / "model.json");
      write_file(out / "train_log.json", train_log_json(m.log).dump(2) + "\n");
      write_manifest("train", g, cfg,
                     {{"p_mask", p_mask}, {"train_seed", g.seed},
                      {"params_checksum", hex(m.params.checksum())}});
      std::cout << "final epoch loss " << format_number(m.log.epoch_loss.back()) << "\n";
    } else if (*classify) {
      const Splits s = corpus_from(corpus_dir, cfg);
      const std::uint64_t cs = classifier_seed(g.seed);
      const ClassifierModel model = train_type_classifier(s.train, cfg, cs);
      save_classifier(model, out / "classifier.json");
      std::vector<LogicType> preds, golds;
      for (const auto& rec : s.test)
        for (const auto& ref : rec.references) {
          preds.push_back(predict_type(model, ref.statement).type);
          golds.push_back(ref.gold_type);
        }
      const double f1 = macro_f1(preds, golds);
      write_file(out / "classifier_eval.json",
                 json{{"split", "test"}, {"statements", golds.size()}, {"macro_f1", f1}}.dump(2) + "\n");
      write_manifest("classify", g, cfg, {{"classifier_seed", cs}});
      std::cout << "macro F1 " << format_number(f1) << "\n";
    } else if (*generate_cmd) {
      const Splits s = corpus_from(corpus_dir, cfg);
      const auto records = limit_tables(pick_split(s, split), cfg.max_test_tables);
      const Checkpoint ck = load_checkpoint(model_path);
      GenerationConfig gc;
      if (strategy == "greedy") gc.strategy = Strategy::kGreedy;
      else if (strategy == "nucleus") gc.strategy = Strategy::kNucleus;
      else throw ConfigError("unknown strategy " + strategy);
      gc.top_p = top_p;
      gc.temperature = cfg.temperature;
      gc.max_new_tokens = cfg.max_new_tokens;
      gc.validate();
      const int set_size = k > 0 ? k : cfg.k;
      TypeSource source;
      if (types == "uniform") {
        source = TypeSource::uniform();
      } else if (types == "masked") {
        source = TypeSource::masked();
      } else {
        std::vector<Control> controls;
        for (const auto& name : CLI::detail::split(types, ',')) {
          const auto c = control_from_name(name);
          if (!c) throw ConfigError("unknown type " + name);
          controls.push_back(*c);
        }
        source = TypeSource::fixed_list(std::move(controls));
      }
      const std::uint64_t gs = generation_seed(g.seed);
      std::vector<Generation> gens;
      for (const auto& rec : records)
        for (auto& item : generate_set(ck.params, rec.table, source, set_size, gc, ck.vocab,
                                       table_seed(gs, rec.table.id)))
          gens.push_back({rec.table.id, item.control, std::move(item.statement)});
      save_generations(gens, out / "generations.jsonl");
      write_manifest("generate", g, cfg,
                     {{"generation_seed", gs}, {"strategy", strategy}, {"top_p", top_p},
                      {"types", types}, {"k", set_size}, {"split", split},
                      {"params_checksum", hex(ck.params.checksum())}});
    } else if (*evaluate_cmd) {
      const Splits s = corpus_from(corpus_dir, cfg);
      const auto gens = load_generations(generations_path);
      std::optional<TypeClassifierFn> cls;
      if (!classifier_path.empty()) cls = learned_classifier(load_classifier(classifier_path));
      else if (cfg.classifier == "rule") cls = rule_classifier();
      const EvalReport r =
          evaluate_generations(gens, pick_split(s, split), cls ? &*cls : nullptr, cfg.k);
      write_file(out / "eval.json", report_to_json(r).dump(2) + "\n");
      write_manifest("evaluate", g, cfg, json::object());
    } else if (*sweep_mask) {
      const Splits s = corpus_from(corpus_dir, cfg);
      const std::uint64_t cs = classifier_seed(g.seed);
      const TypeClassifierFn cls = make_classifier(cfg, train_type_classifier(s.train, cfg, cs));
      save_sweep(run_mask_sweep(s, cfg, cls), cfg);
      write_manifest("sweep-mask", g, cfg, {{"classifier_seed", cs}, {"train_seeds", cfg.seeds}});
    } else if (*sweep_tradeoff) {
      const Splits s = corpus_from(corpus_dir, cfg);
      const auto test = limit_tables(s.test, cfg.max_test_tables);
      const std::uint64_t cs = classifier_seed(g.seed);
      const TypeClassifierFn cls = make_classifier(cfg, train_type_classifier(s.train, cfg, cs));
      SweepOutput all;
      for (std::uint64_t seed : cfg.seeds) {
        const TrainedModel devtc = train_model(s.train, cfg, 0.5, seed);
        const TrainedModel base = train_model(s.train, cfg, 1.0, seed);
        SweepOutput one = run_tradeoff(devtc, base, test, cfg, cls, seed);
        for (std::size_t i = 0; i < one.rows.size(); ++i) {
          all.rows.push_back(std::move(one.rows[i]));
          all.generations.push_back(std::move(one.generations[i]));
        }
      }
      save_sweep(all, cfg);
      write_manifest("sweep-tradeoff", g, cfg, {{"classifier_seed", cs}, {"train_seeds", cfg.seeds}});
    } else if (*report) {
      const auto rows = rows_from_csv(read_file(sweep_path));
      if (rows.empty()) throw ConfigError("sweep CSV has no rows");
      write_file(out / "summary.json", summarize(rows).dump(2) + "\n");
      write_file(out / "tradeoff.svg", render_svg(rows));
      write_manifest("report", g, cfg, {{"sweep", sweep_path}});
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
