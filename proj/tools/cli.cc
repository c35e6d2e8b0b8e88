// Copyright 2026 The cflm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "cli.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cflm/align.h"
#include "cflm/asrsim.h"
#include "cflm/experiment.h"
#include "cflm/fusion.h"
#include "cflm/generator.h"
#include "cflm/nnlm.h"
#include "cflm/predictor.h"
#include "cflm/synth.h"
#include "manifest.h"

namespace cflm::cli {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string config;
  std::string out;
};

// Errors raised while a named stage runs.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& cause)
      : Error(stage + ": " + cause) {}
};

template <typename F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_jsonl(const fs::path& path, const std::vector<nlohmann::json>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

std::vector<nlohmann::json> epoch_log(const TrainResult& result) {
  std::vector<nlohmann::json> rows;
  for (const auto& e : result.epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"heldout", e.heldout}});
  }
  return rows;
}

Vocabulary vocabulary_of(const std::vector<std::vector<std::string>>& texts) {
  return build_vocabulary(texts, 1);
}

std::vector<std::vector<std::string>> words_of(
    const std::vector<TextRecord>& records) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : records) out.push_back(r.words);
  return out;
}

// Encodes text records, rejecting words missing from `vocab`.
std::vector<WordSequence> encode_strict(const std::vector<TextRecord>& records,
                                        const Vocabulary& vocab,
                                        const std::string& what) {
  std::vector<WordSequence> out;
  for (std::size_t k = 0; k < records.size(); ++k) {
    for (const auto& w : records[k].words) {
      if (!vocab.contains(w)) {
        throw Error(what + " line " + std::to_string(k + 1) +
                    ": out-of-vocabulary word '" + w + "'");
      }
    }
    out.push_back(encode(records[k], vocab));
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      grid.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error("bad beta grid entry '" + item + "'");
    }
  }
  return grid;
}

class Runner {
 public:
  Runner(const Globals& g, std::ostream& out, std::ostream& err)
      : g_(g), out_(out), err_(err) {}

  fs::path out_dir() const {
    if (g_.out.empty()) throw Error("--out is required");
    return fs::path(g_.out);
  }
  std::optional<nlohmann::json> config() const {
    if (g_.config.empty()) return std::nullopt;
    return stage("reading --config", [&] { return read_json(g_.config); });
  }
  std::uint64_t seed_for(std::string_view stream) const {
    return derive_seed(g_.seed, stream);
  }

  // Creates --out and starts the manifest for subcommand `cmd`.
  Manifest begin(const std::string& cmd, std::uint64_t seed) {
    fs::create_directories(out_dir());
    Manifest m(cmd, seed);
    if (!g_.config.empty()) m.add_input(g_.config);
    return m;
  }

  void finish(Manifest& m, const std::vector<std::string>& outputs) {
    stage("manifest", [&] {
      for (const auto& o : outputs) m.add_output(out_dir(), o);
      m.write(out_dir());
      return 0;
    });
    out_ << "wrote " << (out_dir() / "manifest.json").string() << '\n';
  }

  std::ostream& err() { return err_; }

 private:
  const Globals& g_;
  std::ostream& out_;
  std::ostream& err_;
};

// ---- make-channel ----

struct MakeChannelArgs {
  std::uint64_t shared_seed = 1;
  std::size_t sample = 0;
};

void make_channel(Runner& r, const MakeChannelArgs& a, const Globals& g) {
  SyntheticDomainConfig dc;
  const auto c = r.config();
  if (c) dc = SyntheticDomainConfig::from_json(*c);
  if (!c || !c->contains("seed")) dc.seed = r.seed_for("domain");
  Manifest m = r.begin("make-channel", g.seed);
  const SyntheticDomain domain =
      stage("build-domain", [&] { return SyntheticDomain(dc, a.shared_seed); });
  const Vocabulary vocab = Vocabulary::from_tokens(domain.words());
  const fs::path out = r.out_dir();
  stage("write-channel", [&] {
    vocab.save(out / "vocab.txt");
    const ChannelModel channel = ChannelModel::from_json(domain.channel_json(), vocab);
    write_json(out / "channel.json", channel.to_json(vocab));
    nlohmann::json info = {{"config", dc.to_json()},
                           {"shared_seed", a.shared_seed},
                           {"fallible", domain.fallible()},
                           {"shared_fallible", domain.shared_fallible()},
                           {"partners", domain.partners()}};
    write_json(out / "domain.json", info);
    return 0;
  });
  std::vector<std::string> outputs = {"vocab.txt", "channel.json", "domain.json"};
  if (a.sample > 0) {
    stage("sample", [&] {
      Rng rng(r.seed_for("sample"));
      std::vector<TextRecord> records;
      for (const auto& s : domain.sample(a.sample, rng)) {
        records.push_back({s, SourceTag::kReal});
      }
      write_text_jsonl(records, out / "text.jsonl");
      return 0;
    });
    outputs.push_back("text.jsonl");
  }
  r.finish(m, outputs);
}

// ---- corrupt ----

struct CorruptArgs {
  std::string ref, channel, vocab;
  int nbest = 0;
};

void corrupt_cmd(Runner& r, const CorruptArgs& a, const Globals& g) {
  Manifest m = r.begin("corrupt", g.seed);
  for (const auto& p : {a.ref, a.channel, a.vocab}) m.add_input(p);
  const Vocabulary vocab = stage("read-vocab", [&] { return Vocabulary::load(a.vocab); });
  const ChannelModel channel =
      stage("read-channel", [&] { return ChannelModel::load(a.channel, vocab); });
  const auto refs = stage("read-ref", [&] {
    return encode_strict(read_text_jsonl(a.ref), vocab, a.ref);
  });
  const fs::path out = r.out_dir();
  std::vector<std::string> outputs = {"hyp.jsonl"};
  stage("corrupt", [&] {
    Rng rng(r.seed_for("corrupt"));
    std::vector<WordSequence> hyps;
    for (const auto& ref : refs) hyps.push_back(corrupt(ref, channel, rng));
    std::vector<TextRecord> records;
    for (const auto& h : hyps) records.push_back({decode(h, vocab), h.tag});
    write_text_jsonl(records, out / "hyp.jsonl");
    if (a.nbest > 0) {
      std::vector<NBestList> lists;
      for (const auto& h : hyps) lists.push_back(decode_observation(h, channel, a.nbest));
      write_nbest_jsonl(lists, vocab, out / "nbest.jsonl");
    }
    return 0;
  });
  if (a.nbest > 0) outputs.push_back("nbest.jsonl");
  r.finish(m, outputs);
}

// ---- annotate ----

struct AnnotateArgs {
  std::string ref, hyp;
  bool no_deletions = false;
  bool no_insertions = false;
};

void annotate_cmd(Runner& r, const AnnotateArgs& a, const Globals& g) {
  Manifest m = r.begin("annotate", g.seed);
  m.add_input(a.ref);
  m.add_input(a.hyp);
  const auto refs = stage("read-ref", [&] { return read_text_jsonl(a.ref); });
  const auto hyps = stage("read-hyp", [&] { return read_text_jsonl(a.hyp); });
  if (refs.size() != hyps.size()) {
    throw StageError("annotate", std::to_string(refs.size()) + " references but " +
                                     std::to_string(hyps.size()) + " hypotheses");
  }
  auto all = words_of(refs);
  const auto hyp_words = words_of(hyps);
  all.insert(all.end(), hyp_words.begin(), hyp_words.end());
  const Vocabulary vocab = vocabulary_of(all);
  stage("annotate", [&] {
    std::vector<RefHypPair> pairs;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      pairs.push_back({encode(refs[k], vocab), encode(hyps[k], vocab)});
    }
    AnnotationFlags flags;
    flags.annotate_deletions = !a.no_deletions;
    flags.annotate_insertions = !a.no_insertions;
    write_annotated_jsonl(annotate_corpus(pairs, flags), vocab,
                          r.out_dir() / "annotated.jsonl");
    return 0;
  });
  r.finish(m, {"annotated.jsonl"});
}

// Vocabulary for training on annotated pairs: --vocab or the references.
Vocabulary training_vocab(const std::string& vocab_path, const std::string& data,
                          Manifest& m) {
  if (!vocab_path.empty()) {
    m.add_input(vocab_path);
    return stage("read-vocab", [&] { return Vocabulary::load(vocab_path); });
  }
  return stage("build-vocab", [&] {
    std::vector<std::vector<std::string>> words;
    std::ifstream in(data, std::ios::binary);
    if (!in) throw Error("cannot read " + data);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto obj = nlohmann::json::parse(line);
      words.push_back(split_words(obj.at(obj.contains("ref") ? "ref" : "text")
                                      .get<std::string>()));
    }
    return vocabulary_of(words);
  });
}

// ---- train-predictor / train-generator ----

struct TrainPairsArgs {
  std::string data, vocab;
};

void train_predictor_cmd(Runner& r, const TrainPairsArgs& a, const Globals& g) {
  Manifest m = r.begin("train-predictor", g.seed);
  m.add_input(a.data);
  PredictorConfig config;
  if (auto c = r.config()) config = PredictorConfig::from_json(*c);
  config.train.seed = r.seed_for("train-predictor");
  const Vocabulary vocab = training_vocab(a.vocab, a.data, m);
  const auto pairs = stage("read-data", [&] { return read_annotated_jsonl(a.data, vocab); });
  PredictorReport report;
  const PredictorModel model = stage("train-predictor", [&] {
    return train_predictor(pairs, vocab, config, &report);
  });
  for (const auto& w : report.warnings) r.err() << "warning: " << w << '\n';
  stage("save", [&] {
    model.save(r.out_dir() / "predictor");
    write_jsonl(r.out_dir() / "train_log.jsonl", epoch_log(report.training));
    return 0;
  });
  r.finish(m, {"predictor", "train_log.jsonl"});
}

void train_generator_cmd(Runner& r, const TrainPairsArgs& a, const Globals& g) {
  Manifest m = r.begin("train-generator", g.seed);
  m.add_input(a.data);
  GeneratorConfig config;
  if (auto c = r.config()) config = GeneratorConfig::from_json(*c);
  config.train.seed = r.seed_for("train-generator");
  const Vocabulary vocab = training_vocab(a.vocab, a.data, m);
  const auto pairs = stage("read-data", [&] { return read_annotated_jsonl(a.data, vocab); });
  GeneratorReport report;
  const GeneratorModel model = stage("train-generator", [&] {
    return train_generator(pairs, vocab, config, &report);
  });
  stage("save", [&] {
    model.save(r.out_dir() / "generator");
    auto log = epoch_log(report.training);
    for (std::size_t k = 0; k < log.size() && k < report.heldout_ppl.size(); ++k) {
      log[k]["heldout_lm_ppl"] = report.heldout_ppl[k];
    }
    write_jsonl(r.out_dir() / "train_log.jsonl", log);
    return 0;
  });
  r.finish(m, {"generator", "train_log.jsonl"});
}

// ---- score ----

struct ScoreArgs {
  std::string model, text;
};

void score_cmd(Runner& r, const ScoreArgs& a, const Globals& g) {
  Manifest m = r.begin("score", g.seed);
  m.add_input(a.model);
  m.add_input(a.text);
  const PredictorModel model =
      stage("load-predictor", [&] { return PredictorModel::load(a.model); });
  const Vocabulary& vocab = model.tokenizer().words();
  stage("score", [&] {
    std::vector<WordSequence> corpus;
    for (const auto& rec : read_text_jsonl(a.text)) corpus.push_back(encode(rec, vocab));
    write_scored_jsonl(score_corpus(model, corpus), vocab, r.out_dir() / "scored.jsonl");
    return 0;
  });
  r.finish(m, {"scored.jsonl"});
}

// ---- generate ----

struct GenerateArgs {
  std::string model;
  int count = -1;
  bool dedup = false;
  int min_len = 1;
  int max_len = -1;
};

void generate_cmd(Runner& r, const GenerateArgs& a, const Globals& g) {
  Manifest m = r.begin("generate", g.seed);
  m.add_input(a.model);
  GenerationConfig config;
  if (auto c = r.config()) config = GenerationConfig::from_json(*c);
  if (a.count >= 0) config.count = a.count;
  config.seed = r.seed_for("generate");
  const GeneratorModel model =
      stage("load-generator", [&] { return GeneratorModel::load(a.model); });
  stage("generate", [&] {
    const GenerationResult result = generate_scored(model, config);
    FilterReport filter;
    const auto kept = filter_generated(result.sequences, a.dedup, a.min_len,
                                       a.max_len < 0 ? config.max_len : a.max_len,
                                       &filter);
    write_scored_jsonl(kept, model.vocab(), r.out_dir() / "generated.jsonl");
    write_json(r.out_dir() / "generation_report.json",
               generation_report(config, result, kept, filter));
    return 0;
  });
  r.finish(m, {"generated.jsonl", "generation_report.json"});
}

// ---- train-lm ----

struct TrainLmArgs {
  std::vector<std::string> data;
  std::vector<std::string> text;
  std::vector<double> mix;
  std::string vocab;
  std::optional<double> alpha;
  std::string objective;
};

void train_lm_cmd(Runner& r, const TrainLmArgs& a, const Globals& g) {
  Manifest m = r.begin("train-lm", g.seed);
  if (a.data.empty() && a.text.empty()) {
    throw StageError("train-lm", "at least one --data or --text file is required");
  }
  const std::size_t sources = a.data.size() + a.text.size();
  if (!a.mix.empty() && a.mix.size() != sources) {
    throw StageError("train-lm", std::to_string(a.mix.size()) + " --mix weights for " +
                                     std::to_string(sources) + " sources");
  }
  NnlmConfig config;
  if (auto c = r.config()) config = NnlmConfig::from_json(*c);
  if (a.alpha) config.alpha = *a.alpha;
  if (!a.objective.empty()) config.objective = parse_objective(a.objective);
  config.train.seed = r.seed_for("train-lm");
  for (const auto& p : a.data) m.add_input(p);
  for (const auto& p : a.text) m.add_input(p);

  const Vocabulary vocab = stage("vocabulary", [&] {
    if (!a.vocab.empty()) {
      m.add_input(a.vocab);
      return Vocabulary::load(a.vocab);
    }
    std::vector<std::vector<std::string>> words;
    for (const auto& p : a.data) {
      std::ifstream in(p, std::ios::binary);
      if (!in) throw Error("cannot read " + p);
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) {
          words.push_back(split_words(nlohmann::json::parse(line).at("text").get<std::string>()));
        }
      }
    }
    for (const auto& p : a.text) {
      const auto w = words_of(read_text_jsonl(p));
      words.insert(words.end(), w.begin(), w.end());
    }
    return vocabulary_of(words);
  });
  std::vector<ScoredSource> corpora;
  stage("read-data", [&] {
    std::size_t k = 0;
    for (const auto& p : a.data) {
      corpora.push_back({read_scored_jsonl(p, vocab), a.mix.empty() ? 1.0 : a.mix[k]});
      ++k;
    }
    for (const auto& p : a.text) {
      std::vector<ScoredSequence> c;
      for (const auto& rec : read_text_jsonl(p)) c.push_back(unscored(encode(rec, vocab)));
      corpora.push_back({std::move(c), a.mix.empty() ? 1.0 : a.mix[k]});
      ++k;
    }
    return 0;
  });
  NnlmReport report;
  const NnlmModel model =
      stage("train-lm", [&] { return train_nnlm(corpora, vocab, config, &report); });
  stage("save", [&] {
    model.save(r.out_dir() / "lm");
    write_jsonl(r.out_dir() / "train_log.jsonl", report.log_records());
    return 0;
  });
  r.finish(m, {"lm", "train_log.jsonl"});
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string lm, nbest, ref, dev_nbest, dev_ref;
  std::optional<double> beta;
  std::string beta_grid = "0.1,0.2,0.5,1.0";
  bool length_normalize = false;
  std::optional<double> baseline_wer;
};

void evaluate_cmd(Runner& r, const EvaluateArgs& a, const Globals& g) {
  Manifest m = r.begin("evaluate", g.seed);
  for (const auto& p : {a.lm, a.nbest, a.ref}) m.add_input(p);
  const NnlmModel model = stage("load-lm", [&] { return NnlmModel::load(a.lm); });
  const Vocabulary& vocab = model.words();
  auto load_refs = [&](const std::string& p) {
    std::vector<WordSequence> refs;
    for (const auto& rec : read_text_jsonl(p)) refs.push_back(encode(rec, vocab));
    return refs;
  };
  FusionConfig fusion;
  fusion.length_normalize = a.length_normalize;
  nlohmann::json result;
  if (a.beta) {
    fusion.beta = *a.beta;
  } else {
    if (a.dev_nbest.empty() || a.dev_ref.empty()) {
      throw StageError("evaluate", "give --beta or both --dev-nbest and --dev-ref");
    }
    m.add_input(a.dev_nbest);
    m.add_input(a.dev_ref);
    const auto search = stage("tune-beta", [&] {
      const auto dev = score_nbest_lists(read_nbest_jsonl(a.dev_nbest, vocab), model);
      const auto grid = parse_grid(a.beta_grid);
      return tune_beta(dev, load_refs(a.dev_ref), grid, fusion);
    });
    fusion.beta = search.best_beta;
    result["beta_search"] = {{"grid", search.grid}, {"wer", search.wer}};
  }
  fusion.validate();
  stage("rescore", [&] {
    const auto refs = load_refs(a.ref);
    const auto scored = score_nbest_lists(read_nbest_jsonl(a.nbest, vocab), model);
    const auto chosen = rescore_all(scored, fusion);
    const WerReport wer = evaluate_wer(refs, chosen);
    result["beta"] = fusion.beta;
    result["length_normalize"] = fusion.length_normalize;
    result["wer"] = wer.to_json();
    result["ppl"] = perplexity(model, refs);
    if (a.baseline_wer) {
      result["baseline_wer"] = *a.baseline_wer;
      result["relative_reduction"] = relative_reduction(*a.baseline_wer, wer.wer);
    }
    std::vector<TextRecord> records;
    for (const auto& c : chosen) records.push_back({decode(c, vocab), c.tag});
    write_text_jsonl(records, r.out_dir() / "chosen.jsonl");
    write_json(r.out_dir() / "eval.json", result);
    return 0;
  });
  r.finish(m, {"eval.json", "chosen.jsonl"});
}

// ---- run-experiment ----

void run_experiment_cmd(Runner& r, const Globals& g) {
  const auto config = r.config();
  if (!config) throw StageError("run-experiment", "--config is required");
  ExperimentSpec spec = stage("parse-spec", [&] { return ExperimentSpec::from_json(*config); });
  if (g.seed_given) spec.seed = g.seed;
  Manifest m = r.begin("run-experiment", spec.seed);
  const ExperimentReport report = run_experiment(
      spec, [&](std::string_view s) { r.err() << "[stage] " << s << '\n'; });
  stage("write-report", [&] {
    write_json(r.out_dir() / "report.json", report.to_json());
    std::ofstream(r.out_dir() / "report.txt", std::ios::binary) << report.table();
    return 0;
  });
  r.finish(m, {"report.json", "report.txt"});
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"cflm: correction-focused language model training toolkit", "cflm"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Root seed for every random stream");
  app.add_option("--config", g.config, "JSON configuration for the subcommand");
  app.add_option("--out", g.out, "Output directory");

  MakeChannelArgs mc;
  auto* make_channel_app =
      app.add_subcommand("make-channel", "Build a synthetic domain and its ASR channel");
  make_channel_app->add_option("--shared-seed", mc.shared_seed,
                               "Seed of the hard-syllable pool shared across domains");
  make_channel_app->add_option("--sample", mc.sample, "Also sample N sentences");

  CorruptArgs cr;
  auto* corrupt_app = app.add_subcommand("corrupt", "Pass references through a channel");
  corrupt_app->add_option("--ref", cr.ref, "Reference text JSONL")->required();
  corrupt_app->add_option("--channel", cr.channel, "Channel JSON")->required();
  corrupt_app->add_option("--vocab", cr.vocab, "Vocabulary file")->required();
  corrupt_app->add_option("--nbest", cr.nbest, "Also decode n-best lists of this size");

  AnnotateArgs an;
  auto* annotate_app = app.add_subcommand("annotate", "Label reference words with ASR errors");
  annotate_app->add_option("--ref", an.ref, "Reference text JSONL")->required();
  annotate_app->add_option("--hyp", an.hyp, "Hypothesis text JSONL")->required();
  annotate_app->add_flag("--no-deletions", an.no_deletions, "Do not label deletions");
  annotate_app->add_flag("--no-insertions", an.no_insertions, "Do not label insertions");

  TrainPairsArgs tp;
  auto* train_predictor_app =
      app.add_subcommand("train-predictor", "Train the fallibility score predictor");
  train_predictor_app->add_option("--data", tp.data, "Annotated JSONL")->required();
  train_predictor_app->add_option("--vocab", tp.vocab, "Vocabulary file");

  TrainPairsArgs tg;
  auto* train_generator_app =
      app.add_subcommand("train-generator", "Train the multi-task text generator");
  train_generator_app->add_option("--data", tg.data, "Annotated JSONL")->required();
  train_generator_app->add_option("--vocab", tg.vocab, "Vocabulary file");

  ScoreArgs sc;
  auto* score_app = app.add_subcommand("score", "Predict fallibility scores for text");
  score_app->add_option("--model", sc.model, "Predictor directory")->required();
  score_app->add_option("--text", sc.text, "Text JSONL")->required();

  GenerateArgs ge;
  auto* generate_app = app.add_subcommand("generate", "Sample scored text from a generator");
  generate_app->add_option("--model", ge.model, "Generator directory")->required();
  generate_app->add_option("--count", ge.count, "Number of sequences");
  generate_app->add_flag("--dedup", ge.dedup, "Drop duplicate sequences");
  generate_app->add_option("--min-len", ge.min_len, "Minimum words kept");
  generate_app->add_option("--max-len", ge.max_len, "Maximum words kept");

  TrainLmArgs tl;
  double alpha = 0.0;
  auto* train_lm_app = app.add_subcommand("train-lm", "Train a (correction-focused) NNLM");
  train_lm_app->add_option("--data", tl.data, "Scored JSONL (repeatable)");
  train_lm_app->add_option("--text", tl.text, "Unscored text JSONL (repeatable)");
  train_lm_app->add_option("--mix", tl.mix, "Mix weight per source, --data first");
  train_lm_app->add_option("--vocab", tl.vocab, "Vocabulary file");
  auto* alpha_opt = train_lm_app->add_option("--alpha", alpha, "Focus temperature >= 1");
  train_lm_app->add_option("--objective", tl.objective,
                           "correction-focused or conventional");

  EvaluateArgs ev;
  double beta = 0.0, baseline = 0.0;
  auto* evaluate_app = app.add_subcommand("evaluate", "Fuse n-best lists with an NNLM and score WER");
  evaluate_app->add_option("--lm", ev.lm, "NNLM directory")->required();
  evaluate_app->add_option("--nbest", ev.nbest, "Test n-best JSONL")->required();
  evaluate_app->add_option("--ref", ev.ref, "Test reference text JSONL")->required();
  auto* beta_opt = evaluate_app->add_option("--beta", beta, "Fixed LM weight");
  evaluate_app->add_option("--dev-nbest", ev.dev_nbest, "Dev n-best JSONL for beta tuning");
  evaluate_app->add_option("--dev-ref", ev.dev_ref, "Dev references for beta tuning");
  evaluate_app->add_option("--beta-grid", ev.beta_grid, "Comma-separated beta grid");
  evaluate_app->add_flag("--length-normalize", ev.length_normalize,
                         "Divide LM scores by length + 1");
  auto* baseline_opt =
      evaluate_app->add_option("--baseline-wer", baseline, "Report relative reduction");

  auto* experiment_app =
      app.add_subcommand("run-experiment", "Run the full adaptation experiment from --config");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "cflm: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }
  g.seed_given = seed_opt->count() > 0;
  if (alpha_opt->count() > 0) tl.alpha = alpha;
  if (beta_opt->count() > 0) ev.beta = beta;
  if (baseline_opt->count() > 0) ev.baseline_wer = baseline;

  Runner runner(g, out, err);
  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (sub == make_channel_app) make_channel(runner, mc, g);
    if (sub == corrupt_app) corrupt_cmd(runner, cr, g);
    if (sub == annotate_app) annotate_cmd(runner, an, g);
    if (sub == train_predictor_app) train_predictor_cmd(runner, tp, g);
    if (sub == train_generator_app) train_generator_cmd(runner, tg, g);
    if (sub == score_app) score_cmd(runner, sc, g);
    if (sub == generate_app) generate_cmd(runner, ge, g);
    if (sub == train_lm_app) train_lm_cmd(runner, tl, g);
    if (sub == evaluate_app) evaluate_cmd(runner, ev, g);
    if (sub == experiment_app) run_experiment_cmd(runner, g);
  } catch (const std::exception& e) {
    err << "cflm " << name << ": error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace cflm::cli
