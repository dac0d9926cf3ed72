// playseq: generate, train, predict, evaluate and bench next-artist
// predictors on play-sequence corpora.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.
// Human-readable messages go to stderr; stdout carries data only.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "playseq/playseq.hpp"

namespace {

using namespace playseq;
using Json = nlohmann::ordered_json;

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Options {
  std::string corpus;
  std::string output;
  std::string model_out;
  std::string train_model = "hmm";
  std::string predict_model = "mhmm";
  std::string hmm_model;
  std::string sim_cache;
  std::string predictions;
  std::string targets;
  std::string format = "text";
  std::string cf_variant = "pseudo";
  std::vector<std::string> models = all_model_names();

  std::size_t users = 0, length = 0, artists = 0, states = 5;
  std::uint64_t seed = 0;
  std::size_t n_states = 20, max_iters = 100;
  double tol = 1e-4, smoothing = 1e-6;
  std::size_t k_neighbors = 30;
  std::size_t n = 10;
  std::optional<std::size_t> n1, n2;
  std::size_t K = 10;
  double blend = 0.0;
  bool holdout = false;
  bool timings = false;
  std::size_t threads = 1;
};

void add_format(CLI::App* cmd, Options& o) {
  cmd->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
}

void add_training(CLI::App* cmd, Options& o) {
  cmd->add_option("--states", o.n_states, "Hidden states of the trained HMM")
      ->capture_default_str();
  cmd->add_option("--max-iters", o.max_iters, "Baum-Welch iteration cap")
      ->capture_default_str();
  cmd->add_option("--tol", o.tol, "Relative log-likelihood improvement to stop")
      ->capture_default_str();
  cmd->add_option("--smoothing", o.smoothing,
                  "Additive smoothing of expected counts")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads")
      ->capture_default_str();
}

void add_ranking(CLI::App* cmd, Options& o) {
  cmd->add_option("-k,--k", o.k_neighbors, "CF neighborhood size")
      ->capture_default_str();
  cmd->add_option("--n", o.n, "Candidates per user")->capture_default_str();
  cmd->add_option("--n1", o.n1, "HMM slots in the mixture (default 70% of n)");
  cmd->add_option("--n2", o.n2, "CF slots in the mixture (default n - n1)");
  cmd->add_option("--cf-variant", o.cf_variant,
                  "CF scorer inside the mixture: user, item, binary-pseudo, "
                  "pseudo")
      ->capture_default_str();
  cmd->add_option("--experimental-blend", o.blend,
                  "Blend corpus frequency into scores with this weight "
                  "(0 = tie-break only)")
      ->capture_default_str();
}

MixtureConfig resolve_mixture(const Options& o) {
  MixtureConfig m{o.n, 0, 0};
  if (o.n1 && o.n2) {
    m.n1 = *o.n1;
    m.n2 = *o.n2;
  } else if (o.n1) {
    m.n1 = *o.n1;
    m.n2 = o.n >= *o.n1 ? o.n - *o.n1 : 0;
  } else if (o.n2) {
    m.n2 = *o.n2;
    m.n1 = o.n >= *o.n2 ? o.n - *o.n2 : 0;
  } else {
    m.n1 = (o.n * 7 + 5) / 10;
    m.n2 = o.n - m.n1;
  }
  m.validate();
  return m;
}

BenchConfig bench_config(const Options& o) {
  BenchConfig c;
  c.seed = o.seed;
  c.n_states = o.n_states;
  c.em.max_iters = o.max_iters;
  c.em.tol = o.tol;
  c.em.smoothing = o.smoothing;
  c.em.threads = o.threads;
  c.k_neighbors = o.k_neighbors;
  c.mixture = resolve_mixture(o);
  c.K = o.K;
  c.mixture_cf = parse_cf_variant(o.cf_variant);
  c.blend = o.blend;
  c.models = o.models;
  c.record_timings = o.timings;
  c.threads = std::max<std::size_t>(1, o.threads);
  c.validate();
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw ArgumentError("failed writing " + path);
}

std::string default_model_path(const std::string& corpus_out) {
  std::filesystem::path p(corpus_out);
  p.replace_extension(".planted.json");
  return p.string();
}

int cmd_generate(const Options& o) {
  if (o.states > o.artists)
    std::cerr << "warning: " << o.states << " states exceed " << o.artists
              << " artists\n";
  const auto syn = generate_synthetic(o.users, o.length, o.artists, o.states,
                                      o.seed);
  const std::string model_path =
      o.model_out.empty() ? default_model_path(o.output) : o.model_out;
  write_csv(syn.corpus, o.output);
  save_model(syn.planted, model_path);
  if (o.format == "json") {
    Json j;
    j["command"] = "generate";
    j["config"] = {{"users", o.users},   {"length", o.length},
                   {"artists", o.artists}, {"states", o.states},
                   {"seed", o.seed}};
    j["corpus"] = o.output;
    j["planted_model"] = model_path;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << o.output << '\n' << model_path << '\n';
  }
  return 0;
}

Json training_config(const Options& o) {
  return {{"states", o.n_states}, {"max_iters", o.max_iters},
          {"tol", o.tol},         {"smoothing", o.smoothing},
          {"seed", o.seed}};
}

void check_training(const Options& o) {
  if (!(o.tol > 0.0)) throw ConfigError("--tol must be > 0");
  if (o.max_iters == 0) throw ConfigError("--max-iters must be >= 1");
  if (o.n_states == 0) throw ConfigError("--states must be >= 1");
  if (!(o.smoothing >= 0.0)) throw ConfigError("--smoothing must be >= 0");
}

TrainResult train_hmm(const Options& o, const Corpus& corpus) {
  check_training(o);
  return baum_welch(init_random(o.n_states, corpus.vocab_size(), o.seed),
                    corpus.sequences(),
                    {o.max_iters, o.tol, o.smoothing,
                     std::max<std::size_t>(1, o.threads)});
}

int cmd_train(const Options& o) {
  const Corpus corpus = load_csv(o.corpus);
  Json j;
  j["command"] = "train";
  j["model"] = o.train_model;
  j["corpus"] = o.corpus;
  if (o.train_model == "hmm") {
    const auto trained = train_hmm(o, corpus);
    save_model(trained.model, o.output);
    const auto& r = trained.report;
    if (o.format == "json") {
      j["config"] = training_config(o);
      j["iterations"] = r.iterations_run;
      j["final_log_likelihood"] = r.log_likelihood_trace.back();
      j["converged"] = r.converged;
      j["log_likelihood_trace"] = r.log_likelihood_trace;
      j["output"] = o.output;
      std::cout << j.dump(2) << '\n';
    } else {
      for (std::size_t i = 0; i < r.log_likelihood_trace.size(); ++i)
        std::cout << "iteration " << i << " log_likelihood "
                  << detail::format_real(r.log_likelihood_trace[i]) << '\n';
      std::cout << "iterations " << r.iterations_run << '\n'
                << "final_log_likelihood "
                << detail::format_real(r.log_likelihood_trace.back()) << '\n'
                << "converged " << (r.converged ? "true" : "false") << '\n';
    }
    return 0;
  }
  const bool binary = o.train_model == "cf-binary";
  RatingMatrix matrix = to_rating_matrix(corpus);
  if (binary) matrix = matrix.binarized();
  const auto sims = ItemSimilarity::build(matrix);
  save_similarity_cache(sims, content_hash(corpus), binary, o.output);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sims.items(); ++i) pairs += sims.row(i).size();
  if (o.format == "json") {
    j["items"] = sims.items();
    j["nonzero_similarities"] = pairs;
    j["output"] = o.output;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "items " << sims.items() << '\n'
              << "nonzero_similarities " << pairs << '\n';
  }
  return 0;
}

void use_similarity_cache(const Options& o, const Corpus& train,
                          Predictors& predictors) {
  if (o.sim_cache.empty()) return;
  const auto hash = content_hash(train);
  for (bool binary : {false, true}) {
    if (auto cached = load_similarity_cache(o.sim_cache, hash, binary)) {
      if (binary)
        predictors.set_binary_similarity(std::move(*cached));
      else
        predictors.set_count_similarity(std::move(*cached));
      return;
    }
  }
  std::cerr << "note: similarity cache " << o.sim_cache
            << " does not match this corpus; rebuilding it\n";
  save_similarity_cache(predictors.count_similarity(), hash, false,
                        o.sim_cache);
}

const std::map<std::string, std::string>& predictor_names() {
  static const std::map<std::string, std::string> names = {
      {"hf-corpus", "HF_corpus"}, {"hf-current", "HF_current"},
      {"cf-user", "CF_user"},     {"cf-item", "CF_item"},
      {"hmm", "HMM"},             {"mhmm", "MHMM"}};
  return names;
}

int cmd_predict(const Options& o) {
  const Corpus full = load_csv(o.corpus);
  std::optional<HoldoutSplit> split;
  if (o.holdout) split = split_holdout(full);
  const Corpus& train = split ? split->prefixes : full;

  Options effective = o;
  effective.models = {predictor_names().at(o.predict_model)};
  const BenchConfig config = bench_config(effective);
  Predictors predictors(train, config);
  use_similarity_cache(o, train, predictors);
  if (!o.hmm_model.empty() &&
      (o.predict_model == "hmm" || o.predict_model == "mhmm")) {
    HmmModel model = load_model(o.hmm_model);
    if (model.vocab_size() != train.vocab_size())
      throw ArgumentError("model has " + std::to_string(model.vocab_size()) +
                          " symbols but the corpus has " +
                          std::to_string(train.vocab_size()) + " artists");
    predictors.set_hmm({std::move(model), {}});
  }
  const auto ranks = predictors.rankings(effective.models.front());

  std::ostringstream out;
  for (std::size_t u = 0; u < ranks.size(); ++u) {
    out << u;
    for (ArtistId a : ranks[u].items) out << ',' << train.code_of(a);
    out << '\n';
  }
  if (o.output.empty())
    std::cout << out.str();
  else
    write_text(o.output, out.str());
  return 0;
}

// Predictions CSV: user row index followed by artist codes in rank order.
std::vector<Ranking> read_predictions(const std::string& path,
                                      const Corpus& corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open predictions file " + path);
  std::vector<std::optional<Ranking>> rows(corpus.users());
  std::string line;
  std::size_t line_no = 0;
  // Unknown codes get ids past the vocabulary so they can never match.
  std::map<ArtistCode, ArtistId> unknown;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    std::stringstream fields(line);
    std::string field;
    std::vector<std::uint64_t> values;
    std::size_t column = 0;
    while (std::getline(fields, field, ',')) {
      ++column;
      const auto f = detail::trim(field);
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError("\"" + std::string(f) + "\" is not an integer",
                         line_no, column);
      values.push_back(v);
    }
    const std::uint64_t user = values.front();
    if (user >= corpus.users())
      throw FormatError("user index " + std::to_string(user) +
                            " out of range",
                        line_no);
    Ranking r;
    for (std::size_t i = 1; i < values.size(); ++i) {
      auto id = corpus.id_of(values[i]);
      if (!id) {
        auto [it, _] = unknown.emplace(
            values[i],
            static_cast<ArtistId>(corpus.vocab_size() + unknown.size() + 1));
        id = it->second;
      }
      r.push(*id, 0.0);
    }
    rows[user] = std::move(r);
  }
  std::vector<Ranking> out;
  for (std::size_t u = 0; u < rows.size(); ++u) {
    if (!rows[u])
      throw FormatError("predictions file has no row for user " +
                        std::to_string(u));
    out.push_back(std::move(*rows[u]));
  }
  return out;
}

int cmd_evaluate(const Options& o) {
  const Corpus corpus = load_csv(o.corpus);
  std::vector<ArtistId> targets;
  if (o.targets.empty()) {
    for (const auto& seq : corpus.sequences()) targets.push_back(seq.back());
  } else {
    targets = read_targets(o.targets, corpus);
  }
  const auto ranks = read_predictions(o.predictions, corpus);
  const double score = map_at_k(targets, ranks, o.K);
  Json j;
  j["command"] = "evaluate";
  j["config"] = {{"corpus", o.corpus},
                 {"predictions", o.predictions},
                 {"targets", o.targets.empty() ? "last-column" : o.targets},
                 {"K", o.K}};
  j["n_users"] = corpus.users();
  j["map_at_k"] = score;
  if (!o.output.empty()) write_text(o.output, j.dump(2) + "\n");
  if (o.format == "json") {
    std::cout << j.dump(2) << '\n';
  } else {
    std::printf("MAP@%zu %.5f\n", o.K, score);
  }
  return 0;
}

int cmd_bench(const Options& o) {
  const Corpus corpus = load_csv(o.corpus);
  const BenchConfig config = bench_config(o);
  std::optional<std::vector<ArtistId>> targets;
  if (!o.targets.empty()) targets = read_targets(o.targets, corpus);
  const EvalReport report = bench_all(corpus, config, targets);
  const std::string json = report_to_json(report);
  if (!o.output.empty()) write_text(o.output, json);
  std::cout << (o.format == "json" ? json : report_to_text(report));
  return 0;
}

// Config-file keys outside any section apply to the subcommand being run,
// so `playseq bench --config run.toml` can hold plain `states = 5` lines.
class SubcommandConfig : public CLI::ConfigTOML {
 public:
  explicit SubcommandConfig(const CLI::App& app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    auto items = CLI::ConfigTOML::from_config(in);
    const auto selected = app_.get_subcommands();
    if (selected.empty()) return items;
    for (auto& item : items)
      if (item.parents.empty())
        item.parents.push_back(selected.front()->get_name());
    return items;
  }

 private:
  const CLI::App& app_;
};

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Next-artist prediction for music play sequences"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "TOML/INI file of option defaults");
  app.config_formatter(std::make_shared<SubcommandConfig>(app));

  auto* gen = app.add_subcommand("generate", "Sample a corpus from a random HMM");
  gen->add_option("--users", o.users, "Number of sequences")->required();
  gen->add_option("--length", o.length, "Sequence length")->required();
  gen->add_option("--artists", o.artists, "Vocabulary size")->required();
  gen->add_option("--states", o.states, "Hidden states of the planted model")
      ->capture_default_str();
  gen->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  gen->add_option("-o,--output", o.output, "Corpus CSV path")->required();
  gen->add_option("--model-out", o.model_out,
                  "Planted model path (default: <output>.planted.json)");
  add_format(gen, o);

  auto* train = app.add_subcommand("train", "Train an HMM or build CF similarities");
  train->add_option("--model", o.train_model, "hmm, cf-item or cf-binary")
      ->check(CLI::IsMember({"hmm", "cf-item", "cf-binary"}))
      ->capture_default_str();
  train->add_option("--corpus", o.corpus, "Corpus CSV")->required();
  train->add_option("-o,--output", o.output, "Model or cache path")->required();
  add_training(train, o);
  add_format(train, o);

  auto* predict = app.add_subcommand("predict", "Write top-n candidates per user");
  predict->add_option("--model", o.predict_model,
                      "hf-corpus, hf-current, cf-user, cf-item, hmm or mhmm")
      ->check(CLI::IsMember({"hf-corpus", "hf-current", "cf-user", "cf-item",
                             "hmm", "mhmm"}))
      ->capture_default_str();
  predict->add_option("--corpus", o.corpus, "Corpus CSV")->required();
  predict->add_option("--hmm-model", o.hmm_model,
                      "Trained model file (trained on the fly when absent)");
  predict->add_option("--sim-cache", o.sim_cache, "Item similarity cache file");
  predict->add_flag("--holdout", o.holdout,
                    "Drop each sequence's last item before predicting");
  predict->add_option("-o,--output", o.output, "Predictions CSV (default stdout)");
  add_training(predict, o);
  add_ranking(predict, o);

  auto* evaluate = app.add_subcommand("evaluate", "Score a predictions file");
  evaluate->add_option("--corpus", o.corpus, "Corpus CSV")->required();
  evaluate->add_option("--predictions", o.predictions, "Predictions CSV")
      ->required();
  evaluate->add_option("--targets", o.targets,
                       "One artist code per user (default: last column)");
  evaluate->add_option("--K", o.K, "Cutoff")->capture_default_str();
  evaluate->add_option("-o,--output", o.output, "JSON report path");
  add_format(evaluate, o);

  auto* bench = app.add_subcommand("bench", "Compare all predictors");
  bench->add_option("--corpus", o.corpus, "Corpus CSV")->required();
  bench->add_option("--targets", o.targets,
                    "External targets; models then train on full sequences");
  bench->add_option("--models", o.models, "Subset of models to run")
      ->capture_default_str();
  bench->add_option("--K", o.K, "MAP cutoff")->capture_default_str();
  bench->add_flag("--timings", o.timings, "Include wall-clock seconds in JSON");
  bench->add_option("-o,--output", o.output, "JSON report path");
  add_training(bench, o);
  add_ranking(bench, o);
  add_format(bench, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*train) return cmd_train(o);
    if (*predict) return cmd_predict(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*bench) return cmd_bench(o);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
