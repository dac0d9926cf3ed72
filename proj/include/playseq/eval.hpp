#pragma once

// Reciprocal-rank MAP@K, leave-last-out evaluation and the six-model
// comparison bench.
//
// The per-user term is 1 / (1-based rank of the true artist) when it is
// among the first K candidates and 0 otherwise, so "MAP@K" here is what the
// IR literature calls mean reciprocal rank at K.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "playseq/cf.hpp"
#include "playseq/corpus.hpp"
#include "playseq/errors.hpp"
#include "playseq/hmm.hpp"
#include "playseq/parallel.hpp"
#include "playseq/predict.hpp"

namespace playseq {

inline double ap_at_k(ArtistId target, std::span<const ArtistId> ranking) {
  std::vector<ArtistId> sorted(ranking.begin(), ranking.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ArgumentError("ap_at_k: ranking contains duplicate artists");
  for (std::size_t r = 0; r < ranking.size(); ++r)
    if (ranking[r] == target) return 1.0 / static_cast<double>(r + 1);
  return 0.0;
}

inline double ap_at_k(ArtistId target, const Ranking& ranking) {
  return ap_at_k(target, std::span<const ArtistId>(ranking.items));
}

// Mean over users of ap_at_k on the first K items of each ranking, summed
// in user order.
inline double map_at_k(std::span<const ArtistId> targets,
                       std::span<const Ranking> rankings, std::size_t K) {
  if (targets.size() != rankings.size())
    throw ArgumentError("map_at_k: " + std::to_string(targets.size()) +
                        " targets but " + std::to_string(rankings.size()) +
                        " rankings");
  if (targets.empty()) throw ArgumentError("map_at_k: no users");
  if (K == 0) throw ArgumentError("map_at_k: K must be >= 1");
  double sum = 0.0;
  for (std::size_t u = 0; u < targets.size(); ++u) {
    const auto& items = rankings[u].items;
    const std::size_t depth = std::min(K, items.size());
    sum += ap_at_k(targets[u], std::span<const ArtistId>(items.data(), depth));
  }
  return sum / static_cast<double>(targets.size());
}

enum class CfVariant { user, item, binary_pseudo, pseudo };

inline std::string to_string(CfVariant v) {
  switch (v) {
    case CfVariant::user: return "user";
    case CfVariant::item: return "item";
    case CfVariant::binary_pseudo: return "binary-pseudo";
    case CfVariant::pseudo: return "pseudo";
  }
  return "?";
}

inline CfVariant parse_cf_variant(const std::string& s) {
  for (auto v : {CfVariant::user, CfVariant::item, CfVariant::binary_pseudo,
                 CfVariant::pseudo})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown cf variant \"" + s +
                    "\" (expected user, item, binary-pseudo or pseudo)");
}

inline const std::vector<std::string>& all_model_names() {
  static const std::vector<std::string> names = {
      "HF_corpus", "HF_current", "CF_user", "CF_item", "HMM", "MHMM"};
  return names;
}

struct BenchConfig {
  std::uint64_t seed = 0;
  std::size_t n_states = 20;
  TrainOptions em;
  std::size_t k_neighbors = 30;
  MixtureConfig mixture;
  // Evaluation cutoff.
  std::size_t K = 10;
  // Scorer behind the CF half of the mixture.
  CfVariant mixture_cf = CfVariant::pseudo;
  // Experimental frequency blending weight; 0 keeps frequencies as pure
  // tie-breakers.
  double blend = 0.0;
  std::vector<std::string> models = all_model_names();
  // Include per-model wall-clock seconds in the JSON report. Off by default
  // so reports are byte-identical across reruns.
  bool record_timings = false;
  // Worker threads. Results do not depend on it, so it is not part of the
  // config snapshot.
  std::size_t threads = 1;

  void validate() const {
    mixture.validate();
    if (n_states == 0) throw ConfigError("n_states must be >= 1");
    if (em.max_iters == 0) throw ConfigError("max_iters must be >= 1");
    if (!(em.tol > 0.0)) throw ConfigError("tol must be > 0");
    if (!(em.smoothing >= 0.0)) throw ConfigError("smoothing must be >= 0");
    if (k_neighbors == 0) throw ConfigError("k must be >= 1");
    if (K == 0) throw ConfigError("K must be >= 1");
    if (!(blend >= 0.0)) throw ConfigError("blend must be >= 0");
    if (models.empty()) throw ConfigError("no models requested");
    for (const auto& m : models)
      if (std::find(all_model_names().begin(), all_model_names().end(), m) ==
          all_model_names().end())
        throw ConfigError("unknown model \"" + m + "\"");
  }
};

inline nlohmann::ordered_json config_snapshot(const BenchConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["n_states"] = c.n_states;
  j["max_iters"] = c.em.max_iters;
  j["tol"] = c.em.tol;
  j["smoothing"] = c.em.smoothing;
  j["k_neighbors"] = c.k_neighbors;
  j["n"] = c.mixture.n;
  j["n1"] = c.mixture.n1;
  j["n2"] = c.mixture.n2;
  j["K"] = c.K;
  j["mixture_cf"] = to_string(c.mixture_cf);
  j["blend"] = c.blend;
  j["models"] = c.models;
  return j;
}

struct ModelResult {
  std::string name;
  double map_at_k = 0.0;
  double seconds = 0.0;
};

struct EvalReport {
  std::vector<ModelResult> per_model;
  BenchConfig config;
  std::size_t K = 0;
  std::size_t n_users = 0;
  std::string protocol;
  std::optional<TrainReport> hmm_training;

  const ModelResult* find(const std::string& name) const {
    for (const auto& r : per_model)
      if (r.name == name) return &r;
    return nullptr;
  }
  double score(const std::string& name) const {
    const auto* r = find(name);
    if (!r) throw ArgumentError("model " + name + " not in report");
    return r->map_at_k;
  }
};

// Targets file: one external artist code per line, row-aligned with the
// corpus. Codes absent from the corpus map to vocab_size(), an id no ranking
// can contain.
inline std::vector<ArtistId> read_targets(std::istream& in,
                                          const Corpus& corpus) {
  std::vector<ArtistId> targets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto field = detail::trim(line);
    if (field.empty()) continue;
    ArtistCode code = 0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, code);
    if (ec != std::errc() || ptr != end)
      throw ParseError("\"" + std::string(field) +
                           "\" is not a non-negative integer",
                       line_no, 1);
    targets.push_back(
        corpus.id_of(code).value_or(static_cast<ArtistId>(corpus.vocab_size())));
  }
  if (targets.size() != corpus.users())
    throw FormatError("targets file has " + std::to_string(targets.size()) +
                      " entries for " + std::to_string(corpus.users()) +
                      " users");
  return targets;
}

inline std::vector<ArtistId> read_targets(const std::string& path,
                                          const Corpus& corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open targets file " + path);
  return read_targets(in, corpus);
}

// Per-user rankings for every predictor, built on a training corpus. All
// scorers are pure, so users are processed in parallel into fixed slots.
class Predictors {
 public:
  Predictors(const Corpus& train, const BenchConfig& config)
      : train_(train),
        config_(config),
        freqs_(artist_frequencies(train)),
        fallback_(hf_corpus(freqs_, config.mixture.n)) {}

  const FrequencyTable& freqs() const noexcept { return freqs_; }
  const Ranking& fallback() const noexcept { return fallback_; }

  std::vector<Ranking> hf_corpus_rankings() const {
    return std::vector<Ranking>(train_.users(), fallback_);
  }

  std::vector<Ranking> hf_current_rankings() const {
    return per_user([&](std::size_t u) {
      return hf_current(train_.sequence(u), config_.mixture.n, freqs_);
    });
  }

  std::vector<Ranking> cf_rankings(CfVariant variant, std::size_t n) {
    const RatingMatrix& m = variant == CfVariant::binary_pseudo
                                ? binary_matrix()
                                : count_matrix();
    const ItemSimilarity* sims = nullptr;
    if (variant == CfVariant::item || variant == CfVariant::pseudo)
      sims = &count_similarity();
    else if (variant == CfVariant::binary_pseudo)
      sims = &binary_similarity();
    const std::size_t k = config_.k_neighbors;
    return per_user([&, sims](std::size_t u) {
      ScoreVector s;
      switch (variant) {
        case CfVariant::user: s = user_cf_scores(m, u, k); break;
        case CfVariant::item: s = item_cf_scores(m, *sims, u, k); break;
        case CfVariant::binary_pseudo:
        case CfVariant::pseudo: s = pseudo_scores(m, *sims, u, k); break;
      }
      blend_frequency(s.scores, freqs_, config_.blend);
      Ranking r = top_n(s, n, freqs_);
      backfill(r, fallback_, n);
      return r;
    });
  }

  const TrainResult& hmm() {
    if (!hmm_) {
      TrainOptions options = config_.em;
      options.threads = config_.threads;
      hmm_ = baum_welch(
          init_random(config_.n_states, train_.vocab_size(), config_.seed),
          train_.sequences(), options);
    }
    return *hmm_;
  }

  std::vector<Ranking> hmm_rankings(std::size_t n) {
    const HmmModel& model = hmm().model;
    return per_user([&](std::size_t u) {
      auto p = next_symbol_distribution(model, train_.sequence(u));
      blend_frequency(p, freqs_, config_.blend);
      Ranking r = top_n(p, n, freqs_);
      backfill(r, fallback_, n);
      return r;
    });
  }

  std::vector<Ranking> mhmm_rankings() {
    const auto& mix = config_.mixture;
    const auto hmm_side = hmm_rankings(mix.n);
    const auto cf_side = cf_rankings(config_.mixture_cf, mix.n);
    return per_user([&](std::size_t u) {
      return mhmm_predict(hmm_side[u], cf_side[u], mix, fallback_);
    });
  }

  std::vector<Ranking> rankings(const std::string& model) {
    const std::size_t n = config_.mixture.n;
    if (model == "HF_corpus") return hf_corpus_rankings();
    if (model == "HF_current") return hf_current_rankings();
    if (model == "CF_user") return cf_rankings(CfVariant::user, n);
    if (model == "CF_item") return cf_rankings(CfVariant::item, n);
    if (model == "HMM") return hmm_rankings(n);
    if (model == "MHMM") return mhmm_rankings();
    throw ConfigError("unknown model \"" + model + "\"");
  }

  void set_count_similarity(ItemSimilarity sims) {
    count_sims_ = std::move(sims);
  }
  void set_binary_similarity(ItemSimilarity sims) {
    binary_sims_ = std::move(sims);
  }
  void set_hmm(TrainResult trained) { hmm_ = std::move(trained); }

  const RatingMatrix& count_matrix() {
    if (!counts_) counts_ = to_rating_matrix(train_);
    return *counts_;
  }
  const RatingMatrix& binary_matrix() {
    if (!binary_) binary_ = count_matrix().binarized();
    return *binary_;
  }
  const ItemSimilarity& count_similarity() {
    if (!count_sims_) count_sims_ = ItemSimilarity::build(count_matrix());
    return *count_sims_;
  }
  const ItemSimilarity& binary_similarity() {
    if (!binary_sims_) binary_sims_ = ItemSimilarity::build(binary_matrix());
    return *binary_sims_;
  }

 private:
  template <typename F>
  std::vector<Ranking> per_user(F&& rank_user) const {
    std::vector<Ranking> out(train_.users());
    parallel_for(train_.users(), config_.threads,
                 [&](std::size_t u) { out[u] = rank_user(u); });
    return out;
  }

  const Corpus& train_;
  const BenchConfig& config_;
  FrequencyTable freqs_;
  Ranking fallback_;
  std::optional<RatingMatrix> counts_;
  std::optional<RatingMatrix> binary_;
  std::optional<ItemSimilarity> count_sims_;
  std::optional<ItemSimilarity> binary_sims_;
  std::optional<TrainResult> hmm_;
};

namespace detail {

[[noreturn]] inline void rethrow_for_model(const std::string& model) {
  try {
    throw;
  } catch (const NumericError& e) {
    throw NumericError("model " + model + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError("model " + model + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error("model " + model + ": " + e.what());
  }
}

}  // namespace detail

// Trains every requested model and scores it with MAP@K. Without external
// targets the last item of each sequence is held out and models see only
// the prefixes; with targets (one per user) models train on the full
// sequences and rank candidates for the item after them.
inline EvalReport bench_all(
    const Corpus& corpus, const BenchConfig& config,
    const std::optional<std::vector<ArtistId>>& targets = std::nullopt) {
  config.validate();
  std::optional<HoldoutSplit> split;
  const Corpus* train = &corpus;
  std::span<const ArtistId> truth;
  if (targets) {
    if (targets->size() != corpus.users())
      throw ArgumentError("bench_all: one target per user required");
    truth = *targets;
  } else {
    split = split_holdout(corpus);
    train = &split->prefixes;
    truth = split->targets;
  }

  EvalReport report;
  report.config = config;
  report.K = config.K;
  report.n_users = corpus.users();
  report.protocol = targets ? "external-targets" : "leave-last-out";

  Predictors predictors(*train, config);
  for (const auto& name : config.models) {
    const auto start = std::chrono::steady_clock::now();
    double score = 0.0;
    try {
      const auto ranks = predictors.rankings(name);
      score = map_at_k(truth, ranks, config.K);
    } catch (...) {
      detail::rethrow_for_model(name);
    }
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - start;
    report.per_model.push_back({name, score, elapsed.count()});
    if ((name == "HMM" || name == "MHMM") && !report.hmm_training)
      report.hmm_training = predictors.hmm().report;
  }
  return report;
}

inline std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["protocol"] = report.protocol;
  j["K"] = report.K;
  j["n_users"] = report.n_users;
  j["config"] = config_snapshot(report.config);
  auto& results = j["results"] = nlohmann::ordered_json::array();
  for (const auto& r : report.per_model) {
    nlohmann::ordered_json row;
    row["model"] = r.name;
    row["map_at_k"] = r.map_at_k;
    if (report.config.record_timings) row["seconds"] = r.seconds;
    results.push_back(std::move(row));
  }
  if (report.hmm_training) {
    const auto& t = *report.hmm_training;
    nlohmann::ordered_json h;
    h["iterations"] = t.iterations_run;
    h["converged"] = t.converged;
    h["final_log_likelihood"] = t.log_likelihood_trace.back();
    j["hmm_training"] = std::move(h);
  }
  return j.dump(2) + "\n";
}

// Two-column table in the layout of the published comparison, with the
// wall-clock seconds of each model appended.
inline std::string report_to_text(const EvalReport& report) {
  const std::string metric = "MAP@" + std::to_string(report.K);
  std::size_t width = 5;
  for (const auto& r : report.per_model) width = std::max(width, r.name.size());
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s\n", static_cast<int>(width),
                "Model", metric.c_str(), "seconds");
  os << buf;
  os << std::string(width, '-') << "  " << std::string(9, '-') << "  "
     << std::string(9, '-') << '\n';
  for (const auto& r : report.per_model) {
    std::snprintf(buf, sizeof buf, "%-*s  %9.5f  %9.3f\n",
                  static_cast<int>(width), r.name.c_str(), r.map_at_k,
                  r.seconds);
    os << buf;
  }
  return os.str();
}

}  // namespace playseq
