#include "factrl/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "factrl/config.hpp"
#include "factrl/corpus.hpp"
#include "factrl/eval.hpp"
#include "factrl/grpo.hpp"
#include "factrl/manifest.hpp"
#include "factrl/policy.hpp"
#include "factrl/rewards.hpp"
#include "factrl/text.hpp"

namespace fs = std::filesystem;

namespace factrl::cli {

namespace {

std::string read_stdin() {
  std::ostringstream buf;
  buf << std::cin.rdbuf();
  return buf.str();
}

config::RunSettings load_settings(const std::string& config_path) {
  if (config_path.empty()) return {};
  return config::settings_from_kv(config::parse_kv_file(config_path));
}

// Deterministic vocabulary: specials first, then the sorted unique tokens
// drawn from prompts and the gazetteer.
policy::Vocabulary build_vocabulary(std::span<const grpo::Prompt> prompts,
                                    const std::vector<rewards::GazetteerEntry>& gazetteer,
                                    const corpus::MarkerPair& markers) {
  std::set<std::string> pool;
  for (const auto& p : prompts) {
    for (const auto& t : p.tokens) pool.insert(t);
  }
  for (const auto& e : gazetteer) {
    for (const auto& a : e.aliases) {
      for (const auto& t : text::split_whitespace(a)) pool.insert(t);
    }
    for (const auto& t : e.required_context) pool.insert(t);
  }
  std::vector<std::string> tokens = {policy::kPadToken, policy::kEosToken, markers.begin,
                                     markers.end};
  for (const auto& t : pool) {
    if (std::find(tokens.begin(), tokens.end(), t) == tokens.end()) tokens.push_back(t);
  }
  return policy::Vocabulary(std::move(tokens));
}

int cmd_prepare(const std::string& input_dir, const std::string& out_dir, int k,
                const std::string& terminals_str) {
  auto terminals = terminals_str.empty() ? corpus::default_terminals()
                                         : corpus::terminals_from_string(terminals_str);
  fs::create_directories(out_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::ofstream seg_out(fs::path(out_dir) / "segments.jsonl");
  std::ofstream qa_out(fs::path(out_dir) / "qa.jsonl");
  std::ofstream cot_out(fs::path(out_dir) / "cot.jsonl");
  const corpus::MarkerPair markers;
  const auto classifier = corpus::lexicon_classifier(corpus::default_reasoning_cues());

  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    auto segments = corpus::segment(buf.str(), file.stem().string(), terminals);
    auto windows = corpus::build_windows(segments, k);
    for (auto& window : windows) {
      window.center.cls = corpus::classify(window, classifier);
      segments[static_cast<std::size_t>(window.center.id)].cls = window.center.cls;
      if (window.center.cls == corpus::SegmentClass::Factual) {
        qa_out << corpus::to_jsonl(corpus::build_qa(window)) << '\n';
      } else {
        auto cot = corpus::build_cot(window, markers);
        if (!corpus::validate_cot(cot, markers)) {
          throw std::runtime_error("synthesized CoT record failed validation");
        }
        cot_out << corpus::to_jsonl(cot) << '\n';
      }
    }
    for (const auto& seg : segments) seg_out << corpus::to_jsonl(seg) << '\n';
  }
  return 0;
}

int cmd_score(const std::string& gazetteer_path, const std::string& weights_path,
              const std::string& query_id) {
  auto gazetteer = rewards::load_gazetteer(gazetteer_path);
  auto settings = load_settings(weights_path);
  settings.weights.validate();
  auto tokens = text::split_whitespace(read_stdin());
  const corpus::MarkerPair markers;
  auto breakdown = rewards::final_reward(tokens, query_id, gazetteer, settings.weights, markers,
                                         rewards::default_coherence_scorer(markers));
  std::cout << rewards::to_jsonl(breakdown) << '\n';
  return 0;
}

int cmd_train(const config::RunSettings& settings, const std::string& config_path,
              const std::string& corpus_dir, const std::string& gazetteer_path,
              const std::string& out_dir) {
  settings.train.validate();
  settings.weights.validate();

  manifest::RunManifest mf;
  mf.started_at = manifest::iso8601_utc_now();
  mf.seed = settings.train.seed;
  mf.config_json = config::settings_to_json(settings);

  std::string prompts_path = (fs::path(corpus_dir) / "prompts.jsonl").string();
  auto prompts = grpo::load_prompts(prompts_path);
  auto gazetteer = rewards::load_gazetteer(gazetteer_path);
  if (!config_path.empty()) mf.input_digests[config_path] = manifest::digest_file(config_path);
  mf.input_digests[prompts_path] = manifest::digest_file(prompts_path);
  mf.input_digests[gazetteer_path] = manifest::digest_file(gazetteer_path);

  const corpus::MarkerPair markers;
  policy::PolicyParams init{build_vocabulary(prompts, gazetteer, markers)};

  fs::create_directories(out_dir);
  policy::save_checkpoint(init, (fs::path(out_dir) / "checkpoint_init.json").string());

  std::ofstream metrics_out(fs::path(out_dir) / "metrics.jsonl",
                            std::ios::binary | std::ios::trunc);
  auto result = grpo::train(settings.train, prompts, gazetteer, settings.weights, init,
                            [&](const eval::MetricsRecord& rec) {
                              metrics_out << eval::to_jsonl(rec) << '\n';
                            });
  metrics_out.close();
  policy::save_checkpoint(result.params, (fs::path(out_dir) / "checkpoint_final.json").string());

  mf.finished_at = manifest::iso8601_utc_now();
  manifest::write_atomic(mf, (fs::path(out_dir) / "manifest.json").string());
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& prompts_path,
             const std::string& gazetteer_path, const std::string& weights_path,
             std::uint64_t seed, int max_len, int samples) {
  auto params = policy::load_checkpoint(checkpoint_path);
  auto prompts = grpo::load_prompts(prompts_path);
  auto gazetteer = rewards::load_gazetteer(gazetteer_path);
  auto settings = load_settings(weights_path);
  settings.weights.validate();
  const corpus::MarkerPair markers;
  const auto scorer = rewards::default_coherence_scorer(markers);

  eval::MetricsRecord rec;
  std::vector<eval::ScoredOutput> scored;
  std::mt19937_64 rng(seed);
  std::size_t n = 0;
  for (const auto& prompt : prompts) {
    for (int s = 0; s < samples; ++s) {
      auto sampled = policy::sample_sequence(params, prompt.tokens, max_len, rng);
      auto b = rewards::final_reward(sampled.tokens, prompt.query_id, gazetteer,
                                     settings.weights, markers, scorer);
      rec.mean_r_final += b.r_final;
      rec.mean_r_ent += b.r_ent;
      rec.mean_r_log += b.r_log;
      rec.mean_r_fmt += b.r_fmt;
      rec.mean_r_rep += b.r_rep;
      rec.mean_repetition_ratio += rewards::repetition_ratio(sampled.tokens, settings.weights.n);
      scored.push_back({std::move(sampled.tokens), prompt.query_id});
      ++n;
    }
  }
  if (n == 0) throw std::runtime_error("no prompts to evaluate");
  const double dn = static_cast<double>(n);
  rec.mean_r_final /= dn;
  rec.mean_r_ent /= dn;
  rec.mean_r_log /= dn;
  rec.mean_r_fmt /= dn;
  rec.mean_r_rep /= dn;
  rec.mean_repetition_ratio /= dn;
  rec.format_compliance = rec.mean_r_fmt;
  rec.entity_precision = eval::entity_precision(scored, gazetteer);
  std::cout << eval::to_jsonl(rec) << '\n';
  return 0;
}

int cmd_judge_agg(const std::string& cards_path, double scale_min, double scale_max) {
  auto cards = eval::load_scorecards(cards_path);
  auto rows = eval::aggregate_scorecards(cards, scale_min, scale_max);
  for (const auto& row : rows) std::cout << eval::to_jsonl(row) << '\n';
  std::cout << eval::format_aggregate_table(rows);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"fact-aware GRPO trainer and corpus toolkit"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "segment, classify and emit corpus records");
  std::string prep_input, prep_out, prep_terminals;
  int prep_k = 2;
  prepare->add_option("--input", prep_input, "directory of UTF-8 .txt documents")->required();
  prepare->add_option("--out", prep_out, "output directory")->required();
  prepare->add_option("--k", prep_k, "context neighbors per side");
  prepare->add_option("--terminals", prep_terminals, "sentence-terminal characters");

  // score
  auto* score = app.add_subcommand("score", "score one output (tokens on stdin)");
  std::string score_gaz, score_weights, score_query;
  score->add_option("--gazetteer", score_gaz, "gazetteer JSONL file")->required();
  score->add_option("--weights", score_weights, "reward weight config file");
  score->add_option("--query-id", score_query, "query id the output answers")->required();

  // train
  auto* train = app.add_subcommand("train", "run GRPO training");
  std::string train_config, train_corpus, train_gaz, train_out;
  std::uint64_t train_seed = 0;
  int train_iters = 0, train_threads = 0;
  train->add_option("--config", train_config, "flat key-value config file");
  train->add_option("--corpus", train_corpus, "directory containing prompts.jsonl")->required();
  train->add_option("--gazetteer", train_gaz, "gazetteer JSONL file")->required();
  train->add_option("--out", train_out, "output directory")->required();
  auto* seed_opt = train->add_option("--seed", train_seed, "master RNG seed");
  auto* iters_opt = train->add_option("--iterations", train_iters, "training iterations");
  auto* threads_opt = train->add_option("--threads", train_threads, "worker pool cap (1 = serial)");

  // eval
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on prompts");
  std::string eval_ckpt, eval_prompts, eval_gaz, eval_weights;
  std::uint64_t eval_seed = 0;
  int eval_max_len = 32, eval_samples = 1;
  evalc->add_option("--checkpoint", eval_ckpt, "policy checkpoint file")->required();
  evalc->add_option("--prompts", eval_prompts, "prompts JSONL file")->required();
  evalc->add_option("--gazetteer", eval_gaz, "gazetteer JSONL file")->required();
  evalc->add_option("--weights", eval_weights, "reward weight config file");
  evalc->add_option("--seed", eval_seed, "sampling seed");
  evalc->add_option("--max-len", eval_max_len, "max generated tokens");
  evalc->add_option("--samples", eval_samples, "samples per prompt");

  // judge-agg
  auto* judge = app.add_subcommand("judge-agg", "aggregate external judge scorecards");
  std::string judge_cards;
  double judge_min = 0.0, judge_max = 10.0;
  judge->add_option("--cards", judge_cards, "scorecards JSONL file")->required();
  judge->add_option("--scale-min", judge_min, "score scale lower bound");
  judge->add_option("--scale-max", judge_max, "score scale upper bound");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*prepare) return cmd_prepare(prep_input, prep_out, prep_k, prep_terminals);
    if (*score) return cmd_score(score_gaz, score_weights, score_query);
    if (*train) {
      // Precedence: CLI flag > config file > built-in default. The config
      // path itself may come from the environment.
      std::string cfg = train_config;
      if (cfg.empty()) {
        if (const char* env = std::getenv("FACTRL_CONFIG")) cfg = env;
      }
      auto settings = load_settings(cfg);
      if (seed_opt->count()) settings.train.seed = train_seed;
      if (iters_opt->count()) settings.train.iterations = train_iters;
      if (threads_opt->count()) settings.train.threads = train_threads;
      return cmd_train(settings, cfg, train_corpus, train_gaz, train_out);
    }
    if (*evalc) {
      return cmd_eval(eval_ckpt, eval_prompts, eval_gaz, eval_weights, eval_seed, eval_max_len,
                      eval_samples);
    }
    if (*judge) return cmd_judge_agg(judge_cards, judge_min, judge_max);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::cerr << "error: unknown subcommand\n";
  return 2;
}

}  // namespace factrl::cli
