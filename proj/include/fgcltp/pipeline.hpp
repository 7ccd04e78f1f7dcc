#pragma once

#include "fgcltp/annotate.hpp"
#include "fgcltp/evaluation.hpp"
#include "fgcltp/flowpolicy.hpp"
#include "fgcltp/io.hpp"
#include "fgcltp/language.hpp"
#include "fgcltp/pretrain.hpp"
#include "fgcltp/synth.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fgcltp::pipeline {

namespace fs = std::filesystem;

/// Configuration schema violation; `field` is a dotted path such as "training.lr".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// A stage input is missing; `needed` names the stage that produces it.
class MissingArtifact : public std::runtime_error {
 public:
  MissingArtifact(const fs::path& path, std::string needed)
      : std::runtime_error("missing " + path.string() + "; run '" + needed + "' first"), needed_(std::move(needed)) {}
  const std::string& needed() const { return needed_; }

 private:
  std::string needed_;
};

class LockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeneratorSection {
  std::size_t n = 2000;
  synth::CorpusConfig corpus;
};

struct TokenizerSection {
  lang::Style style = lang::Style::kTokenized;
};

struct PolicySection {
  flow::PolicyTrainConfig train;
  int eval_episodes = 100;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  GeneratorSection generator;
  annotate::AnnotatorConfig annotator;
  TokenizerSection tokenizer;
  pretrain::TrainConfig training;
  eval::EvalConfig evaluation;
  PolicySection policy;

  /// Every field optional; unknown keys throw ConfigError naming the field.
  static PipelineConfig from_json(const io::json& j);
  static PipelineConfig load(const fs::path& path);
  /// Fully materialized document (defaults included).
  io::json to_json() const;
  /// Makes `seed` the seed of every stage.
  void apply_seed(std::uint64_t s);
};

/// Output layout under one directory.
struct Layout {
  fs::path root;

  fs::path corpus() const { return root / "corpus"; }
  fs::path labels() const { return corpus() / "labels.jsonl"; }
  fs::path annotations() const { return root / "annotations.jsonl"; }
  fs::path vocab() const { return root / "vocab.json"; }
  fs::path descriptions() const { return root / "descriptions.jsonl"; }
  fs::path checkpoint() const { return root / "model.ckpt"; }
  fs::path train_metrics() const { return root / "train_metrics.jsonl"; }
  fs::path report() const { return root / "eval_report.json"; }
  fs::path policy() const { return root / "policy.ckpt"; }
  fs::path policy_metrics() const { return root / "policy_train.json"; }
  fs::path policy_report() const { return root / "policy_eval.json"; }
  fs::path trajectories() const { return root / "trajectories.csv"; }
  fs::path manifest(const std::string& stage) const { return root / "manifests" / (stage + ".json"); }
  fs::path lock() const { return root / ".fgcltp.lock"; }
};

/// Exclusive ownership of an output directory for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

inline const std::vector<std::string> kStages = {"gen",   "annotate",     "tokenize",   "train",
                                                  "eval", "policy-train", "policy-eval"};

/// Parses "gen,annotate" (or "all"); preserves pipeline order.
std::vector<std::string> parse_stages(const std::string& list);

struct StageOutcome {
  std::string stage;
  bool skipped = false;
};

struct RunOptions {
  unsigned threads = 1;
  bool quiet = false;
  bool force = false;  // ignore manifests
};

// Individual stages. Each reads its inputs from explicit paths.
void run_gen(const GeneratorSection& g, std::uint64_t seed, const fs::path& out_dir, unsigned threads);
void run_annotate(const annotate::AnnotatorConfig& cfg, const fs::path& corpus_dir, const fs::path& labels,
                  const fs::path& out, unsigned threads);
void run_tokenize(const TokenizerSection& cfg, const fs::path& labels, const fs::path& out,
                  const fs::path& vocab_out);
pretrain::TrainResult run_train(const pretrain::TrainConfig& cfg, const fs::path& corpus_dir,
                                const fs::path& annotations, const std::optional<fs::path>& descriptions,
                                const fs::path& out_ckpt, const fs::path& metrics, bool quiet);
eval::ProbeReport run_eval(const eval::EvalConfig& cfg, lang::Style style, const fs::path& ckpt,
                           const fs::path& corpus_dir, const fs::path& annotations, const fs::path& report);
void run_policy_train(const PolicySection& cfg, const fs::path& encoder_ckpt, const fs::path& out,
                      const fs::path& metrics);
io::json run_policy_eval(const PolicySection& cfg, const fs::path& ckpt, const fs::path& report,
                         const std::optional<fs::path>& traj_out);

/// Runs the selected stages under `layout.root`, skipping stages whose manifest matches.
std::vector<StageOutcome> run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages,
                                       const Layout& layout, const RunOptions& opts = {});

}  // namespace fgcltp::pipeline
