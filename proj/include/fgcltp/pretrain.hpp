#pragma once

#include "fgcltp/autodiff.hpp"
#include "fgcltp/io.hpp"
#include "fgcltp/language.hpp"
#include "fgcltp/nn.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fgcltp::pretrain {

using ad::Tensor;

class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LossWeights {
  double tl = 1.0, ti = 1.0, li = 1.0;

  /// Non-negative weights with at least one positive.
  void validate() const;
};

/// L_{A->B} = -(1/2) sum_i log softmax_j(f_Ai . f_Bj / tau)_i, or divided by N instead of 2
/// with `mean_reduction`. Rows must be unit norm within 1e-4.
Tensor infonce(const Tensor& f_a, const Tensor& f_b, const Tensor& log_tau, bool mean_reduction = false);

Tensor align_loss(const Tensor& f_t, const Tensor& f_l, const Tensor& f_i, const Tensor& log_tau,
                  const LossWeights& w, bool mean_reduction = false);

/// Per-sample mean squared error over valid channels, averaged over the batch.
Tensor regression_loss(const Tensor& y_hat, const MatrixXd& y, const MatrixXd& mask);

inline Tensor total_loss(const Tensor& align, const Tensor& regression) { return ad::add(align, regression); }

/// One annotated observation, the unit every learning stage consumes.
struct Example {
  std::string id;
  MarkerFrame frame;
  ContactState state;
};

/// Loads <id>.fgt frames for every record of a labels/annotations JSONL file.
std::vector<Example> load_examples(const std::filesystem::path& corpus_dir, const std::filesystem::path& labels);

struct Prepared {
  std::string id;
  NormalizedSample sample;
  Eigen::RowVectorXd depth_map;
  std::array<lang::TokenSequence, lang::kNumVariants> tokens;
  bool validation = false;
};

/// Held out iff fnv1a(id) % 10 == 0, giving a 9:1 split independent of file order.
bool is_validation(const std::string& id);

std::vector<Prepared> prepare(const std::vector<Example>& examples, lang::Style style,
                              const lang::Vocabulary& vocab = lang::Vocabulary::standard());

/// Description variant used wherever a single fixed caption per sample is needed.
int fixed_variant(const std::string& id);

struct TrainConfig {
  int epochs = 30;
  int batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  LossWeights weights;
  bool mean_reduction = false;
  lang::Style style = lang::Style::kTokenized;
  int eval_batch = 32;
  bool regression = true;

  void validate() const;
  static TrainConfig from_json(const io::json& j);
  io::json to_json() const;
};

struct EpochMetrics {
  int epoch = 0;
  double lr = 0, tau = 0;
  double train_align = 0, train_regression = 0;
  double val_align = 0, val_regression = 0, val_total = 0;
  double val_text_to_tactile_top1 = 0;

  io::json to_json() const;
};

struct Embeddings {
  MatrixXd tactile, text, image;  // N x 64 each
  MatrixXd regression;            // N x 8
};

/// Forward pass in chunks. Text uses `variant`, or fixed_variant(id) when negative.
Embeddings embed(const nn::Model& model, const std::vector<const Prepared*>& items, int variant = -1,
                 int chunk = 64);

/// Fraction of rows i whose top cosine match in `b` is row i, over consecutive full batches of
/// `batch` rows (a single short batch when fewer rows exist).
double in_batch_top1(const MatrixXd& a, const MatrixXd& b, int batch);

struct TrainResult {
  nn::Model model;  // best-validation parameters
  std::vector<EpochMetrics> history;
  int best_epoch = 0;
  double best_top1 = -1;
  MatrixXd initial_table;  // text embedding table at step 0
};

struct TrainOutputs {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> metrics;  // JSONL, one line per epoch
  bool quiet = true;
};

TrainResult train(const std::vector<Prepared>& data, const TrainConfig& config,
                  const lang::Vocabulary& vocab = lang::Vocabulary::standard(), const TrainOutputs& out = {});

/// Loads a model saved by train(); the vocabulary hash must match.
nn::Model load_model(const std::filesystem::path& ckpt, const lang::Vocabulary& vocab = lang::Vocabulary::standard());

}  // namespace fgcltp::pretrain
