#pragma once

#include "fgcltp/core.hpp"
#include "fgcltp/io.hpp"
#include "fgcltp/pretrain.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fgcltp::eval {

/// Multinomial logistic regression on standardized features.
struct LogisticProbe {
  double l2 = 1e-4;
  double tol = 1e-6;
  int max_iter = 3000;

  Eigen::RowVectorXd mean, scale;
  MatrixXd weight;  // d x k
  Eigen::RowVectorXd bias;
  int classes = 0;

  void fit(const MatrixXd& x, const std::vector<int>& labels, int k);
  std::vector<int> predict(const MatrixXd& x) const;
};

/// One-hidden-layer classifier on standardized features, full-batch Adam from a fixed seed.
struct MlpProbe {
  int hidden = 64;
  int iterations = 500;
  double lr = 1e-2;
  double l2 = 1e-4;
  std::uint64_t seed = 0;

  Eigen::RowVectorXd mean, scale;
  MatrixXd w1, w2;
  Eigen::RowVectorXd b1, b2;
  int classes = 0;

  void fit(const MatrixXd& x, const std::vector<int>& labels, int k);
  std::vector<int> predict(const MatrixXd& x) const;
};

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Trains on (x_train, y_train) and reports accuracy on the validation split.
/// Throws when fewer than two classes occur in training.
double linear_probe(const MatrixXd& x_train, const std::vector<int>& y_train, const MatrixXd& x_val,
                    const std::vector<int>& y_val, int k);

/// Ridge regression with an unpenalized intercept.
struct Ridge {
  double lambda = 1e-3;
  MatrixXd weight;  // d x t
  Eigen::RowVectorXd intercept;

  void fit(const MatrixXd& x, const MatrixXd& y);
  MatrixXd predict(const MatrixXd& x) const;
};

struct RegressionMetrics {
  double mae = 0, rmse = 0, r2 = 0;
  std::size_t n = 0;
};

/// Metrics of per-sample errors e_i against the spread of the truth around its centre
/// (ss_tot = sum of squared deviations d_i).
RegressionMetrics metrics_from_errors(const VectorXd& errors, const VectorXd& deviations);

/// Plain metrics: errors = pred - truth, deviations = truth - mean(truth).
RegressionMetrics regression_metrics(const VectorXd& pred, const VectorXd& truth);

/// Angular metrics in degrees with the given period, errors scaled by `norm`.
RegressionMetrics angular_metrics(const VectorXd& pred_deg, const VectorXd& truth_deg, double period, double norm);

struct Retrieval {
  double top1 = 0, top5 = 0;
  std::size_t pool = 0;
};

/// For each row of `query`, ranks rows of `keys` by cosine similarity; hit iff the paired index
/// is within the first k.
Retrieval retrieval(const MatrixXd& query, const MatrixXd& keys);

struct EvalConfig {
  std::vector<double> depth_edges{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
  std::vector<double> area_edges{0.02, 0.05, 0.1, 0.2};
  int position_bins = 4;
  int slide_bins = 8;
  double ridge_lambda = 1e-3;
  double probe_l2 = 1e-4;
  int retrieval_pool = 256;
  int in_batch = 32;
  std::string probe = "linear";  // or "mlp"

  static EvalConfig from_json(const io::json& j);
  io::json to_json() const;
};

int bin_of(double v, const std::vector<double>& edges);

/// Class label for one task, or nullopt when the attribute is INVALID.
std::optional<int> task_label(const std::string& task, const ContactState& s, const EvalConfig& cfg);
inline const std::vector<std::string> kTasks = {"shape", "texture", "depth", "area", "position", "slide", "twist"};
int task_classes(const std::string& task, const EvalConfig& cfg);

struct ProbeReport {
  struct Classification {
    double accuracy = 0;
    int classes = 0;
    std::size_t n_train = 0, n_val = 0;
  };
  std::vector<std::pair<std::string, Classification>> classification;
  std::vector<std::pair<std::string, RegressionMetrics>> regression;  // present attributes only
  RegressionMetrics macro;
  Retrieval retrieval;
  double in_batch_text_to_tactile_top1 = 0;
  std::string probe = "linear";

  const Classification* task(const std::string& name) const;
  const RegressionMetrics* attribute(const std::string& name) const;
  io::json to_json() const;
};

/// Probes frozen tactile embeddings of `data` (train/validation split flags honoured).
ProbeReport evaluate(const nn::Model& model, const std::vector<pretrain::Prepared>& data,
                     const std::vector<ContactState>& states, const EvalConfig& cfg = {});

}  // namespace fgcltp::eval
