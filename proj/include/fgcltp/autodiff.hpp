#pragma once

#include "fgcltp/core.hpp"

#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fgcltp::ad {

class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Node {
  MatrixXd value;
  MatrixXd grad;  // allocated on first accumulation
  bool requires_grad = false;
  /// Optional per-row freeze flags for parameters; frozen rows never receive gradient.
  std::vector<std::uint8_t> frozen_rows;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const MatrixXd& g);
};

/// Handle to a node of the computation graph. Copies share the node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(MatrixXd value);
  static Tensor parameter(MatrixXd value);
  static Tensor scalar(double v) { return constant(MatrixXd::Constant(1, 1, v)); }

  const MatrixXd& value() const { return node_->value; }
  MatrixXd& mutable_value() { return node_->value; }
  const MatrixXd& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() > 0; }
  bool requires_grad() const { return node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  void set_frozen_rows(std::vector<std::uint8_t> frozen);
  const std::vector<std::uint8_t>& frozen_rows() const { return node_->frozen_rows; }
  bool row_frozen(Eigen::Index r) const;

  void zero_grad() { node_->grad.resize(0, 0); }

  /// Reverse accumulation from this 1x1 tensor into every reachable requires_grad leaf.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  bool defined() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Elementwise binary ops. `b` may match `a`, or be 1xC, Rx1 or 1x1 and broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_rows(const Tensor& a);  // R x C -> R x 1
Tensor sum_cols(const Tensor& a);  // R x C -> 1 x C

/// Column-wise max / mean over consecutive blocks of `block` rows: (B*block) x C -> B x C.
/// Max routes the gradient to the first maximizing row of each block.
Tensor block_max(const Tensor& a, Eigen::Index block);
Tensor block_mean(const Tensor& a, Eigen::Index block);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor diagonal(const Tensor& a);  // N x N -> N x 1

/// Row-wise x / sqrt(|x|^2 + eps). Rows with |x|^2 <= eps become the constant unit vector.
Tensor l2_normalize_rows(const Tensor& a, double eps = 1e-12);

/// Rows of `table` selected by `ids`; gradient scatters back, skipping frozen rows.
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

/// Result of comparing reverse-mode gradients against central differences.
struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

/// Checks d f / d p for every entry of every tensor in `params` with central differences of
/// step h. Relative error is |a - n| / max(|a|, |n|, 1e-3).
GradCheck gradient_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double h = 1e-5);

}  // namespace fgcltp::ad
