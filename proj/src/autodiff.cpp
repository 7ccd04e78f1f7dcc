#include "fgcltp/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace fgcltp::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

std::string shape_str(const MatrixXd& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw StructuralError(std::string(op) + ": incompatible shapes " + shape_str(a.value()) + " and " +
                        shape_str(b.value()));
}

Tensor make(MatrixXd value, std::vector<NodePtr> parents, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

enum class Broadcast { kSame, kRow, kCol, kScalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
  shape_error(op, a, b);
}

MatrixXd expand(const MatrixXd& b, Broadcast k, Eigen::Index rows, Eigen::Index cols) {
  switch (k) {
    case Broadcast::kSame: return b;
    case Broadcast::kRow: return b.replicate(rows, 1);
    case Broadcast::kCol: return b.replicate(1, cols);
    case Broadcast::kScalar: return MatrixXd::Constant(rows, cols, b(0, 0));
  }
  return b;
}

MatrixXd reduce(const MatrixXd& g, Broadcast k) {
  switch (k) {
    case Broadcast::kSame: return g;
    case Broadcast::kRow: return g.colwise().sum();
    case Broadcast::kCol: return g.rowwise().sum();
    case Broadcast::kScalar: return MatrixXd::Constant(1, 1, g.sum());
  }
  return g;
}

template <typename F>
Tensor unary(const Tensor& a, MatrixXd value, F local_grad) {
  const NodePtr pa = a.node();
  return make(std::move(value), {pa}, [pa, local_grad](Node& self) {
    if (pa->requires_grad) pa->accumulate(local_grad(self));
  });
}

}  // namespace

void Node::accumulate(const MatrixXd& g) {
  if (grad.size() == 0) {
    grad = MatrixXd::Zero(value.rows(), value.cols());
  }
  if (frozen_rows.empty()) {
    grad += g;
    return;
  }
  for (Eigen::Index r = 0; r < grad.rows(); ++r) {
    if (!frozen_rows[static_cast<std::size_t>(r)]) grad.row(r) += g.row(r);
  }
}

Tensor Tensor::constant(MatrixXd value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(MatrixXd value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Tensor(std::move(n));
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw UsageError("item() needs a 1x1 tensor, got " + shape_str(value()));
  return value()(0, 0);
}

void Tensor::set_frozen_rows(std::vector<std::uint8_t> frozen) {
  if (static_cast<Eigen::Index>(frozen.size()) != rows()) {
    throw StructuralError("frozen row flags must match the row count");
  }
  node_->frozen_rows = std::move(frozen);
}

bool Tensor::row_frozen(Eigen::Index r) const {
  return !node_->frozen_rows.empty() && node_->frozen_rows[static_cast<std::size_t>(r)] != 0;
}

void Tensor::backward() const {
  if (rows() != 1 || cols() != 1) throw UsageError("backward() needs a scalar output, got " + shape_str(value()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order without recursion limits.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior gradients are transient; leaves keep accumulating across calls.
  for (Node* n : order) {
    if (n->backward) n->grad.resize(0, 0);
  }
  node_->accumulate(MatrixXd::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const NodePtr pa = a.node(), pb = b.node();
  return make(a.value() * b.value(), {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad * pb->value.transpose());
    if (pb->requires_grad) pb->accumulate(pa->value.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& a) {
  return unary(a, a.value().transpose(), [](const Node& self) -> MatrixXd { return self.grad.transpose(); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast k = broadcast_kind("add", a, b);
  const NodePtr pa = a.node(), pb = b.node();
  return make(a.value() + expand(b.value(), k, a.rows(), a.cols()), {pa, pb}, [pa, pb, k](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad);
    if (pb->requires_grad) pb->accumulate(reduce(self.grad, k));
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast k = broadcast_kind("sub", a, b);
  const NodePtr pa = a.node(), pb = b.node();
  return make(a.value() - expand(b.value(), k, a.rows(), a.cols()), {pa, pb}, [pa, pb, k](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad);
    if (pb->requires_grad) pb->accumulate(-reduce(self.grad, k));
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast k = broadcast_kind("mul", a, b);
  const NodePtr pa = a.node(), pb = b.node();
  MatrixXd bx = expand(b.value(), k, a.rows(), a.cols());
  MatrixXd value = a.value().cwiseProduct(bx);
  return make(std::move(value), {pa, pb}, [pa, pb, k, bx = std::move(bx)](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(bx));
    if (pb->requires_grad) pb->accumulate(reduce(self.grad.cwiseProduct(pa->value), k));
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, a.value() * s, [s](const Node& self) -> MatrixXd { return self.grad * s; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor square(const Tensor& a) {
  const NodePtr pa = a.node();
  return unary(a, a.value().array().square().matrix(),
               [pa](const Node& self) -> MatrixXd { return 2.0 * self.grad.cwiseProduct(pa->value); });
}

Tensor relu(const Tensor& a) {
  const NodePtr pa = a.node();
  return unary(a, a.value().cwiseMax(0.0), [pa](const Node& self) -> MatrixXd {
    return (pa->value.array() > 0.0).select(self.grad, 0.0);
  });
}

Tensor tanh(const Tensor& a) {
  return unary(a, a.value().array().tanh().matrix(), [](const Node& self) -> MatrixXd {
    return self.grad.cwiseProduct((1.0 - self.value.array().square()).matrix());
  });
}

Tensor exp(const Tensor& a) {
  return unary(a, a.value().array().exp().matrix(),
               [](const Node& self) -> MatrixXd { return self.grad.cwiseProduct(self.value); });
}

Tensor log(const Tensor& a) {
  const NodePtr pa = a.node();
  return unary(a, a.value().array().log().matrix(),
               [pa](const Node& self) -> MatrixXd { return self.grad.cwiseQuotient(pa->value); });
}

Tensor softmax_rows(const Tensor& a) {
  MatrixXd v = a.value().colwise() - a.value().rowwise().maxCoeff();
  v = v.array().exp().matrix();
  v = v.array().colwise() / v.rowwise().sum().array();
  return unary(a, std::move(v), [](const Node& self) -> MatrixXd {
    const VectorXd dot = self.grad.cwiseProduct(self.value).rowwise().sum();
    return self.value.cwiseProduct(self.grad.colwise() - dot);
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const MatrixXd shifted = a.value().colwise() - a.value().rowwise().maxCoeff();
  const VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  MatrixXd v = shifted.colwise() - lse;
  return unary(a, std::move(v), [](const Node& self) -> MatrixXd {
    const MatrixXd p = self.value.array().exp().matrix();
    return self.grad - p.cwiseProduct(self.grad.rowwise().sum().replicate(1, p.cols()));
  });
}

Tensor sum(const Tensor& a) {
  const NodePtr pa = a.node();
  return unary(a, MatrixXd::Constant(1, 1, a.value().sum()), [pa](const Node& self) -> MatrixXd {
    return MatrixXd::Constant(pa->value.rows(), pa->value.cols(), self.grad(0, 0));
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw StructuralError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Tensor sum_rows(const Tensor& a) {
  const Eigen::Index c = a.cols();
  return unary(a, a.value().rowwise().sum(),
               [c](const Node& self) -> MatrixXd { return self.grad.replicate(1, c); });
}

Tensor sum_cols(const Tensor& a) {
  const Eigen::Index r = a.rows();
  return unary(a, a.value().colwise().sum(),
               [r](const Node& self) -> MatrixXd { return self.grad.replicate(r, 1); });
}

Tensor block_max(const Tensor& a, Eigen::Index block) {
  if (block <= 0 || a.rows() % block != 0) {
    throw StructuralError("block_max: " + std::to_string(a.rows()) + " rows do not split into blocks of " +
                          std::to_string(block));
  }
  const Eigen::Index nb = a.rows() / block, c = a.cols();
  MatrixXd v(nb, c);
  Eigen::MatrixXi arg(nb, c);
  for (Eigen::Index b = 0; b < nb; ++b) {
    for (Eigen::Index j = 0; j < c; ++j) {
      Eigen::Index r;
      v(b, j) = a.value().col(j).segment(b * block, block).maxCoeff(&r);
      arg(b, j) = static_cast<int>(b * block + r);
    }
  }
  const NodePtr pa = a.node();
  return unary(a, std::move(v), [pa, arg = std::move(arg)](const Node& self) -> MatrixXd {
    MatrixXd g = MatrixXd::Zero(pa->value.rows(), pa->value.cols());
    for (Eigen::Index b = 0; b < arg.rows(); ++b) {
      for (Eigen::Index j = 0; j < arg.cols(); ++j) g(arg(b, j), j) += self.grad(b, j);
    }
    return g;
  });
}

Tensor block_mean(const Tensor& a, Eigen::Index block) {
  if (block <= 0 || a.rows() % block != 0) {
    throw StructuralError("block_mean: " + std::to_string(a.rows()) + " rows do not split into blocks of " +
                          std::to_string(block));
  }
  const Eigen::Index nb = a.rows() / block;
  MatrixXd v(nb, a.cols());
  for (Eigen::Index b = 0; b < nb; ++b) v.row(b) = a.value().middleRows(b * block, block).colwise().mean();
  return unary(a, std::move(v), [block](const Node& self) -> MatrixXd {
    MatrixXd g(self.grad.rows() * block, self.grad.cols());
    for (Eigen::Index b = 0; b < self.grad.rows(); ++b) {
      g.middleRows(b * block, block) = (self.grad.row(b) / static_cast<double>(block)).replicate(block, 1);
    }
    return g;
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) shape_error("concat_cols", a, b);
  MatrixXd v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  const NodePtr pa = a.node(), pb = b.node();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return make(std::move(v), {pa, pb}, [pa, pb, ca, cb](Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad.leftCols(ca));
    if (pb->requires_grad) pb->accumulate(self.grad.rightCols(cb));
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw StructuralError("concat_rows of no tensors");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts.front(), p);
    rows += p.rows();
    parents.push_back(p.node());
  }
  MatrixXd v(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<NodePtr> captured = parents;
  return make(std::move(v), std::move(parents), [captured](Node& self) {
    Eigen::Index off = 0;
    for (const auto& p : captured) {
      if (p->requires_grad) p->accumulate(self.grad.middleRows(off, p->value.rows()));
      off += p->value.rows();
    }
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw StructuralError("slice_rows out of range");
  const NodePtr pa = a.node();
  return unary(a, a.value().middleRows(start, count), [pa, start, count](const Node& self) -> MatrixXd {
    MatrixXd g = MatrixXd::Zero(pa->value.rows(), pa->value.cols());
    g.middleRows(start, count) = self.grad;
    return g;
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw StructuralError("slice_cols out of range");
  const NodePtr pa = a.node();
  return unary(a, a.value().middleCols(start, count), [pa, start, count](const Node& self) -> MatrixXd {
    MatrixXd g = MatrixXd::Zero(pa->value.rows(), pa->value.cols());
    g.middleCols(start, count) = self.grad;
    return g;
  });
}

Tensor diagonal(const Tensor& a) {
  if (a.rows() != a.cols()) throw StructuralError("diagonal needs a square tensor, got " + shape_str(a.value()));
  const Eigen::Index n = a.rows();
  return unary(a, a.value().diagonal(), [n](const Node& self) -> MatrixXd {
    MatrixXd g = MatrixXd::Zero(n, n);
    g.diagonal() = self.grad.col(0);
    return g;
  });
}

Tensor l2_normalize_rows(const Tensor& a, double eps) {
  const VectorXd sq = a.value().rowwise().squaredNorm();
  // Rows with (numerically) zero norm have no direction; they map to a fixed unit vector
  // and pass no gradient, which keeps every output row on the sphere.
  const Eigen::Array<bool, Eigen::Dynamic, 1> degenerate = sq.array() <= eps;
  VectorXd inv = (sq.array() + eps).rsqrt().matrix();
  MatrixXd v = a.value().array().colwise() * inv.array();
  const double fill = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, a.cols())));
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    if (degenerate(r)) {
      v.row(r).setConstant(fill);
      inv(r) = 0.0;
    }
  }
  return unary(a, std::move(v), [inv](const Node& self) -> MatrixXd {
    // d(x/r) = (g - y (y.g)) / r with y = x/r.
    const VectorXd dot = self.grad.cwiseProduct(self.value).rowwise().sum();
    const MatrixXd tang = self.grad - (self.value.array().colwise() * dot.array()).matrix();
    return tang.array().colwise() * inv.array();
  });
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  MatrixXd v(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(table.rows()) + " rows");
    }
    v.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  const NodePtr pt = table.node();
  return unary(table, std::move(v), [pt, ids](const Node& self) -> MatrixXd {
    MatrixXd g = MatrixXd::Zero(pt->value.rows(), pt->value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) g.row(ids[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    return g;
  });
}

GradCheck gradient_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params, double h) {
  for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
  f().backward();
  GradCheck out;
  for (const auto& p0 : params) {
    Tensor p = p0;
    const MatrixXd analytic = p.has_grad() ? p.grad() : MatrixXd::Zero(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double orig = p.value()(i, j);
        p.mutable_value()(i, j) = orig + h;
        const double up = f().item();
        p.mutable_value()(i, j) = orig - h;
        const double down = f().item();
        p.mutable_value()(i, j) = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic(i, j);
        const double abs_err = std::abs(a - numeric);
        out.max_abs_error = std::max(out.max_abs_error, abs_err);
        out.max_rel_error =
            std::max(out.max_rel_error, abs_err / std::max({std::abs(a), std::abs(numeric), 1e-3}));
        ++out.checked;
      }
    }
  }
  return out;
}

}  // namespace fgcltp::ad
