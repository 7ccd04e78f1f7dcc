#include "fgcltp/evaluation.hpp"

#include "fgcltp/nn.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <set>

namespace fgcltp::eval {

namespace {

MatrixXd softmax(const MatrixXd& logits) {
  MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  return p.array().colwise() / p.rowwise().sum().array();
}


struct Standardizer {
  Eigen::RowVectorXd mean, scale;
  explicit Standardizer(const MatrixXd& x) {
    mean = x.colwise().mean();
    scale = ((x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt().matrix();
    for (Eigen::Index j = 0; j < scale.size(); ++j) scale(j) = scale(j) > 1e-12 ? scale(j) : 1.0;
  }
};

std::vector<int> argmax_rows(const MatrixXd& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index c;
    logits.row(i).maxCoeff(&c);
    out[static_cast<std::size_t>(i)] = static_cast<int>(c);
  }
  return out;
}

}  // namespace

void LogisticProbe::fit(const MatrixXd& x, const std::vector<int>& labels, int k) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size()) throw std::invalid_argument("probe: label count mismatch");
  std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw std::invalid_argument("probe: at least two classes are required");
  for (int c : labels) {
    if (c < 0 || c >= k) throw std::invalid_argument("probe: label outside [0, k)");
  }
  classes = k;
  mean = x.colwise().mean();
  scale = ((x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt().matrix();
  for (Eigen::Index j = 0; j < d; ++j) scale(j) = scale(j) > 1e-12 ? scale(j) : 1.0;
  const MatrixXd z = (x.rowwise() - mean).array().rowwise() / scale.array();

  MatrixXd onehot = MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  // Augment with a constant column so the bias shares the update.
  MatrixXd za(n, d + 1);
  za << z, VectorXd::Ones(n);
  const MatrixXd gram = za.transpose() * za / static_cast<double>(n);
  const double lmax = Eigen::SelfAdjointEigenSolver<MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double step = 1.0 / (0.5 * lmax + l2);

  MatrixXd w = MatrixXd::Zero(d + 1, k), w_prev = w;
  for (int it = 1; it <= max_iter; ++it) {
    const MatrixXd look = w + (static_cast<double>(it - 1) / (it + 2)) * (w - w_prev);
    const MatrixXd p = softmax(za * look);
    MatrixXd grad = za.transpose() * (p - onehot) / static_cast<double>(n);
    grad.topRows(d) += l2 * look.topRows(d);
    w_prev = w;
    w = look - step * grad;
    if (grad.cwiseAbs().maxCoeff() < tol) break;
  }
  weight = w.topRows(d);
  bias = w.row(d);
}

std::vector<int> LogisticProbe::predict(const MatrixXd& x) const {
  const MatrixXd z = (x.rowwise() - mean).array().rowwise() / scale.array();
  const MatrixXd logits = (z * weight).rowwise() + bias;
  return argmax_rows(logits);
}


void MlpProbe::fit(const MatrixXd& x, const std::vector<int>& labels, int k) {
  const Eigen::Index n = x.rows();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size()) throw std::invalid_argument("probe: label count mismatch");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2) {
    throw std::invalid_argument("probe: at least two classes are required");
  }
  for (int c : labels) {
    if (c < 0 || c >= k) throw std::invalid_argument("probe: label outside [0, k)");
  }
  classes = k;
  const Standardizer st(x);
  mean = st.mean;
  scale = st.scale;
  const MatrixXd z = (x.rowwise() - mean).array().rowwise() / scale.array();
  MatrixXd onehot = MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  std::mt19937_64 rng(seed);
  const nn::Linear l1(static_cast<int>(x.cols()), hidden, rng), l2_(hidden, k, rng);
  nn::ParamSet ps;
  l1.register_params(ps, "probe.l1");
  l2_.register_params(ps, "probe.l2");
  nn::Adam adam(ps, {.lr = lr});
  const ad::Tensor input = ad::Tensor::constant(z), target = ad::Tensor::constant(onehot);
  for (int it = 0; it < iterations; ++it) {
    const ad::Tensor logp = ad::log_softmax_rows(l2_(ad::relu(l1(input))));
    const ad::Tensor nll = ad::scale(ad::sum(ad::mul(logp, target)), -1.0 / static_cast<double>(n));
    const ad::Tensor decay = ad::scale(ad::add(ad::sum(ad::square(l1.weight)), ad::sum(ad::square(l2_.weight))), l2);
    ps.zero_grad();
    ad::add(nll, decay).backward();
    adam.step(lr);
  }
  w1 = l1.weight.value();
  b1 = l1.bias.value();
  w2 = l2_.weight.value();
  b2 = l2_.bias.value();
}

std::vector<int> MlpProbe::predict(const MatrixXd& x) const {
  const MatrixXd z = (x.rowwise() - mean).array().rowwise() / scale.array();
  const MatrixXd h = ((z * w1).rowwise() + b1).cwiseMax(0.0);
  return argmax_rows((h * w2).rowwise() + b2);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("accuracy: size mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double linear_probe(const MatrixXd& x_train, const std::vector<int>& y_train, const MatrixXd& x_val,
                    const std::vector<int>& y_val, int k) {
  LogisticProbe probe;
  probe.fit(x_train, y_train, k);
  return accuracy(probe.predict(x_val), y_val);
}

void Ridge::fit(const MatrixXd& x, const MatrixXd& y) {
  if (x.rows() != y.rows() || x.rows() == 0) throw std::invalid_argument("ridge: bad shapes");
  const Eigen::RowVectorXd xm = x.colwise().mean(), ym = y.colwise().mean();
  const MatrixXd xc = x.rowwise() - xm;
  const MatrixXd yc = y.rowwise() - ym;
  MatrixXd a = xc.transpose() * xc;
  a.diagonal().array() += lambda;
  weight = a.ldlt().solve(xc.transpose() * yc);
  intercept = ym - xm * weight;
}

MatrixXd Ridge::predict(const MatrixXd& x) const { return (x * weight).rowwise() + intercept; }

RegressionMetrics metrics_from_errors(const VectorXd& errors, const VectorXd& deviations) {
  RegressionMetrics m;
  m.n = static_cast<std::size_t>(errors.size());
  if (m.n == 0) return m;
  const double n = static_cast<double>(m.n);
  m.mae = errors.cwiseAbs().sum() / n;
  const double ss_res = errors.squaredNorm();
  m.rmse = std::sqrt(ss_res / n);
  const double ss_tot = deviations.squaredNorm();
  m.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
  return m;
}

RegressionMetrics regression_metrics(const VectorXd& pred, const VectorXd& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("regression_metrics: size mismatch");
  if (truth.size() == 0) return {};
  return metrics_from_errors(pred - truth, truth.array() - truth.mean());
}

RegressionMetrics angular_metrics(const VectorXd& pred_deg, const VectorXd& truth_deg, double period, double norm) {
  if (pred_deg.size() != truth_deg.size()) throw std::invalid_argument("angular_metrics: size mismatch");
  const Eigen::Index n = truth_deg.size();
  if (n == 0) return {};
  // Circular mean of the truth on the period-scaled circle.
  double s = 0, c = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = truth_deg(i) * 2.0 * kPi / period;
    s += std::sin(a);
    c += std::cos(a);
  }
  const double centre = wrap_angle(std::atan2(s, c) * period / (2.0 * kPi), period);
  VectorXd err(n), dev(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    err(i) = angular_distance(pred_deg(i), truth_deg(i), period) / norm;
    dev(i) = angular_distance(truth_deg(i), centre, period) / norm;
  }
  return metrics_from_errors(err, dev);
}

Retrieval retrieval(const MatrixXd& query, const MatrixXd& keys) {
  if (query.rows() != keys.rows()) throw std::invalid_argument("retrieval: size mismatch");
  Retrieval r;
  r.pool = static_cast<std::size_t>(query.rows());
  if (r.pool == 0) return r;
  const auto normed = [](const MatrixXd& m) -> MatrixXd {
    return m.array().colwise() / m.rowwise().norm().array().max(1e-300);
  };
  const MatrixXd sim = normed(query) * normed(keys).transpose();
  std::size_t h1 = 0, h5 = 0;
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    // Rank = number of keys strictly more similar than the paired one.
    const double own = sim(i, i);
    Eigen::Index better = 0;
    for (Eigen::Index j = 0; j < sim.cols(); ++j) better += (j != i && sim(i, j) > own);
    h1 += better < 1;
    h5 += better < 5;
  }
  r.top1 = static_cast<double>(h1) / static_cast<double>(r.pool);
  r.top5 = static_cast<double>(h5) / static_cast<double>(r.pool);
  return r;
}

EvalConfig EvalConfig::from_json(const io::json& j) {
  EvalConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (k == "depth_edges") c.depth_edges = v.get<std::vector<double>>();
    else if (k == "area_edges") c.area_edges = v.get<std::vector<double>>();
    else if (k == "position_bins") c.position_bins = v.get<int>();
    else if (k == "slide_bins") c.slide_bins = v.get<int>();
    else if (k == "ridge_lambda") c.ridge_lambda = v.get<double>();
    else if (k == "probe_l2") c.probe_l2 = v.get<double>();
    else if (k == "retrieval_pool") c.retrieval_pool = v.get<int>();
    else if (k == "in_batch") c.in_batch = v.get<int>();
    else if (k == "probe") c.probe = v.get<std::string>();
    else throw std::invalid_argument("unknown key '" + k + "'");
  }
  if (!std::is_sorted(c.depth_edges.begin(), c.depth_edges.end()) ||
      !std::is_sorted(c.area_edges.begin(), c.area_edges.end())) {
    throw std::invalid_argument("bin edges must be ascending");
  }
  if (c.position_bins < 1 || c.slide_bins < 1 || c.retrieval_pool < 1 || c.in_batch < 2) {
    throw std::invalid_argument("bin counts and pool sizes must be positive");
  }
  if (c.probe != "linear" && c.probe != "mlp") throw std::invalid_argument("probe must be 'linear' or 'mlp'");
  return c;
}

io::json EvalConfig::to_json() const {
  return {{"depth_edges", depth_edges},   {"area_edges", area_edges},     {"position_bins", position_bins},
          {"slide_bins", slide_bins},     {"ridge_lambda", ridge_lambda}, {"probe_l2", probe_l2},
          {"retrieval_pool", retrieval_pool}, {"in_batch", in_batch}, {"probe", probe}};
}

int bin_of(double v, const std::vector<double>& edges) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
}

int task_classes(const std::string& task, const EvalConfig& cfg) {
  if (task == "shape") return 6;
  if (task == "texture") return 3;
  if (task == "depth") return static_cast<int>(cfg.depth_edges.size()) + 1;
  if (task == "area") return static_cast<int>(cfg.area_edges.size()) + 1;
  if (task == "position") return cfg.position_bins * cfg.position_bins;
  if (task == "slide") return cfg.slide_bins;
  if (task == "twist") return 3;
  throw std::invalid_argument("unknown task " + task);
}

std::optional<int> task_label(const std::string& task, const ContactState& s, const EvalConfig& cfg) {
  if (task == "shape") return static_cast<int>(s.shape);
  if (task == "texture") return static_cast<int>(s.texture);
  if (task == "depth") return s.depth_valid ? std::optional<int>(bin_of(s.depth_mm, cfg.depth_edges)) : std::nullopt;
  if (task == "area") return bin_of(s.area_fraction, cfg.area_edges);
  if (task == "position") {
    if (!s.centroid) return std::nullopt;
    const int nb = cfg.position_bins;
    const int cx = std::clamp(static_cast<int>(std::floor(s.centroid->x() * nb)), 0, nb - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(s.centroid->y() * nb)), 0, nb - 1);
    return cy * nb + cx;
  }
  if (task == "slide") {
    if (!s.slide_deg) return std::nullopt;
    const double w = 360.0 / cfg.slide_bins;
    return static_cast<int>(std::floor(wrap_angle(*s.slide_deg + w / 2, 360.0) / w)) % cfg.slide_bins;
  }
  if (task == "twist") return s.twist ? std::optional<int>(static_cast<int>(*s.twist)) : std::nullopt;
  throw std::invalid_argument("unknown task " + task);
}

const ProbeReport::Classification* ProbeReport::task(const std::string& name) const {
  for (const auto& [n, c] : classification) {
    if (n == name) return &c;
  }
  return nullptr;
}

const RegressionMetrics* ProbeReport::attribute(const std::string& name) const {
  for (const auto& [n, m] : regression) {
    if (n == name) return &m;
  }
  return nullptr;
}

io::json ProbeReport::to_json() const {
  io::json cls = io::json::object(), reg = io::json::object();
  for (const auto& [n, c] : classification) {
    cls[n] = {{"accuracy", c.accuracy}, {"classes", c.classes}, {"n_train", c.n_train}, {"n_val", c.n_val}};
  }
  for (const auto& [n, m] : regression) reg[n] = {{"mae", m.mae}, {"rmse", m.rmse}, {"r2", m.r2}, {"n", m.n}};
  reg["macro"] = {{"mae", macro.mae}, {"rmse", macro.rmse}, {"r2", macro.r2}};
  return {{"version", 1},
          {"probe", probe},
          {"classification", cls},
          {"regression", reg},
          {"retrieval", {{"top1", retrieval.top1}, {"top5", retrieval.top5}, {"pool", retrieval.pool}}},
          {"in_batch_text_to_tactile_top1", in_batch_text_to_tactile_top1}};
}

namespace {

MatrixXd take_rows(const MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

double half_angle_deg(double s, double c) { return wrap_angle(std::atan2(s, c) * kRadToDeg / 2.0, 180.0); }
double full_angle_deg(double s, double c) { return wrap_angle(std::atan2(s, c) * kRadToDeg, 360.0); }

}  // namespace

ProbeReport evaluate(const nn::Model& model, const std::vector<pretrain::Prepared>& data,
                     const std::vector<ContactState>& states, const EvalConfig& cfg) {
  if (data.size() != states.size()) throw std::invalid_argument("evaluate: states and samples differ in count");
  std::vector<const pretrain::Prepared*> all;
  for (const auto& p : data) all.push_back(&p);
  const pretrain::Embeddings emb = pretrain::embed(model, all);

  std::vector<Eigen::Index> tr, va;
  for (std::size_t i = 0; i < data.size(); ++i) (data[i].validation ? va : tr).push_back(static_cast<Eigen::Index>(i));
  if (tr.empty() || va.empty()) throw std::invalid_argument("evaluate: both splits must be non-empty");

  ProbeReport rep;
  rep.probe = cfg.probe;
  for (const auto& task : kTasks) {
    std::vector<Eigen::Index> rows_tr, rows_va;
    std::vector<int> y_tr, y_va;
    for (auto i : tr) {
      if (auto l = task_label(task, states[static_cast<std::size_t>(i)], cfg)) rows_tr.push_back(i), y_tr.push_back(*l);
    }
    for (auto i : va) {
      if (auto l = task_label(task, states[static_cast<std::size_t>(i)], cfg)) rows_va.push_back(i), y_va.push_back(*l);
    }
    if (std::set<int>(y_tr.begin(), y_tr.end()).size() < 2 || y_va.empty()) continue;
    ProbeReport::Classification c;
    c.classes = task_classes(task, cfg);
    c.n_train = rows_tr.size();
    c.n_val = rows_va.size();
    const MatrixXd x_tr = take_rows(emb.tactile, rows_tr), x_va = take_rows(emb.tactile, rows_va);
    if (cfg.probe == "mlp") {
      MlpProbe probe;
      probe.l2 = cfg.probe_l2;
      probe.fit(x_tr, y_tr, c.classes);
      c.accuracy = accuracy(probe.predict(x_va), y_va);
    } else {
      LogisticProbe probe;
      probe.l2 = cfg.probe_l2;
      probe.fit(x_tr, y_tr, c.classes);
      c.accuracy = accuracy(probe.predict(x_va), y_va);
    }
    rep.classification.emplace_back(task, c);
  }

  struct Attr {
    std::string name;
    int first, count;  // target channels
    int kind;          // 0 linear, 1 axis (period 180), 2 direction (period 360)
  };
  const std::vector<Attr> attrs = {
      {"depth", 0, 1, 0}, {"position", 1, 2, 0}, {"area", 3, 1, 0}, {"principal_axis", 4, 2, 1}, {"shear", 6, 2, 2}};
  for (const auto& a : attrs) {
    std::vector<Eigen::Index> rows_tr, rows_va;
    for (auto i : tr) {
      if (data[static_cast<std::size_t>(i)].sample.target_mask(a.first) > 0) rows_tr.push_back(i);
    }
    for (auto i : va) {
      if (data[static_cast<std::size_t>(i)].sample.target_mask(a.first) > 0) rows_va.push_back(i);
    }
    if (rows_tr.size() < 2 || rows_va.empty()) continue;
    auto targets = [&](const std::vector<Eigen::Index>& rows) {
      MatrixXd y(static_cast<Eigen::Index>(rows.size()), a.count);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        y.row(static_cast<Eigen::Index>(i)) =
            data[static_cast<std::size_t>(rows[i])].sample.targets.segment(a.first, a.count).transpose();
      }
      return y;
    };
    Ridge ridge;
    ridge.lambda = cfg.ridge_lambda;
    ridge.fit(take_rows(emb.tactile, rows_tr), targets(rows_tr));
    const MatrixXd pred = ridge.predict(take_rows(emb.tactile, rows_va));
    const MatrixXd truth = targets(rows_va);
    RegressionMetrics m;
    if (a.kind == 0) {
      const Eigen::Index n = truth.rows();
      VectorXd err(n * a.count), dev(n * a.count);
      for (int c = 0; c < a.count; ++c) {
        err.segment(c * n, n) = pred.col(c) - truth.col(c);
        dev.segment(c * n, n) = truth.col(c).array() - truth.col(c).mean();
      }
      m = metrics_from_errors(err, dev);
    } else {
      VectorXd p(truth.rows()), t(truth.rows());
      for (Eigen::Index i = 0; i < truth.rows(); ++i) {
        p(i) = a.kind == 1 ? half_angle_deg(pred(i, 0), pred(i, 1)) : full_angle_deg(pred(i, 0), pred(i, 1));
        t(i) = a.kind == 1 ? half_angle_deg(truth(i, 0), truth(i, 1)) : full_angle_deg(truth(i, 0), truth(i, 1));
      }
      m = a.kind == 1 ? angular_metrics(p, t, 180.0, 90.0) : angular_metrics(p, t, 360.0, 180.0);
    }
    rep.regression.emplace_back(a.name, m);
  }
  if (!rep.regression.empty()) {
    for (const auto& [_, m] : rep.regression) {
      rep.macro.mae += m.mae;
      rep.macro.rmse += m.rmse;
      rep.macro.r2 += m.r2;
    }
    const double k = static_cast<double>(rep.regression.size());
    rep.macro.mae /= k;
    rep.macro.rmse /= k;
    rep.macro.r2 /= k;
  }

  std::vector<Eigen::Index> pool(va.begin(), va.begin() + std::min<std::size_t>(va.size(), cfg.retrieval_pool));
  rep.retrieval = retrieval(take_rows(emb.tactile, pool), take_rows(emb.text, pool));
  rep.in_batch_text_to_tactile_top1 =
      pretrain::in_batch_top1(take_rows(emb.text, va), take_rows(emb.tactile, va), cfg.in_batch);
  return rep;
}

}  // namespace fgcltp::eval
