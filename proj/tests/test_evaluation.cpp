#include "fgcltp/evaluation.hpp"
#include "fgcltp/synth.hpp"
#include "test_util.hpp"

#include <Eigen/QR>
#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace fgcltp;
using namespace fgcltp::eval;

namespace {

// Gaussian blobs around the rows of `centres`.
void blobs(const MatrixXd& centres, int n, double spread, std::mt19937_64& rng, MatrixXd& x, std::vector<int>& y) {
  const auto k = static_cast<int>(centres.rows());
  x = testutil::random_matrix(n, centres.cols(), rng, spread);
  y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = i % k;
    x.row(i) += centres.row(i % k);
  }
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(LogisticProbe, SeparableDataIsPerfect) {
  std::mt19937_64 rng(1);
  const MatrixXd centres = testutil::random_matrix(4, 8, rng, 10.0);
  MatrixXd xtr, xva;
  std::vector<int> ytr, yva;
  blobs(centres, 300, 0.5, rng, xtr, ytr);
  blobs(centres, 100, 0.5, rng, xva, yva);
  EXPECT_DOUBLE_EQ(linear_probe(xtr, ytr, xva, yva, 4), 1.0);
}

TEST(LogisticProbe, ShuffledLabelsGiveChance) {
  std::mt19937_64 rng(2);
  const MatrixXd xtr = testutil::random_matrix(2000, 8, rng), xva = testutil::random_matrix(2000, 8, rng);
  std::vector<int> ytr(2000), yva(2000);
  std::uniform_int_distribution<int> pick(0, 3);
  for (auto& v : ytr) v = pick(rng);
  for (auto& v : yva) v = pick(rng);
  EXPECT_NEAR(linear_probe(xtr, ytr, xva, yva, 4), 0.25, 0.05);
}

TEST(LogisticProbe, UnseenClassStillPredictable) {
  std::mt19937_64 rng(3);
  MatrixXd x;
  std::vector<int> y;
  blobs(testutil::random_matrix(3, 8, rng, 10.0), 90, 0.3, rng, x, y);
  LogisticProbe p;
  p.fit(x, y, 5);
  EXPECT_EQ(p.weight.cols(), 5);
  for (int c : p.predict(x)) EXPECT_LT(c, 3);
}

TEST(MlpProbe, SeparableAndDeterministic) {
  std::mt19937_64 rng(4);
  MatrixXd x;
  std::vector<int> y;
  blobs(testutil::random_matrix(3, 8, rng, 10.0), 200, 0.5, rng, x, y);
  MlpProbe a, b;
  a.fit(x, y, 3);
  b.fit(x, y, 3);
  EXPECT_DOUBLE_EQ(accuracy(a.predict(x), y), 1.0);
  EXPECT_EQ(a.w1, b.w1);
}

TEST(Accuracy, Basics) {
  EXPECT_DOUBLE_EQ(accuracy({1, 2, 3, 4}, {1, 2, 0, 4}), 0.75);
  EXPECT_THROW(accuracy({1}, {1, 2}), std::invalid_argument);
}

TEST(Ridge, RecoversLinearMapWithIntercept) {
  std::mt19937_64 rng(5);
  const MatrixXd x = testutil::random_matrix(500, 6, rng);
  const MatrixXd w = testutil::random_matrix(6, 2, rng);
  const Eigen::RowVector2d b(3.0, -1.0);
  const MatrixXd y = (x * w).rowwise() + b;
  Ridge r;
  r.lambda = 1e-9;
  r.fit(x, y);
  EXPECT_LT((r.weight - w).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((r.intercept - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(RegressionMetrics, MatchesOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd truth = testutil::random_matrix(50, 1, rng).col(0);
    const VectorXd pred = truth + testutil::random_matrix(50, 1, rng, 0.3).col(0);
    const RegressionMetrics m = regression_metrics(pred, truth);
    EXPECT_NEAR(m.r2, oracle::r_squared(to_std(pred), to_std(truth)), 1e-9);
    EXPECT_NEAR(m.mae, (pred - truth).cwiseAbs().mean(), 1e-12);
    EXPECT_NEAR(m.rmse, std::sqrt((pred - truth).squaredNorm() / 50.0), 1e-12);
  }
}

TEST(RegressionMetrics, PerfectAndConstantPredictors) {
  const VectorXd truth = (VectorXd(4) << 1, 2, 3, 6).finished();
  const RegressionMetrics perfect = regression_metrics(truth, truth);
  EXPECT_EQ(perfect.mae, 0.0);
  EXPECT_EQ(perfect.rmse, 0.0);
  EXPECT_EQ(perfect.r2, 1.0);
  const RegressionMetrics mean = regression_metrics(VectorXd::Constant(4, truth.mean()), truth);
  EXPECT_NEAR(mean.r2, 0.0, 1e-12);
}

TEST(AngularMetrics, WrapAround) {
  const VectorXd truth = (VectorXd(3) << 179.0, 1.0, 90.0).finished();
  const VectorXd pred = (VectorXd(3) << 1.0, 179.0, 90.0).finished();
  const RegressionMetrics m = angular_metrics(pred, truth, 180.0, 90.0);
  EXPECT_NEAR(m.mae, (2.0 + 2.0 + 0.0) / 3.0 / 90.0, 1e-12);
  const RegressionMetrics full = angular_metrics((VectorXd(1) << 359.0).finished(), (VectorXd(1) << 1.0).finished(), 360.0, 180.0);
  EXPECT_NEAR(full.mae, 2.0 / 180.0, 1e-12);
}

TEST(Retrieval, IdentityAndRotationInvariance) {
  std::mt19937_64 rng(7);
  const MatrixXd a = testutil::random_matrix(64, 16, rng);
  const Retrieval self = retrieval(a, a);
  EXPECT_DOUBLE_EQ(self.top1, 1.0);
  EXPECT_DOUBLE_EQ(self.top5, 1.0);
  EXPECT_EQ(self.pool, 64u);

  const MatrixXd b = a + testutil::random_matrix(64, 16, rng, 0.8);
  const Retrieval base = retrieval(a, b);
  const Eigen::HouseholderQR<MatrixXd> qr(testutil::random_matrix(16, 16, rng));
  const MatrixXd q = qr.householderQ();
  const Retrieval rot = retrieval(a * q, b * q);
  EXPECT_DOUBLE_EQ(rot.top1, base.top1);
  EXPECT_DOUBLE_EQ(rot.top5, base.top5);
  EXPECT_LE(base.top1, base.top5);
  // Positive rescaling of rows does not change cosine ranking.
  MatrixXd scaled = b;
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= 1.0 + static_cast<double>(i);
  EXPECT_DOUBLE_EQ(retrieval(a, scaled).top1, base.top1);
}

TEST(Retrieval, PairedPermutationInvariance) {
  std::mt19937_64 rng(8);
  const MatrixXd a = testutil::random_matrix(40, 8, rng);
  const MatrixXd b = a + testutil::random_matrix(40, 8, rng, 1.0);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixXd pa(40, 8), pb(40, 8);
  for (int i = 0; i < 40; ++i) pa.row(i) = a.row(perm[i]), pb.row(i) = b.row(perm[i]);
  const Retrieval r1 = retrieval(a, b), r2 = retrieval(pa, pb);
  EXPECT_DOUBLE_EQ(r1.top1, r2.top1);
  EXPECT_DOUBLE_EQ(r1.top5, r2.top5);
  EXPECT_THROW(retrieval(a, b.topRows(39)), std::invalid_argument);
}

TEST(TaskLabels, BinsAndInvalid) {
  const EvalConfig cfg;
  EXPECT_EQ(task_classes("depth", cfg), 8);
  EXPECT_EQ(bin_of(0.4, cfg.depth_edges), 0);
  EXPECT_EQ(bin_of(0.5, cfg.depth_edges), 1);
  EXPECT_EQ(bin_of(3.9, cfg.depth_edges), 7);
  ContactState s;
  s.depth_mm = 1.2;
  EXPECT_EQ(task_label("depth", s, cfg), 2);
  EXPECT_FALSE(task_label("position", s, cfg));
  EXPECT_FALSE(task_label("slide", s, cfg));
  s.centroid = Vector2d(0.99, 0.0);
  EXPECT_EQ(task_label("position", s, cfg), 3);
  s.slide_deg = 350.0;
  EXPECT_EQ(task_label("slide", s, cfg), 0);
  s.slide_deg = 95.0;
  EXPECT_EQ(task_label("slide", s, cfg), 2);
  s.depth_valid = false;
  EXPECT_FALSE(task_label("depth", s, cfg));
  EXPECT_THROW(task_label("colour", s, cfg), std::invalid_argument);
}

TEST(EvalConfig, JsonRoundTrip) {
  EvalConfig c;
  c.probe = "mlp";
  c.depth_edges = {1.0, 2.0};
  EXPECT_EQ(EvalConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(EvalConfig::from_json({{"nope", 1}}), std::invalid_argument);
}

TEST(Evaluate, ReportIsCompleteAndDeterministic) {
  const auto samples = synth::generate({}, 300, 31);
  std::vector<pretrain::Example> ex;
  std::vector<ContactState> states;
  for (const auto& s : samples) {
    ex.push_back({s.id, s.result.frame, s.result.state});
    states.push_back(s.result.state);
  }
  const auto data = pretrain::prepare(ex, lang::Style::kTokenized);
  const nn::Model model(lang::Vocabulary::standard(), 5);
  const ProbeReport a = evaluate(model, data, states);
  const ProbeReport b = evaluate(model, data, states);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  for (const auto& t : kTasks) {
    const auto* c = a.task(t);
    ASSERT_NE(c, nullptr) << t;
    EXPECT_GE(c->accuracy, 0.0);
    EXPECT_LE(c->accuracy, 1.0);
  }
  double sum = 0;
  for (const auto& [_, m] : a.regression) sum += m.r2;
  EXPECT_NEAR(a.macro.r2, sum / static_cast<double>(a.regression.size()), 1e-12);
  EXPECT_NE(a.attribute("depth"), nullptr);
  EXPECT_NE(a.attribute("principal_axis"), nullptr);
  EXPECT_EQ(a.attribute("colour"), nullptr);
  EXPECT_GT(a.retrieval.pool, 0u);
  EXPECT_THROW(evaluate(model, data, std::vector<ContactState>(states.begin(), states.end() - 1)),
               std::invalid_argument);
}
