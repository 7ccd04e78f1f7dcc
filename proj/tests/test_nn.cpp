#include "fgcltp/nn.hpp"
#include "fgcltp/synth.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace fgcltp;
using nn::Tensor;

namespace {

PointFeatures random_points(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointFeatures p;
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = u(rng);
  return p;
}

lang::TokenSequence sequence(const std::vector<std::string>& words) {
  return lang::encode(words, lang::Vocabulary::standard());
}

}  // namespace

TEST(TactileEncoder, UnitNormAndPermutationInvariant) {
  std::mt19937_64 rng(1);
  const nn::TactileEncoder enc(rng);
  for (int trial = 0; trial < 100; ++trial) {
    const PointFeatures p = random_points(rng);
    std::vector<int> perm(kNumMarkers);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    PointFeatures q;
    for (int i = 0; i < kNumMarkers; ++i) q.row(i) = p.row(perm[i]);
    const MatrixXd a = enc(nn::stack_points({&p})).value();
    const MatrixXd b = enc(nn::stack_points({&q})).value();
    ASSERT_NEAR(a.norm(), 1.0, 1e-6);
    ASSERT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(TactileEncoder, BatchRowsAreIndependent) {
  std::mt19937_64 rng(2);
  const nn::TactileEncoder enc(rng);
  const PointFeatures p = random_points(rng), q = random_points(rng);
  const MatrixXd both = enc(nn::stack_points({&p, &q})).value();
  EXPECT_LT((both.row(0) - enc(nn::stack_points({&p})).value()).norm(), 1e-12);
  EXPECT_LT((both.row(1) - enc(nn::stack_points({&q})).value()).norm(), 1e-12);
}

TEST(TactileEncoder, WrongPointCountIsStructuralError) {
  std::mt19937_64 rng(3);
  const nn::TactileEncoder enc(rng);
  EXPECT_THROW(enc(Tensor::constant(MatrixXd::Zero(528, 6))), StructuralError);
  EXPECT_THROW(enc(Tensor::constant(MatrixXd::Zero(529, 5))), StructuralError);
}

TEST(TextEncoder, UnitNormAndDistinctFrozenRows) {
  std::mt19937_64 rng(4);
  const nn::TextEncoder enc(lang::Vocabulary::standard(), rng);
  const auto a = sequence({"a", "smooth", "sphere", "object"});
  const auto b = sequence({"a", "bumpy", "sphere", "object"});
  const MatrixXd out = enc({&a, &b}).value();
  EXPECT_NEAR(out.row(0).norm(), 1.0, 1e-6);
  EXPECT_GT((out.row(0) - out.row(1)).norm(), 1e-6);
}

TEST(TextEncoder, AllPadSequenceIsWellDefined) {
  std::mt19937_64 rng(5);
  const nn::TextEncoder enc(lang::Vocabulary::standard(), rng);
  const lang::TokenSequence pad{};
  const MatrixXd a = enc({&pad}).value();
  EXPECT_TRUE(a.allFinite());
  EXPECT_NEAR(a.norm(), 1.0, 1e-6);
  EXPECT_EQ(a, enc({&pad}).value());
}

TEST(TextEncoder, FrozenRowsGetNoGradientAndSurviveAdam) {
  std::mt19937_64 rng(6);
  const lang::Vocabulary& vocab = lang::Vocabulary::standard();
  nn::TextEncoder enc(vocab, rng);
  nn::ParamSet ps;
  enc.register_params(ps);
  const MatrixXd before = enc.table.value();
  const auto a = sequence({"pressed", "<depth_1.2>", "at", "<posx_3>", "<posy_7>"});
  const auto b = sequence({"a", "ridge", "object", "<twist_cw>"});
  nn::Adam opt(ps, {.lr = 0.1});
  ps.zero_grad();
  ad::sum(ad::square(enc({&a, &b}))).backward();
  const MatrixXd& g = enc.table.grad();
  for (int i = 0; i < vocab.num_base(); ++i) ASSERT_EQ(g.row(i).norm(), 0.0) << vocab.token(i);
  EXPECT_GT(g.row(vocab.id("<depth_1.2>")).norm(), 0.0);
  opt.step();
  const MatrixXd after = enc.table.value();
  EXPECT_EQ(after.topRows(vocab.num_base()), before.topRows(vocab.num_base()));
  EXPECT_NE(after.row(vocab.id("<depth_1.2>")), before.row(vocab.id("<depth_1.2>")));
  // Learnable rows that were not in the batch stay put as well.
  EXPECT_EQ(after.row(vocab.id("<depth_3.3>")), before.row(vocab.id("<depth_3.3>")));
}

TEST(ImageEncoder, RestFrameIsConstantUnitEmbedding) {
  std::mt19937_64 rng(7);
  const nn::ImageEncoder enc(rng);
  const MarkerFrame rest = MarkerFrame::at_rest();
  const MatrixXd maps = nn::depth_maps({&rest});
  EXPECT_EQ(maps.cwiseAbs().maxCoeff(), 0.0);
  const MatrixXd a = enc(Tensor::constant(maps)).value();
  EXPECT_NEAR(a.norm(), 1.0, 1e-6);
  EXPECT_EQ(a, enc(Tensor::constant(maps)).value());
}

TEST(ImageEncoder, DepthMapIsNormalDisplacementWithoutInterpolation) {
  const auto smp = synth::generate({}, 1, 3).front();
  const MatrixXd maps = nn::depth_maps({&smp.result.frame});
  ASSERT_EQ(maps.cols(), kNumMarkers);
  for (int i = 0; i < kNumMarkers; ++i) {
    EXPECT_DOUBLE_EQ(maps(0, i), -(smp.result.frame.deformed(i, 2) - smp.result.frame.rest(i, 2)) / 4.0);
  }
}

TEST(Model, ForwardGradientsAreFiniteForBoundedInputs) {
  nn::Model model(lang::Vocabulary::standard(), 8);
  std::mt19937_64 rng(8);
  const auto seq = sequence({"a", "smooth", "edge", "pressed", "<depth_2.0>"});
  for (int trial = 0; trial < 20; ++trial) {
    const PointFeatures p = random_points(rng), q = random_points(rng);
    MatrixXd maps = testutil::random_matrix(2, kNumMarkers, rng).cwiseMax(-1.0).cwiseMin(1.0);
    const Tensor t = model.tactile(nn::stack_points({&p, &q}));
    const Tensor l = model.text({&seq, &seq});
    const Tensor im = model.image(Tensor::constant(maps));
    const Tensor loss = ad::add(ad::sum(ad::mul(t, ad::add(l, im))), ad::sum(ad::square(model.head(t))));
    model.params().zero_grad();
    loss.backward();
    for (const auto& [name, tensor] : model.params().items()) {
      if (tensor.has_grad()) ASSERT_TRUE(tensor.grad().allFinite()) << name;
    }
  }
}

TEST(Model, ParameterShapesMatchArchitecture) {
  const nn::Model model(lang::Vocabulary::standard(), 9);
  EXPECT_EQ(model.tactile.point1.weight.rows(), 6);
  EXPECT_EQ(model.tactile.point2.weight.cols(), 128);
  EXPECT_EQ(model.tactile.head1.weight.rows(), 256);
  EXPECT_EQ(model.tactile.head2.weight.cols(), 64);
  EXPECT_EQ(model.text.table.rows(), lang::Vocabulary::standard().size());
  EXPECT_EQ(model.text.positional.rows(), lang::kMaxTokens);
  EXPECT_EQ(model.image.layer1.weight.rows(), 529);
  EXPECT_EQ(model.image.layer1.weight.cols(), 256);
  EXPECT_EQ(model.head.layer2.weight.cols(), 8);
  EXPECT_NEAR(model.tau(), 0.07, 1e-12);
}

TEST(Model, TauClamp) {
  nn::Model model(lang::Vocabulary::standard(), 10);
  model.log_tau.mutable_value()(0, 0) = 50.0;
  model.clamp_tau();
  EXPECT_LT(model.tau(), 10.0 + 1e-9);
  model.log_tau.mutable_value()(0, 0) = -50.0;
  model.clamp_tau();
  EXPECT_GT(model.tau(), 1e-3 - 1e-12);
}

TEST(Adam, MinimizesQuadratic) {
  Tensor x = Tensor::parameter(MatrixXd::Constant(1, 2, 5.0));
  nn::ParamSet ps;
  ps.add("x", x);
  nn::Adam opt(ps, {.lr = 0.1});
  for (int i = 0; i < 500; ++i) {
    ps.zero_grad();
    ad::sum(ad::square(ad::sub(x, Tensor::constant(MatrixXd::Constant(1, 2, 1.5))))).backward();
    opt.step();
  }
  EXPECT_LT((x.value().array() - 1.5).abs().maxCoeff(), 1e-3);
  EXPECT_EQ(opt.steps(), 500);
}

TEST(Adam, FirstStepHasMagnitudeLr) {
  // Bias correction makes the first update exactly lr * sign(g) up to eps.
  Tensor x = Tensor::parameter((MatrixXd(1, 3) << 1, -2, 3).finished());
  nn::ParamSet ps;
  ps.add("x", x);
  nn::Adam opt(ps, {.lr = 0.01});
  ad::sum(ad::square(x)).backward();
  opt.step();
  EXPECT_NEAR(x.value()(0, 0), 0.99, 1e-9);
  EXPECT_NEAR(x.value()(0, 1), -1.99, 1e-9);
}

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(nn::cosine_lr(1e-3, 0, 100), 1e-3);
  EXPECT_NEAR(nn::cosine_lr(1e-3, 50, 100), 5e-4, 1e-15);
  EXPECT_NEAR(nn::cosine_lr(1e-3, 100, 100), 0.0, 1e-18);
}

TEST(Checkpoint, RoundTripAndMismatches) {
  testutil::TempDir dir("ckpt");
  const lang::Vocabulary& vocab = lang::Vocabulary::standard();
  const nn::Model a(vocab, 11);
  const auto path = dir.path() / "m.ckpt";
  nn::save_checkpoint(path, a.params(), vocab.hash(), {{"epoch", 3}});

  nn::Model b(vocab, 12);
  nn::ParamSet pb = b.params();
  const io::json meta = nn::load_checkpoint(path, pb, vocab.hash());
  EXPECT_EQ(meta["epoch"], 3);
  const auto ia = a.params().items();
  const auto ib = pb.items();
  ASSERT_EQ(ia.size(), ib.size());
  for (std::size_t i = 0; i < ia.size(); ++i) EXPECT_EQ(ia[i].second.value(), ib[i].second.value()) << ia[i].first;
  // Frozen flags are structural and survive loading.
  EXPECT_EQ(b.text.table.frozen_rows(), a.text.table.frozen_rows());

  EXPECT_THROW(nn::load_checkpoint(path, pb, vocab.hash() ^ 1), nn::CheckpointError);

  nn::ParamSet extra = b.params();
  extra.add("not_in_file", Tensor::parameter(MatrixXd::Zero(1, 1)));
  EXPECT_THROW(nn::load_checkpoint(path, extra, vocab.hash()), nn::CheckpointError);

  auto bytes = io::read_bytes(path);
  bytes.resize(bytes.size() / 2);
  io::write_bytes(dir.path() / "cut.ckpt", bytes);
  EXPECT_THROW(nn::read_checkpoint(dir.path() / "cut.ckpt"), nn::CheckpointError);
}

TEST(Model, SameSeedSameInit) {
  const nn::Model a(lang::Vocabulary::standard(), 13), b(lang::Vocabulary::standard(), 13);
  const auto ia = a.params().items(), ib = b.params().items();
  for (std::size_t i = 0; i < ia.size(); ++i) EXPECT_EQ(ia[i].second.value(), ib[i].second.value());
}
