#include "fgcltp/pretrain.hpp"

#include "fgcltp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

namespace fgcltp::pretrain {

void LossWeights::validate() const {
  if (!(tl >= 0 && ti >= 0 && li >= 0)) throw std::invalid_argument("loss weights must be non-negative");
  if (!(tl > 0 || ti > 0 || li > 0)) throw std::invalid_argument("at least one loss weight must be positive");
}

namespace {

void check_unit_rows(const Tensor& f, const char* name) {
  const VectorXd norms = f.value().rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (std::abs(norms(i) - 1.0) > 1e-4) {
      throw ContractError(std::string(name) + " row " + std::to_string(i) + " has norm " + std::to_string(norms(i)));
    }
  }
}

}  // namespace

Tensor infonce(const Tensor& f_a, const Tensor& f_b, const Tensor& log_tau, bool mean_reduction) {
  if (f_a.rows() != f_b.rows() || f_a.cols() != f_b.cols()) {
    throw StructuralError("infonce: embedding batches differ in shape");
  }
  if (f_a.rows() == 0) throw StructuralError("infonce: empty batch");
  if (log_tau.rows() != 1 || log_tau.cols() != 1) throw StructuralError("infonce: log tau must be 1x1");
  check_unit_rows(f_a, "f_a");
  check_unit_rows(f_b, "f_b");
  const Tensor logits = ad::mul(ad::matmul(f_a, ad::transpose(f_b)), ad::exp(ad::neg(log_tau)));
  const Tensor picked = ad::sum(ad::diagonal(ad::log_softmax_rows(logits)));
  const double norm = mean_reduction ? static_cast<double>(f_a.rows()) : 2.0;
  return ad::scale(picked, -1.0 / norm);
}

Tensor align_loss(const Tensor& f_t, const Tensor& f_l, const Tensor& f_i, const Tensor& log_tau,
                  const LossWeights& w, bool mean_reduction) {
  if (f_t.rows() != f_l.rows() || f_t.rows() != f_i.rows()) throw StructuralError("align_loss: batch size mismatch");
  if (!(w.tl >= 0 && w.ti >= 0 && w.li >= 0)) throw std::invalid_argument("loss weights must be non-negative");
  auto pair = [&](const Tensor& a, const Tensor& b, double lambda) {
    const Tensor both = ad::add(infonce(a, b, log_tau, mean_reduction), infonce(b, a, log_tau, mean_reduction));
    return ad::scale(both, lambda / 2.0);
  };
  return ad::add(ad::add(pair(f_t, f_l, w.tl), pair(f_t, f_i, w.ti)), pair(f_l, f_i, w.li));
}

Tensor regression_loss(const Tensor& y_hat, const MatrixXd& y, const MatrixXd& mask) {
  if (y_hat.rows() != y.rows() || y_hat.cols() != y.cols() || mask.rows() != y.rows() || mask.cols() != y.cols()) {
    throw StructuralError("regression_loss: shape mismatch");
  }
  const Eigen::Index n = y.rows();
  if (n == 0) throw StructuralError("regression_loss: empty batch");
  MatrixXd weight = mask;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double valid = mask.row(i).sum();
    weight.row(i) = valid > 0 ? (mask.row(i) / valid).eval() : Eigen::RowVectorXd::Zero(mask.cols()).eval();
  }
  weight /= static_cast<double>(n);
  const Tensor diff = ad::sub(y_hat, Tensor::constant(y));
  return ad::sum(ad::mul(ad::square(diff), Tensor::constant(std::move(weight))));
}

std::vector<Example> load_examples(const std::filesystem::path& corpus_dir, const std::filesystem::path& labels) {
  std::vector<Example> out;
  for (auto& rec : io::read_labels(labels)) {
    Example e;
    e.id = rec.id;
    e.frame = io::read_frame(corpus_dir / (rec.id + ".fgt"));
    e.state = rec.state;
    out.push_back(std::move(e));
  }
  if (out.empty()) throw std::runtime_error("no samples listed in " + labels.string());
  return out;
}

bool is_validation(const std::string& id) { return io::fnv1a(id) % 10 == 0; }

int fixed_variant(const std::string& id) {
  return static_cast<int>(io::fnv1a(id + "#variant") % static_cast<std::uint64_t>(lang::kNumVariants));
}

std::vector<Prepared> prepare(const std::vector<Example>& examples, lang::Style style, const lang::Vocabulary& vocab) {
  std::vector<Prepared> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    Prepared p;
    p.id = e.id;
    p.sample = normalize(e.frame, e.state);
    p.depth_map = nn::depth_maps({&e.frame}).row(0);
    for (int v = 0; v < lang::kNumVariants; ++v) p.tokens[v] = lang::describe(e.state, style, v, vocab).tokens;
    p.validation = is_validation(e.id);
    out.push_back(std::move(p));
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch < 2) throw std::invalid_argument("batch must be >= 2");
  if (eval_batch < 2) throw std::invalid_argument("eval_batch must be >= 2");
  if (!(lr > 0)) throw std::invalid_argument("lr must be positive");
  weights.validate();
}

TrainConfig TrainConfig::from_json(const io::json& j) {
  TrainConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (k == "epochs") c.epochs = v.get<int>();
    else if (k == "batch") c.batch = v.get<int>();
    else if (k == "lr") c.lr = v.get<double>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "lambda_tl") c.weights.tl = v.get<double>();
    else if (k == "lambda_ti") c.weights.ti = v.get<double>();
    else if (k == "lambda_li") c.weights.li = v.get<double>();
    else if (k == "mean_reduction") c.mean_reduction = v.get<bool>();
    else if (k == "style") c.style = lang::parse_style(v.get<std::string>());
    else if (k == "eval_batch") c.eval_batch = v.get<int>();
    else if (k == "regression") c.regression = v.get<bool>();
    else throw std::invalid_argument("unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

io::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch", batch},
          {"lr", lr},
          {"seed", seed},
          {"lambda_tl", weights.tl},
          {"lambda_ti", weights.ti},
          {"lambda_li", weights.li},
          {"mean_reduction", mean_reduction},
          {"style", std::string(lang::to_string(style))},
          {"eval_batch", eval_batch},
          {"regression", regression}};
}

io::json EpochMetrics::to_json() const {
  return {{"epoch", epoch},
          {"lr", lr},
          {"tau", tau},
          {"train_align", train_align},
          {"train_regression", train_regression},
          {"val_align", val_align},
          {"val_regression", val_regression},
          {"val_total", val_total},
          {"val_text_to_tactile_top1", val_text_to_tactile_top1}};
}

namespace {

struct Batch {
  Tensor points, maps;
  std::vector<const lang::TokenSequence*> tokens;
  MatrixXd y, mask;
};

Batch make_batch(const std::vector<const Prepared*>& items, const std::vector<int>& variants) {
  Batch b;
  std::vector<const PointFeatures*> pts;
  const auto n = static_cast<Eigen::Index>(items.size());
  MatrixXd maps(n, kNumMarkers);
  b.y.resize(n, kTargetChannels);
  b.mask.resize(n, kTargetChannels);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Prepared& p = *items[static_cast<std::size_t>(i)];
    pts.push_back(&p.sample.points);
    maps.row(i) = p.depth_map;
    b.tokens.push_back(&p.tokens[static_cast<std::size_t>(variants[static_cast<std::size_t>(i)])]);
    b.y.row(i) = p.sample.targets.transpose();
    b.mask.row(i) = p.sample.target_mask.transpose();
  }
  b.points = nn::stack_points(pts);
  b.maps = Tensor::constant(std::move(maps));
  return b;
}

struct Forward {
  Tensor f_t, f_l, f_i, y_hat;
};

Forward forward(const nn::Model& m, const Batch& b) {
  Forward f;
  f.f_t = m.tactile(b.points);
  f.f_l = m.text(b.tokens);
  f.f_i = m.image(b.maps);
  f.y_hat = m.head(f.f_t);
  return f;
}

std::vector<int> variants_for(const std::vector<const Prepared*>& items, int variant) {
  std::vector<int> v;
  for (const auto* p : items) v.push_back(variant >= 0 ? variant : fixed_variant(p->id));
  return v;
}

std::vector<MatrixXd> snapshot(const nn::ParamSet& ps) {
  std::vector<MatrixXd> out;
  for (const auto& [_, t] : ps.items()) out.push_back(t.value());
  return out;
}

void restore(nn::ParamSet& ps, const std::vector<MatrixXd>& values) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    Tensor t = ps.items()[k].second;
    t.mutable_value() = values[k];
  }
}

}  // namespace

Embeddings embed(const nn::Model& model, const std::vector<const Prepared*>& items, int variant, int chunk) {
  Embeddings e;
  const auto n = static_cast<Eigen::Index>(items.size());
  e.tactile.resize(n, nn::kEmbeddingDim);
  e.text.resize(n, nn::kEmbeddingDim);
  e.image.resize(n, nn::kEmbeddingDim);
  e.regression.resize(n, kTargetChannels);
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min<Eigen::Index>(chunk, n - start);
    std::vector<const Prepared*> part(items.begin() + start, items.begin() + start + len);
    const Batch b = make_batch(part, variants_for(part, variant));
    const Forward f = forward(model, b);
    e.tactile.middleRows(start, len) = f.f_t.value();
    e.text.middleRows(start, len) = f.f_l.value();
    e.image.middleRows(start, len) = f.f_i.value();
    e.regression.middleRows(start, len) = f.y_hat.value();
  }
  return e;
}

double in_batch_top1(const MatrixXd& a, const MatrixXd& b, int batch) {
  if (a.rows() != b.rows()) throw StructuralError("in_batch_top1: size mismatch");
  const Eigen::Index n = a.rows();
  if (n == 0) return 0.0;
  const Eigen::Index full = n / batch;
  const Eigen::Index blocks = full == 0 ? 1 : full;
  const Eigen::Index size = full == 0 ? n : batch;
  long hits = 0, total = 0;
  for (Eigen::Index k = 0; k < blocks; ++k) {
    const MatrixXd sim = a.middleRows(k * size, size) * b.middleRows(k * size, size).transpose();
    for (Eigen::Index i = 0; i < size; ++i) {
      Eigen::Index best;
      sim.row(i).maxCoeff(&best);
      hits += best == i;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

TrainResult train(const std::vector<Prepared>& data, const TrainConfig& config, const lang::Vocabulary& vocab,
                  const TrainOutputs& out) {
  config.validate();
  std::vector<const Prepared*> train_set, val_set;
  for (const auto& p : data) (p.validation ? val_set : train_set).push_back(&p);
  if (train_set.size() < 2) throw std::invalid_argument("training split needs at least two samples");
  if (val_set.empty()) throw std::invalid_argument("validation split is empty");

  TrainResult res;
  res.model = nn::Model(vocab, synth::splitmix64(config.seed));
  nn::Model& model = res.model;
  nn::ParamSet params = model.params();
  if (!config.regression) {
    // Keep the head out of the optimizer so it stays at initialization.
    nn::ParamSet trimmed;
    for (const auto& [name, t] : params.items()) {
      if (name.rfind("head.", 0) != 0) trimmed.add(name, t);
    }
    params = trimmed;
  }
  res.initial_table = model.text.table.value();
  nn::Adam adam(params, {.lr = config.lr});

  const auto steps_per_epoch =
      static_cast<long>((train_set.size() + static_cast<std::size_t>(config.batch) - 1) / config.batch);
  const long total_steps = steps_per_epoch * config.epochs;
  long step = 0;
  std::vector<MatrixXd> best;
  std::ofstream metrics;
  if (out.metrics) {
    if (out.metrics->has_parent_path()) std::filesystem::create_directories(out.metrics->parent_path());
    metrics.open(*out.metrics, std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write metrics to " + out.metrics->string());
  }

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::mt19937_64 rng(synth::sample_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<const Prepared*> order = train_set;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<int> pick_variant(0, lang::kNumVariants - 1);

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = nn::cosine_lr(config.lr, step, total_steps);
    double sum_align = 0, sum_regre = 0;
    long batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      if (end - start < 2) continue;  // a single pair carries no contrastive signal
      std::vector<const Prepared*> part(order.begin() + start, order.begin() + end);
      std::vector<int> variants;
      for (std::size_t i = 0; i < part.size(); ++i) variants.push_back(pick_variant(rng));
      const Batch b = make_batch(part, variants);
      const Forward f = forward(model, b);
      const Tensor align = align_loss(f.f_t, f.f_l, f.f_i, model.log_tau, config.weights, config.mean_reduction);
      const Tensor regre = regression_loss(f.y_hat, b.y, b.mask);
      const Tensor loss = config.regression ? total_loss(align, regre) : align;
      params.zero_grad();
      loss.backward();
      adam.step(nn::cosine_lr(config.lr, step, total_steps));
      model.clamp_tau();
      ++step;
      sum_align += align.item();
      sum_regre += regre.item();
      ++batches;
    }
    m.train_align = batches ? sum_align / batches : 0.0;
    m.train_regression = batches ? sum_regre / batches : 0.0;
    m.tau = model.tau();

    const Embeddings e = embed(model, val_set, -1, config.eval_batch);
    double val_align = 0, val_regre = 0;
    long val_batches = 0;
    for (Eigen::Index s = 0; s < e.tactile.rows(); s += config.eval_batch) {
      const Eigen::Index len = std::min<Eigen::Index>(config.eval_batch, e.tactile.rows() - s);
      const auto slice = [&](const MatrixXd& x) { return Tensor::constant(x.middleRows(s, len)); };
      val_align += align_loss(slice(e.tactile), slice(e.text), slice(e.image), Tensor::constant(model.log_tau.value()),
                              config.weights, config.mean_reduction)
                       .item();
      MatrixXd y(len, kTargetChannels), mask(len, kTargetChannels);
      for (Eigen::Index i = 0; i < len; ++i) {
        y.row(i) = val_set[static_cast<std::size_t>(s + i)]->sample.targets.transpose();
        mask.row(i) = val_set[static_cast<std::size_t>(s + i)]->sample.target_mask.transpose();
      }
      val_regre += regression_loss(slice(e.regression), y, mask).item();
      ++val_batches;
    }
    m.val_align = val_align / val_batches;
    m.val_regression = val_regre / val_batches;
    m.val_total = m.val_align + (config.regression ? m.val_regression : 0.0);
    m.val_text_to_tactile_top1 = in_batch_top1(e.text, e.tactile, config.eval_batch);

    res.history.push_back(m);
    if (metrics) metrics << m.to_json().dump() << '\n' << std::flush;
    if (!out.quiet) std::cerr << m.to_json().dump() << '\n';
    if (m.val_text_to_tactile_top1 > res.best_top1) {
      res.best_top1 = m.val_text_to_tactile_top1;
      res.best_epoch = epoch;
      best = snapshot(model.params());
      if (out.checkpoint) {
        if (out.checkpoint->has_parent_path()) std::filesystem::create_directories(out.checkpoint->parent_path());
        io::json meta = {{"epoch", epoch}, {"val_text_to_tactile_top1", m.val_text_to_tactile_top1},
                         {"config", config.to_json()}};
        nn::save_checkpoint(*out.checkpoint, model.params(), vocab.hash(), meta);
      }
    }
  }
  nn::ParamSet all = model.params();
  restore(all, best);
  return res;
}

nn::Model load_model(const std::filesystem::path& ckpt, const lang::Vocabulary& vocab) {
  nn::Model model(vocab, 0);
  nn::ParamSet ps = model.params();
  nn::load_checkpoint(ckpt, ps, vocab.hash());
  return model;
}

}  // namespace fgcltp::pretrain
