#include "fgcltp/nn.hpp"

#include <cmath>
#include <cstring>

namespace fgcltp::nn {

namespace {

MatrixXd uniform_init(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-bound, bound);
  MatrixXd m(rows, cols);
  // Fill row by row so the draw order does not depend on storage order.
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = d(rng);
  }
  return m;
}

MatrixXd gaussian_init(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, stddev);
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = d(rng);
  }
  return m;
}

}  // namespace

void ParamSet::add(std::string name, Tensor t) {
  for (const auto& [n, _] : items_) {
    if (n == name) throw std::invalid_argument("duplicate parameter name " + name);
  }
  items_.emplace_back(std::move(name), std::move(t));
}

std::vector<Tensor> ParamSet::tensors() const {
  std::vector<Tensor> out;
  for (const auto& [_, t] : items_) out.push_back(t);
  return out;
}

Tensor ParamSet::find(const std::string& name) const {
  for (const auto& [n, t] : items_) {
    if (n == name) return t;
  }
  return {};
}

void ParamSet::zero_grad() {
  for (auto& [_, t] : items_) t.zero_grad();
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : items_) n += static_cast<std::size_t>(t.value().size());
  return n;
}

void ParamSet::append(const ParamSet& other) {
  for (const auto& [n, t] : other.items_) add(n, t);
}

Linear::Linear(int in, int out, std::mt19937_64& rng)
    : weight(Tensor::parameter(uniform_init(in, out, std::sqrt(6.0 / (in + out)), rng))),
      bias(Tensor::parameter(MatrixXd::Zero(1, out))) {}

Tensor Linear::operator()(const Tensor& x) const { return ad::add(ad::matmul(x, weight), bias); }

void Linear::register_params(ParamSet& ps, const std::string& prefix) const {
  ps.add(prefix + ".weight", weight);
  ps.add(prefix + ".bias", bias);
}

Tensor stack_points(const std::vector<const PointFeatures*>& batch) {
  MatrixXd m(static_cast<Eigen::Index>(batch.size()) * kNumMarkers, kPointFeatures);
  for (std::size_t b = 0; b < batch.size(); ++b) m.middleRows(b * kNumMarkers, kNumMarkers) = *batch[b];
  return Tensor::constant(std::move(m));
}

MatrixXd depth_maps(const std::vector<const MarkerFrame*>& frames) {
  MatrixXd m(static_cast<Eigen::Index>(frames.size()), kNumMarkers);
  for (std::size_t b = 0; b < frames.size(); ++b) {
    const MarkerFrame& f = *frames[b];
    m.row(static_cast<Eigen::Index>(b)) = -(f.deformed.col(2) - f.rest.col(2)).transpose() / f.extent.gel_depth_mm;
  }
  return m;
}

TactileEncoder::TactileEncoder(std::mt19937_64& rng)
    : point1(kPointFeatures, 64, rng), point2(64, 128, rng), head1(256, 128, rng), head2(128, kEmbeddingDim, rng) {}

Tensor TactileEncoder::operator()(const Tensor& points) const {
  if (points.cols() != kPointFeatures || points.rows() % kNumMarkers != 0) {
    throw StructuralError("tactile encoder expects (B*529) x 6 points, got " + std::to_string(points.rows()) + "x" +
                          std::to_string(points.cols()));
  }
  const Tensor h = ad::relu(point2(ad::relu(point1(points))));
  const Tensor pooled = ad::concat_cols(ad::block_max(h, kNumMarkers), ad::block_mean(h, kNumMarkers));
  return ad::l2_normalize_rows(head2(ad::relu(head1(pooled))));
}

void TactileEncoder::register_params(ParamSet& ps) const {
  point1.register_params(ps, "tactile.point1");
  point2.register_params(ps, "tactile.point2");
  head1.register_params(ps, "tactile.head1");
  head2.register_params(ps, "tactile.head2");
}

TextEncoder::TextEncoder(const lang::Vocabulary& vocab, std::mt19937_64& rng)
    : table(Tensor::parameter(gaussian_init(vocab.size(), kEmbeddingDim, 1.0 / std::sqrt(kEmbeddingDim), rng))),
      positional(Tensor::parameter(gaussian_init(lang::kMaxTokens, kEmbeddingDim, 0.02, rng))),
      proj(kEmbeddingDim, kEmbeddingDim, rng),
      pad_fallback(VectorXd::Constant(kEmbeddingDim, 1.0 / std::sqrt(kEmbeddingDim))) {
  std::vector<std::uint8_t> frozen(static_cast<std::size_t>(vocab.size()));
  const auto learnable = vocab.learnable_mask();
  for (std::size_t i = 0; i < frozen.size(); ++i) frozen[i] = learnable[i] ? 0 : 1;
  table.set_frozen_rows(std::move(frozen));
}

Tensor TextEncoder::operator()(const std::vector<const lang::TokenSequence*>& batch) const {
  const auto b = static_cast<Eigen::Index>(batch.size());
  std::vector<int> ids, positions;
  std::vector<std::pair<Eigen::Index, int>> owner;  // (row, count) per sequence start
  MatrixXd fallback = MatrixXd::Zero(b, kEmbeddingDim);
  for (Eigen::Index r = 0; r < b; ++r) {
    const lang::TokenSequence& s = *batch[static_cast<std::size_t>(r)];
    for (int i = 0; i < s.length; ++i) {
      if (s.ids[i] < 0 || s.ids[i] >= table.rows()) {
        throw std::out_of_range("token id " + std::to_string(s.ids[i]) + " outside the vocabulary");
      }
      ids.push_back(s.ids[i]);
      positions.push_back(i);
    }
    owner.emplace_back(r, s.length);
    if (s.length == 0) fallback.row(r) = pad_fallback.transpose();
  }
  Tensor pooled = Tensor::constant(fallback);
  if (!ids.empty()) {
    MatrixXd pool = MatrixXd::Zero(b, static_cast<Eigen::Index>(ids.size()));
    Eigen::Index col = 0;
    for (const auto& [r, len] : owner) {
      for (int i = 0; i < len; ++i) pool(r, col++) = 1.0 / len;
    }
    const Tensor tokens = ad::add(ad::gather_rows(table, ids), ad::gather_rows(positional, positions));
    pooled = ad::add(ad::matmul(Tensor::constant(std::move(pool)), tokens), pooled);
  }
  return ad::l2_normalize_rows(proj(pooled));
}

void TextEncoder::register_params(ParamSet& ps) const {
  ps.add("text.table", table);
  ps.add("text.positional", positional);
  proj.register_params(ps, "text.proj");
}

ImageEncoder::ImageEncoder(std::mt19937_64& rng) : layer1(kNumMarkers, 256, rng), layer2(256, kEmbeddingDim, rng) {}

Tensor ImageEncoder::operator()(const Tensor& maps) const {
  if (maps.cols() != kNumMarkers) throw StructuralError("image encoder expects B x 529 depth maps");
  return ad::l2_normalize_rows(layer2(ad::relu(layer1(maps))));
}

void ImageEncoder::register_params(ParamSet& ps) const {
  layer1.register_params(ps, "image.layer1");
  layer2.register_params(ps, "image.layer2");
}

RegressionHead::RegressionHead(std::mt19937_64& rng)
    : layer1(kEmbeddingDim, 64, rng), layer2(64, kTargetChannels, rng) {}

Tensor RegressionHead::operator()(const Tensor& f_t) const { return layer2(ad::relu(layer1(f_t))); }

void RegressionHead::register_params(ParamSet& ps) const {
  layer1.register_params(ps, "head.layer1");
  layer2.register_params(ps, "head.layer2");
}

Model::Model(const lang::Vocabulary& vocab, std::uint64_t seed) : vocab_hash(vocab.hash()) {
  std::mt19937_64 rng(seed);
  tactile = TactileEncoder(rng);
  text = TextEncoder(vocab, rng);
  image = ImageEncoder(rng);
  head = RegressionHead(rng);
  log_tau = Tensor::parameter(MatrixXd::Constant(1, 1, std::log(0.07)));
}

ParamSet Model::params() const {
  ParamSet ps;
  tactile.register_params(ps);
  text.register_params(ps);
  image.register_params(ps);
  head.register_params(ps);
  ps.add("log_tau", log_tau);
  return ps;
}

double Model::tau() const { return std::exp(log_tau.item()); }

void Model::clamp_tau() {
  double& v = log_tau.mutable_value()(0, 0);
  v = std::clamp(v, kLogTauMin + 1e-9, kLogTauMax - 1e-9);
}

Adam::Adam(ParamSet params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& [_, t] : params_.items()) {
    m_.push_back(MatrixXd::Zero(t.rows(), t.cols()));
    v_.push_back(MatrixXd::Zero(t.rows(), t.cols()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.items().size(); ++k) {
    Tensor t = params_.items()[k].second;
    if (!t.requires_grad() || !t.has_grad()) continue;
    const MatrixXd& g = t.grad();
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    MatrixXd update = lr * (m_[k] / c1).array() / ((v_[k] / c2).array().sqrt() + config_.eps);
    if (!t.frozen_rows().empty()) {
      for (Eigen::Index r = 0; r < update.rows(); ++r) {
        if (t.row_frozen(r)) update.row(r).setZero();
      }
    }
    t.mutable_value() -= update;
  }
}

double cosine_lr(double base, long step, long total) {
  if (total <= 0) return base;
  const double x = std::clamp(static_cast<double>(step) / static_cast<double>(total), 0.0, 1.0);
  return base * 0.5 * (1.0 + std::cos(kPi * x));
}

namespace {

constexpr char kCkptMagic[4] = {'F', 'G', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t at = 0;

  void need(std::size_t n) const {
    if (at + n > buf.size()) throw CheckpointError("checkpoint truncated");
  }
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf.data() + at, sizeof(T));
    at += sizeof(T);
    return v;
  }
  std::string get_str() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + at), n);
    at += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, std::uint64_t vocab_hash,
                     const io::json& meta) {
  std::vector<std::uint8_t> out(kCkptMagic, kCkptMagic + 4);
  put<std::uint32_t>(out, kCkptVersion);
  put_str(out, meta.dump());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.items().size()));
  for (const auto& [name, t] : params.items()) {
    put_str(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
  }
  for (const auto& [_, t] : params.items()) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) put<double>(out, t.value()(i, j));
    }
  }
  put<std::uint64_t>(out, vocab_hash);
  io::write_bytes(path, out);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  const auto buf = io::read_bytes(path);
  Reader r{buf};
  r.need(4);
  if (std::memcmp(buf.data(), kCkptMagic, 4) != 0) throw CheckpointError("not a checkpoint file: " + path.string());
  r.at = 4;
  const auto version = r.get<std::uint32_t>();
  if (version != kCkptVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  CheckpointData data;
  data.meta = io::json::parse(r.get_str());
  const auto count = r.get<std::uint32_t>();
  std::vector<std::tuple<std::string, std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.get_str();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    shapes.emplace_back(std::move(name), rows, cols);
  }
  for (const auto& [name, rows, cols] : shapes) {
    MatrixXd m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.get<double>();
    }
    data.tensors.emplace_back(name, std::move(m));
  }
  data.vocab_hash = r.get<std::uint64_t>();
  if (r.at != buf.size()) throw CheckpointError("trailing bytes in checkpoint");
  return data;
}

io::json load_checkpoint(const std::filesystem::path& path, ParamSet& params, std::uint64_t vocab_hash) {
  CheckpointData data = read_checkpoint(path);
  if (data.vocab_hash != vocab_hash) {
    throw CheckpointError("vocabulary hash mismatch: checkpoint " + io::hex64(data.vocab_hash) + ", expected " +
                          io::hex64(vocab_hash));
  }
  for (const auto& [name, t0] : params.items()) {
    Tensor t = t0;
    auto it = std::find_if(data.tensors.begin(), data.tensors.end(), [&](const auto& p) { return p.first == name; });
    if (it == data.tensors.end()) throw CheckpointError("checkpoint lacks tensor " + name);
    if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
      throw CheckpointError("shape mismatch for tensor " + name);
    }
    t.mutable_value() = it->second;
  }
  return data.meta;
}

}  // namespace fgcltp::nn
