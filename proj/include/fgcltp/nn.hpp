#pragma once

#include "fgcltp/autodiff.hpp"
#include "fgcltp/core.hpp"
#include "fgcltp/io.hpp"
#include "fgcltp/language.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fgcltp::nn {

using ad::Tensor;

inline constexpr int kEmbeddingDim = 64;

/// Named, ordered parameter list. Order is the serialization and update order.
class ParamSet {
 public:
  void add(std::string name, Tensor t);
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<Tensor> tensors() const;
  Tensor find(const std::string& name) const;  // undefined tensor when absent
  void zero_grad();
  std::size_t count() const;  // scalar parameter count
  void append(const ParamSet& other);

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  Linear() = default;
  Linear(int in, int out, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x) const;
  void register_params(ParamSet& ps, const std::string& prefix) const;
};

/// Stacks per-sample point features into a (B*529) x 6 constant tensor.
Tensor stack_points(const std::vector<const PointFeatures*>& batch);

/// Normal-displacement depth map (-dz / gel depth) per marker, B x 529.
MatrixXd depth_maps(const std::vector<const MarkerFrame*>& frames);

struct TactileEncoder {
  Linear point1, point2, head1, head2;

  TactileEncoder() = default;
  explicit TactileEncoder(std::mt19937_64& rng);
  /// points: (B*529) x 6. Returns B x 64 unit rows.
  Tensor operator()(const Tensor& points) const;
  void register_params(ParamSet& ps) const;
};

struct TextEncoder {
  Tensor table;       // |V| x 64, frozen rows flagged
  Tensor positional;  // L_max x 64
  Linear proj;
  VectorXd pad_fallback;  // pre-projection vector for all-pad sequences

  TextEncoder() = default;
  TextEncoder(const lang::Vocabulary& vocab, std::mt19937_64& rng);
  Tensor operator()(const std::vector<const lang::TokenSequence*>& batch) const;
  void register_params(ParamSet& ps) const;
};

struct ImageEncoder {
  Linear layer1, layer2;

  ImageEncoder() = default;
  explicit ImageEncoder(std::mt19937_64& rng);
  /// maps: B x 529 depth maps.
  Tensor operator()(const Tensor& maps) const;
  void register_params(ParamSet& ps) const;
};

struct RegressionHead {
  Linear layer1, layer2;

  RegressionHead() = default;
  explicit RegressionHead(std::mt19937_64& rng);
  Tensor operator()(const Tensor& f_t) const;  // B x 8
  void register_params(ParamSet& ps) const;
};

inline constexpr double kLogTauMin = -6.907755278982137;  // log(1e-3)
inline constexpr double kLogTauMax = 2.302585092994046;   // log(10)

/// The full set of trainable components.
struct Model {
  TactileEncoder tactile;
  TextEncoder text;
  ImageEncoder image;
  RegressionHead head;
  Tensor log_tau;  // 1 x 1
  std::uint64_t vocab_hash = 0;

  Model() = default;
  Model(const lang::Vocabulary& vocab, std::uint64_t seed);
  ParamSet params() const;
  double tau() const;
  void clamp_tau();
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a parameter set. Frozen rows keep their exact values.
class Adam {
 public:
  Adam(ParamSet params, AdamConfig config = {});
  void step(double lr);
  void step() { step(config_.lr); }
  const AdamConfig& config() const { return config_; }
  long steps() const { return t_; }

 private:
  ParamSet params_;
  AdamConfig config_;
  std::vector<MatrixXd> m_, v_;
  long t_ = 0;
};

/// lr at `step` of `total`: base * (1 + cos(pi * step / total)) / 2.
double cosine_lr(double base, long step, long total);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Header ("FGCK", version, metadata JSON, shape table), raw f64 buffers, vocabulary hash.
void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, std::uint64_t vocab_hash,
                     const io::json& meta = io::json::object());

/// Loads values into `params` by name. Throws on missing tensors, shape or vocabulary mismatch.
io::json load_checkpoint(const std::filesystem::path& path, ParamSet& params, std::uint64_t vocab_hash);

/// Raw contents of a checkpoint.
struct CheckpointData {
  io::json meta;
  std::vector<std::pair<std::string, MatrixXd>> tensors;
  std::uint64_t vocab_hash = 0;
};
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace fgcltp::nn
