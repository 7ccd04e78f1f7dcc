#pragma once

#include "fgcltp/autodiff.hpp"
#include "fgcltp/nn.hpp"
#include "fgcltp/synth.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace fgcltp::flow {

using ad::Tensor;

/// Velocity field v(x_t, t, cond): MLP [action + 1 + cond] -> 128 -> 128 -> action.
struct FlowNet {
  int action_dim = 3;
  int cond_dim = nn::kEmbeddingDim + 1;
  nn::Linear layer1, layer2, layer3;

  FlowNet() = default;
  FlowNet(int action_dim, int cond_dim, std::mt19937_64& rng, int hidden = 128);
  Tensor operator()(const Tensor& x, const Tensor& t, const Tensor& cond) const;
  void register_params(nn::ParamSet& ps, const std::string& prefix = "flow") const;
};

/// mean_i |net(x_t, t, c)_i - (x1_i - x0_i)|^2 with x_t = (1 - t) x0 + t x1.
Tensor fm_loss(const FlowNet& net, const MatrixXd& x0, const MatrixXd& x1, const VectorXd& t, const Tensor& cond);

/// Euler integration x <- x + net(x, k/K, cond) / K from the given noise rows.
MatrixXd sample(const FlowNet& net, const MatrixXd& x0, const MatrixXd& cond, int steps);

/// Generic vector field variant of the Euler sampler (used to check exactness).
MatrixXd euler(const std::function<MatrixXd(const MatrixXd&, double)>& field, const MatrixXd& x0, int steps);

struct EnvConfig {
  int episode_steps = 40;
  double punch_radius_mm = 2.5;
  synth::Range target_depth_mm{0.5, 3.0};
  synth::Range initial_depth_mm{0.2, 3.0};
  double max_lateral_offset_mm = 3.0;
  double max_step_mm = 0.5;
  double noise_sigma_mm = 0.02;  // marker noise of the observation
  SensorExtent extent;
};

struct EnvState {
  double x = 0, y = 0, depth = 0;
};

/// Contact-following task: slide along a line at a target indentation depth.
class ToyEnv {
 public:
  ToyEnv(EnvConfig config, std::uint64_t episode_seed);

  const EnvState& state() const { return state_; }
  double target_depth() const { return target_depth_; }
  double target_line() const { return target_line_; }
  int step_index() const { return step_; }
  bool done() const { return step_ >= config_.episode_steps; }
  const EnvConfig& config() const { return config_; }

  /// Marker frame of the current indentation (flat punch, contact shifted by the lateral error).
  MarkerFrame observe() const;
  std::uint64_t observation_seed() const;
  /// Goal vector: target depth mapped to [-1, 1].
  VectorXd goal() const;
  /// Applies (dx, dy, dz) in mm, clamped per component.
  void step(const Eigen::Vector3d& action);

 private:
  EnvConfig config_;
  std::uint64_t seed_;
  EnvState state_;
  double target_depth_ = 1.0, target_line_ = 0.0;
  int step_ = 0;
};

/// Observation for a given state; the env's observe() is this with its own noise seed.
MarkerFrame render_observation(const EnvConfig& cfg, const EnvState& state, double target_line,
                               std::uint64_t noise_seed);

struct ExpertConfig {
  double forward_mm = 0.25;
  double gain = 0.5;
  double noise_sigma_mm = 0.05;
};

Eigen::Vector3d expert_action(const ToyEnv& env, const ExpertConfig& cfg, std::mt19937_64& rng);

struct EpisodeTrace {
  std::vector<EnvState> states;  // after each step
  std::vector<Eigen::Vector3d> actions;
  double target_depth = 0, target_line = 0;
};

/// Success: mean |depth - d*| over the last 10 steps <= 0.2, terminal |depth - d*| <= 0.2 and
/// terminal lateral deviation <= 1 mm.
bool episode_success(const EpisodeTrace& trace);

struct ObservationKey {
  EnvState state;
  double target_line = 0;
  std::uint64_t noise_seed = 0;
};

struct Demo {
  MatrixXd cond;     // N x (64 + 1): tactile embedding and goal
  MatrixXd actions;  // N x 3, scaled
  std::vector<ObservationKey> keys;  // regenerates row observations
};

inline constexpr double kActionScale = 0.5;  // mm per unit action

/// Tactile embedding of a single observation with the frozen encoder.
VectorXd embed_observation(const nn::TactileEncoder& enc, const MarkerFrame& frame);

Demo collect_demos(const nn::TactileEncoder& enc, const EnvConfig& env, const ExpertConfig& expert, int episodes,
                   std::uint64_t seed);

struct PolicyTrainConfig {
  int episodes = 500;
  int steps = 6000;
  int batch = 256;
  double lr = 1e-3;
  int sample_steps = 16;
  bool stage2 = false;
  int stage2_steps = 300;
  int stage2_batch = 32;
  std::uint64_t seed = 0;

  static PolicyTrainConfig from_json(const io::json& j);
  io::json to_json() const;
};

struct Policy {
  FlowNet net;
  nn::TactileEncoder encoder;
  int sample_steps = 16;

  /// Action in mm for the current observation; noise drawn from `rng`.
  Eigen::Vector3d act(const ToyEnv& env, std::mt19937_64& rng) const;
};

struct PolicyTrainResult {
  Policy policy;
  std::vector<double> loss_history;  // per logged chunk
};

/// Stage 1 trains the flow network on frozen encoder embeddings; stage 2 (optional) also
/// fine-tunes the tactile encoder at a tenth of the learning rate.
PolicyTrainResult train_policy(const nn::TactileEncoder& encoder, const PolicyTrainConfig& cfg,
                               const EnvConfig& env = {}, const ExpertConfig& expert = {});

struct RolloutResult {
  double success_rate = 0;
  std::vector<EpisodeTrace> traces;
};

/// Runs `episodes` evaluation episodes; episode e uses env seed derived from (seed, e) and a
/// noise stream seeded from (episode, step).
RolloutResult rollout(const std::function<Eigen::Vector3d(const ToyEnv&, std::mt19937_64&)>& policy,
                      const EnvConfig& env, int episodes, std::uint64_t seed);

RolloutResult run_policy(const Policy& policy, const EnvConfig& env, int episodes, std::uint64_t seed);

void save_policy(const std::filesystem::path& path, const Policy& policy, std::uint64_t vocab_hash,
                 const io::json& meta = io::json::object());
Policy load_policy(const std::filesystem::path& path, std::uint64_t vocab_hash);

void write_trajectories(const std::filesystem::path& path, const std::vector<EpisodeTrace>& traces);

}  // namespace fgcltp::flow
