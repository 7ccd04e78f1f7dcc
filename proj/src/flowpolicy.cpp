#include "fgcltp/flowpolicy.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace fgcltp::flow {

FlowNet::FlowNet(int action_dim_, int cond_dim_, std::mt19937_64& rng, int hidden)
    : action_dim(action_dim_),
      cond_dim(cond_dim_),
      layer1(action_dim_ + 1 + cond_dim_, hidden, rng),
      layer2(hidden, hidden, rng),
      layer3(hidden, action_dim_, rng) {}

Tensor FlowNet::operator()(const Tensor& x, const Tensor& t, const Tensor& cond) const {
  if (x.cols() != action_dim || t.cols() != 1 || cond.cols() != cond_dim || t.rows() != x.rows() ||
      cond.rows() != x.rows()) {
    throw StructuralError("flow net: expected x N x " + std::to_string(action_dim) + ", t N x 1, cond N x " +
                          std::to_string(cond_dim));
  }
  Tensor in = ad::concat_cols(x, t);
  if (cond_dim > 0) in = ad::concat_cols(in, cond);
  return layer3(ad::relu(layer2(ad::relu(layer1(in)))));
}

void FlowNet::register_params(nn::ParamSet& ps, const std::string& prefix) const {
  layer1.register_params(ps, prefix + ".layer1");
  layer2.register_params(ps, prefix + ".layer2");
  layer3.register_params(ps, prefix + ".layer3");
}

Tensor fm_loss(const FlowNet& net, const MatrixXd& x0, const MatrixXd& x1, const VectorXd& t, const Tensor& cond) {
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols() || t.size() != x0.rows()) {
    throw StructuralError("fm_loss: shape mismatch");
  }
  if (x0.rows() == 0) throw StructuralError("fm_loss: empty batch");
  const MatrixXd xt = (x0.array().colwise() * (1.0 - t.array())).matrix() + (x1.array().colwise() * t.array()).matrix();
  const Tensor v = net(Tensor::constant(xt), Tensor::constant(t), cond);
  const Tensor diff = ad::sub(v, Tensor::constant(x1 - x0));
  return ad::scale(ad::sum(ad::square(diff)), 1.0 / static_cast<double>(x0.rows()));
}

MatrixXd euler(const std::function<MatrixXd(const MatrixXd&, double)>& field, const MatrixXd& x0, int steps) {
  if (steps < 1) throw std::invalid_argument("sampler needs at least one step");
  MatrixXd x = x0;
  const double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) x += dt * field(x, static_cast<double>(k) / steps);
  return x;
}

MatrixXd sample(const FlowNet& net, const MatrixXd& x0, const MatrixXd& cond, int steps) {
  const Tensor c = Tensor::constant(cond);
  return euler(
      [&](const MatrixXd& x, double t) {
        return net(Tensor::constant(x), Tensor::constant(VectorXd::Constant(x.rows(), t)), c).value();
      },
      x0, steps);
}

ToyEnv::ToyEnv(EnvConfig config, std::uint64_t episode_seed) : config_(std::move(config)), seed_(episode_seed) {
  std::mt19937_64 rng(episode_seed);
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  target_depth_ = u(config_.target_depth_mm.lo, config_.target_depth_mm.hi);
  target_line_ = 0.0;
  state_.x = 0.0;
  state_.depth = u(config_.initial_depth_mm.lo, config_.initial_depth_mm.hi);
  state_.y = u(-config_.max_lateral_offset_mm, config_.max_lateral_offset_mm);
}

std::uint64_t ToyEnv::observation_seed() const {
  return synth::sample_seed(seed_, static_cast<std::uint64_t>(step_) + 1);
}

MarkerFrame render_observation(const EnvConfig& cfg, const EnvState& s, double target_line,
                               std::uint64_t noise_seed) {
  const double r = cfg.punch_radius_mm;
  const double lo = std::max(0.1 * cfg.extent.height_mm, r), hi = std::min(0.9 * cfg.extent.height_mm,
                                                                          cfg.extent.height_mm - r);
  const double v_mm = std::clamp(0.5 * cfg.extent.height_mm + (s.y - target_line), lo, hi);
  synth::ContactScript script = synth::ContactScript::press(std::max(s.depth, 0.0));
  script.noise_sigma_mm = cfg.noise_sigma_mm;
  script.seed = noise_seed;
  if (script.depth_mm <= 1e-6) {
    // No contact: only marker noise.
    MarkerFrame f = MarkerFrame::at_rest(cfg.extent);
    if (cfg.noise_sigma_mm > 0) {
      std::mt19937_64 rng(noise_seed);
      std::normal_distribution<double> n(0.0, cfg.noise_sigma_mm);
      for (int i = 0; i < kNumMarkers; ++i) {
        for (int k = 0; k < 3; ++k) f.deformed(i, k) += n(rng);
      }
    }
    return f;
  }
  synth::Indenter ind;
  ind.shape = synth::Cylinder{r};
  ind.center_uv = Vector2d(0.5, v_mm / cfg.extent.height_mm);
  return synth::indent(ind, script, cfg.extent).frame;
}

MarkerFrame ToyEnv::observe() const { return render_observation(config_, state_, target_line_, observation_seed()); }

VectorXd ToyEnv::goal() const {
  VectorXd g(1);
  g(0) = to_unit_range(target_depth_, 0.0, config_.extent.gel_depth_mm);
  return g;
}

void ToyEnv::step(const Eigen::Vector3d& action) {
  if (done()) throw std::logic_error("episode already finished");
  const Eigen::Vector3d a = action.cwiseMax(-config_.max_step_mm).cwiseMin(config_.max_step_mm);
  state_.x += a.x();
  state_.y += a.y();
  state_.depth = std::clamp(state_.depth + a.z(), 0.0, config_.extent.gel_depth_mm);
  ++step_;
}

Eigen::Vector3d expert_action(const ToyEnv& env, const ExpertConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma_mm);
  const EnvState& s = env.state();
  Eigen::Vector3d a(cfg.forward_mm, -cfg.gain * (s.y - env.target_line()), cfg.gain * (env.target_depth() - s.depth));
  for (int k = 0; k < 3; ++k) a(k) += noise(rng);
  const double m = env.config().max_step_mm;
  return a.cwiseMax(-m).cwiseMin(m);
}

bool episode_success(const EpisodeTrace& trace) {
  if (trace.states.empty()) return false;
  const std::size_t n = trace.states.size(), tail = std::min<std::size_t>(10, n);
  double mean_err = 0;
  for (std::size_t i = n - tail; i < n; ++i) mean_err += std::abs(trace.states[i].depth - trace.target_depth);
  mean_err /= static_cast<double>(tail);
  const EnvState& last = trace.states.back();
  return mean_err <= 0.2 && std::abs(last.depth - trace.target_depth) <= 0.2 &&
         std::abs(last.y - trace.target_line) <= 1.0;
}

VectorXd embed_observation(const nn::TactileEncoder& enc, const MarkerFrame& frame) {
  const NormalizedSample s = normalize(frame, ContactState{});
  return enc(nn::stack_points({&s.points})).value().row(0).transpose();
}

namespace {

std::uint64_t demo_episode_seed(std::uint64_t seed, int e) {
  return synth::sample_seed(synth::splitmix64(seed ^ 0xd3e0ULL), static_cast<std::uint64_t>(e));
}

std::uint64_t step_seed(std::uint64_t episode_seed, int step) {
  return synth::sample_seed(synth::splitmix64(episode_seed), static_cast<std::uint64_t>(step));
}

MatrixXd cond_row(const VectorXd& z, const VectorXd& goal) {
  MatrixXd c(1, z.size() + goal.size());
  c << z.transpose(), goal.transpose();
  return c;
}

nn::Linear clone(const nn::Linear& l) {
  nn::Linear c;
  c.weight = Tensor::parameter(l.weight.value());
  c.bias = Tensor::parameter(l.bias.value());
  return c;
}

nn::TactileEncoder clone(const nn::TactileEncoder& e) {
  nn::TactileEncoder c;
  c.point1 = clone(e.point1);
  c.point2 = clone(e.point2);
  c.head1 = clone(e.head1);
  c.head2 = clone(e.head2);
  return c;
}

}  // namespace

Demo collect_demos(const nn::TactileEncoder& enc, const EnvConfig& env_cfg, const ExpertConfig& expert, int episodes,
                   std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("need at least one demonstration episode");
  const long rows = static_cast<long>(episodes) * env_cfg.episode_steps;
  Demo d;
  d.cond.resize(rows, nn::kEmbeddingDim + 1);
  d.actions.resize(rows, 3);
  long r = 0;
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t es = demo_episode_seed(seed, e);
    ToyEnv env(env_cfg, es);
    while (!env.done()) {
      std::mt19937_64 rng(step_seed(es, env.step_index()));
      d.keys.push_back({env.state(), env.target_line(), env.observation_seed()});
      d.cond.row(r) = cond_row(embed_observation(enc, env.observe()), env.goal());
      const Eigen::Vector3d a = expert_action(env, expert, rng);
      d.actions.row(r) = a.transpose() / kActionScale;
      env.step(a);
      ++r;
    }
  }
  return d;
}

PolicyTrainConfig PolicyTrainConfig::from_json(const io::json& j) {
  PolicyTrainConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (k == "episodes") c.episodes = v.get<int>();
    else if (k == "steps") c.steps = v.get<int>();
    else if (k == "batch") c.batch = v.get<int>();
    else if (k == "lr") c.lr = v.get<double>();
    else if (k == "sample_steps") c.sample_steps = v.get<int>();
    else if (k == "stage2") c.stage2 = v.get<bool>();
    else if (k == "stage2_steps") c.stage2_steps = v.get<int>();
    else if (k == "stage2_batch") c.stage2_batch = v.get<int>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else throw std::invalid_argument("unknown key '" + k + "'");
  }
  if (c.episodes < 1 || c.steps < 1 || c.batch < 1 || c.sample_steps < 1 || c.stage2_steps < 0 ||
      c.stage2_batch < 1 || !(c.lr > 0)) {
    throw std::invalid_argument("policy training counts and lr must be positive");
  }
  return c;
}

io::json PolicyTrainConfig::to_json() const {
  return {{"episodes", episodes}, {"steps", steps},           {"batch", batch},
          {"lr", lr},             {"sample_steps", sample_steps}, {"stage2", stage2},
          {"stage2_steps", stage2_steps}, {"stage2_batch", stage2_batch}, {"seed", seed}};
}

Eigen::Vector3d Policy::act(const ToyEnv& env, std::mt19937_64& rng) const {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd x0(1, net.action_dim);
  for (int k = 0; k < net.action_dim; ++k) x0(0, k) = n(rng);
  const MatrixXd cond = cond_row(embed_observation(encoder, env.observe()), env.goal());
  const MatrixXd x = sample(net, x0, cond, sample_steps);
  return x.row(0).head<3>().transpose() * kActionScale;
}

PolicyTrainResult train_policy(const nn::TactileEncoder& encoder, const PolicyTrainConfig& cfg, const EnvConfig& env,
                               const ExpertConfig& expert) {
  PolicyTrainResult res;
  std::mt19937_64 rng(synth::splitmix64(cfg.seed ^ 0xf10eULL));
  res.policy.net = FlowNet(3, nn::kEmbeddingDim + 1, rng);
  res.policy.encoder = encoder;  // shared, frozen in stage 1
  res.policy.sample_steps = cfg.sample_steps;

  const Demo demo = collect_demos(encoder, env, expert, cfg.episodes, cfg.seed);
  const Eigen::Index rows = demo.cond.rows();

  nn::ParamSet flow_params;
  res.policy.net.register_params(flow_params);
  nn::Adam adam(flow_params, {.lr = cfg.lr});
  std::uniform_int_distribution<Eigen::Index> pick(0, rows - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto draw = [&](int batch, std::vector<Eigen::Index>& idx, MatrixXd& x0, MatrixXd& x1, VectorXd& t) {
    idx.resize(static_cast<std::size_t>(batch));
    x0.resize(batch, 3);
    x1.resize(batch, 3);
    t.resize(batch);
    for (int i = 0; i < batch; ++i) {
      idx[static_cast<std::size_t>(i)] = pick(rng);
      x1.row(i) = demo.actions.row(idx[static_cast<std::size_t>(i)]);
      for (int k = 0; k < 3; ++k) x0(i, k) = gauss(rng);
      t(i) = unit(rng);
    }
  };

  std::vector<Eigen::Index> idx;
  MatrixXd x0, x1;
  VectorXd t;
  double running = 0;
  const int log_every = 100;
  for (int s = 0; s < cfg.steps; ++s) {
    draw(cfg.batch, idx, x0, x1, t);
    MatrixXd cond(cfg.batch, demo.cond.cols());
    for (int i = 0; i < cfg.batch; ++i) cond.row(i) = demo.cond.row(idx[static_cast<std::size_t>(i)]);
    const Tensor loss = fm_loss(res.policy.net, x0, x1, t, Tensor::constant(std::move(cond)));
    flow_params.zero_grad();
    loss.backward();
    adam.step(nn::cosine_lr(cfg.lr, s, cfg.steps));
    running += loss.item();
    if ((s + 1) % log_every == 0 || s + 1 == cfg.steps) {
      res.loss_history.push_back(running / ((s % log_every) + 1));
      running = 0;
    }
  }

  if (cfg.stage2 && cfg.stage2_steps > 0) {
    res.policy.encoder = clone(encoder);
    nn::ParamSet joint;
    res.policy.net.register_params(joint);
    res.policy.encoder.register_params(joint);
    nn::Adam adam2(joint, {.lr = 0.1 * cfg.lr});
    for (int s = 0; s < cfg.stage2_steps; ++s) {
      draw(cfg.stage2_batch, idx, x0, x1, t);
      std::vector<NormalizedSample> obs;
      obs.reserve(idx.size());
      MatrixXd goals(cfg.stage2_batch, 1);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const ObservationKey& key = demo.keys[static_cast<std::size_t>(idx[i])];
        obs.push_back(normalize(render_observation(env, key.state, key.target_line, key.noise_seed), ContactState{}));
        goals(static_cast<Eigen::Index>(i), 0) = demo.cond(idx[i], nn::kEmbeddingDim);
      }
      std::vector<const PointFeatures*> pts;
      for (const auto& o : obs) pts.push_back(&o.points);
      const Tensor z = res.policy.encoder(nn::stack_points(pts));
      const Tensor cond = ad::concat_cols(z, Tensor::constant(goals));
      const Tensor loss = fm_loss(res.policy.net, x0, x1, t, cond);
      joint.zero_grad();
      loss.backward();
      adam2.step(nn::cosine_lr(0.1 * cfg.lr, s, cfg.stage2_steps));
      res.loss_history.push_back(loss.item());
    }
  }
  return res;
}

RolloutResult rollout(const std::function<Eigen::Vector3d(const ToyEnv&, std::mt19937_64&)>& policy,
                      const EnvConfig& env_cfg, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  RolloutResult res;
  int wins = 0;
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t es = synth::sample_seed(seed, static_cast<std::uint64_t>(e));
    ToyEnv env(env_cfg, es);
    EpisodeTrace trace;
    trace.target_depth = env.target_depth();
    trace.target_line = env.target_line();
    while (!env.done()) {
      std::mt19937_64 rng(step_seed(es, env.step_index()));
      const Eigen::Vector3d a = policy(env, rng);
      env.step(a);
      trace.actions.push_back(a);
      trace.states.push_back(env.state());
    }
    wins += episode_success(trace);
    res.traces.push_back(std::move(trace));
  }
  res.success_rate = static_cast<double>(wins) / episodes;
  return res;
}

RolloutResult run_policy(const Policy& policy, const EnvConfig& env, int episodes, std::uint64_t seed) {
  return rollout([&](const ToyEnv& e, std::mt19937_64& rng) { return policy.act(e, rng); }, env, episodes, seed);
}

void save_policy(const std::filesystem::path& path, const Policy& policy, std::uint64_t vocab_hash,
                 const io::json& meta) {
  nn::ParamSet ps;
  policy.net.register_params(ps);
  policy.encoder.register_params(ps);
  io::json m = meta;
  m["sample_steps"] = policy.sample_steps;
  m["action_dim"] = policy.net.action_dim;
  m["cond_dim"] = policy.net.cond_dim;
  nn::save_checkpoint(path, ps, vocab_hash, m);
}

Policy load_policy(const std::filesystem::path& path, std::uint64_t vocab_hash) {
  const nn::CheckpointData data = nn::read_checkpoint(path);
  Policy p;
  std::mt19937_64 rng(0);
  p.net = FlowNet(data.meta.at("action_dim").get<int>(), data.meta.at("cond_dim").get<int>(), rng);
  p.encoder = nn::TactileEncoder(rng);
  p.sample_steps = data.meta.at("sample_steps").get<int>();
  nn::ParamSet ps;
  p.net.register_params(ps);
  p.encoder.register_params(ps);
  nn::load_checkpoint(path, ps, vocab_hash);
  return p;
}

void write_trajectories(const std::filesystem::path& path, const std::vector<EpisodeTrace>& traces) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trajectories to " + path.string());
  out << "episode,step,x,y,depth,action_dx,action_dy,action_dz,target_depth,target_line\n";
  out << std::setprecision(17);
  for (std::size_t e = 0; e < traces.size(); ++e) {
    const EpisodeTrace& t = traces[e];
    for (std::size_t s = 0; s < t.states.size(); ++s) {
      const EnvState& st = t.states[s];
      const Eigen::Vector3d& a = t.actions[s];
      out << e << ',' << s + 1 << ',' << st.x << ',' << st.y << ',' << st.depth << ',' << a.x() << ',' << a.y() << ','
          << a.z() << ',' << t.target_depth << ',' << t.target_line << '\n';
    }
  }
}

}  // namespace fgcltp::flow
