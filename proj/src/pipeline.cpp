#include "fgcltp/pipeline.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

namespace fgcltp::pipeline {

namespace {

// Runs `parse` and re-throws any failure as a ConfigError rooted at `field`.
template <typename F>
auto parse_section(const std::string& field, const io::json& j, F&& parse) {
  if (!j.is_object()) throw ConfigError(field, "expected an object");
  try {
    return parse(j);
  } catch (const ConfigError& e) {
    throw ConfigError(field + "." + e.field(), e.what());
  } catch (const std::exception& e) {
    std::string msg = e.what();
    // Unknown keys come back as "unknown key 'x'"; name the full path.
    const auto q = msg.find("unknown key '");
    if (q != std::string::npos) {
      const auto start = q + 13, stop = msg.find('\'', start);
      throw ConfigError(field + "." + msg.substr(start, stop - start), "unknown key");
    }
    throw ConfigError(field, msg);
  }
}

std::string sha(const io::json& j) { return io::hex64(io::fnv1a(j.dump())); }

void require(const fs::path& p, const std::string& stage) {
  if (!fs::exists(p)) throw MissingArtifact(p, stage);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const io::json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  PipelineConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const io::json& v = it.value();
    if (k == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) throw ConfigError("seed", "expected a non-negative integer");
      c.seed = v.get<std::uint64_t>();
    } else if (k == "generator") {
      c.generator = parse_section(k, v, [](const io::json& s) {
        GeneratorSection g;
        io::json rest = s;
        if (rest.contains("n")) {
          const long long n = rest["n"].get<long long>();
          if (n < 1) throw std::invalid_argument("n must be >= 1");
          g.n = static_cast<std::size_t>(n);
          rest.erase("n");
        }
        g.corpus = synth::CorpusConfig::from_json(rest);
        return g;
      });
    } else if (k == "annotator") {
      c.annotator = parse_section(k, v, [](const io::json& s) { return annotate::AnnotatorConfig::from_json(s); });
    } else if (k == "tokenizer") {
      c.tokenizer = parse_section(k, v, [](const io::json& s) {
        TokenizerSection t;
        for (auto i = s.begin(); i != s.end(); ++i) {
          if (i.key() == "style") t.style = lang::parse_style(i.value().get<std::string>());
          else throw std::invalid_argument("unknown key '" + i.key() + "'");
        }
        return t;
      });
    } else if (k == "training") {
      if (v.is_object() && v.contains("style")) {
        throw ConfigError("training.style", "the description style is set by tokenizer.style");
      }
      c.training = parse_section(k, v, [](const io::json& s) { return pretrain::TrainConfig::from_json(s); });
    } else if (k == "evaluation") {
      c.evaluation = parse_section(k, v, [](const io::json& s) { return eval::EvalConfig::from_json(s); });
    } else if (k == "policy") {
      c.policy = parse_section(k, v, [](const io::json& s) {
        PolicySection p;
        io::json rest = s;
        if (rest.contains("eval_episodes")) {
          p.eval_episodes = rest["eval_episodes"].get<int>();
          if (p.eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
          rest.erase("eval_episodes");
        }
        p.train = flow::PolicyTrainConfig::from_json(rest);
        return p;
      });
    } else {
      throw ConfigError(k, "unknown key");
    }
  }
  c.training.style = c.tokenizer.style;
  // An explicit top-level seed drives every stage; section seeds only apply without it.
  if (j.contains("seed")) c.apply_seed(c.seed);
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config " + path.string());
  io::json j;
  try {
    j = io::json::parse(in);
  } catch (const io::json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
  return from_json(j);
}

io::json PipelineConfig::to_json() const {
  io::json gen = generator.corpus.to_json();
  gen["n"] = generator.n;
  io::json train = training.to_json();
  train.erase("style");
  io::json pol = policy.train.to_json();
  pol["eval_episodes"] = policy.eval_episodes;
  return {{"seed", seed},
          {"generator", gen},
          {"annotator", annotator.to_json()},
          {"tokenizer", {{"style", std::string(lang::to_string(tokenizer.style))}}},
          {"training", train},
          {"evaluation", evaluation.to_json()},
          {"policy", pol}};
}

void PipelineConfig::apply_seed(std::uint64_t s) {
  seed = s;
  training.seed = s;
  policy.train.seed = s;
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".fgcltp.lock") {
  fs::create_directories(dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    // Reclaim a lock left behind by a process that no longer exists.
    std::ifstream in(path_);
    long owner = 0;
    if (in >> owner && owner > 0 && ::kill(static_cast<pid_t>(owner), 0) != 0 && errno == ESRCH) {
      fs::remove(path_);
      continue;
    }
    throw LockError("output directory " + dir.string() + " is locked by process " + std::to_string(owner));
  }
  throw LockError("cannot lock " + dir.string());
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::vector<std::string> parse_stages(const std::string& list) {
  if (list.empty() || list == "all") return kStages;
  std::vector<bool> on(kStages.size(), false);
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = std::min(list.find(',', pos), list.size());
    const std::string name = list.substr(pos, comma - pos);
    const auto it = std::find(kStages.begin(), kStages.end(), name);
    if (it == kStages.end()) throw ConfigError("stages", "unknown stage '" + name + "'");
    on[static_cast<std::size_t>(it - kStages.begin())] = true;
    pos = comma + 1;
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kStages.size(); ++i) {
    if (on[i]) out.push_back(kStages[i]);
  }
  return out;
}

void run_gen(const GeneratorSection& g, std::uint64_t seed, const fs::path& out_dir, unsigned threads) {
  synth::generate_corpus(g.corpus, g.n, seed, out_dir, threads);
}

void run_annotate(const annotate::AnnotatorConfig& cfg, const fs::path& corpus_dir, const fs::path& labels,
                  const fs::path& out, unsigned threads) {
  require(labels, "gen");
  cfg.validate();
  std::vector<io::LabelRecord> recs = io::read_labels(labels);
  std::vector<MarkerFrame> frames(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const fs::path f = corpus_dir / (recs[i].id + ".fgt");
    require(f, "gen");
    frames[i] = io::read_frame(f);
  }
  // Shape and texture are carried from the generator; every other field is estimated.
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < recs.size(); i += step) {
      recs[i].state = annotate::annotate(frames[i], cfg, &recs[i].state);
      recs[i].estimated = true;
    }
  };
  const unsigned t = std::max(1u, threads);
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < t; ++k) pool.emplace_back(work, k, t);
  work(0, t);
  for (auto& th : pool) th.join();
  io::write_labels(out, recs);
}

void run_tokenize(const TokenizerSection& cfg, const fs::path& labels, const fs::path& out,
                  const fs::path& vocab_out) {
  require(labels, "annotate");
  const lang::Vocabulary& vocab = lang::Vocabulary::standard();
  std::vector<io::json> lines;
  for (const auto& rec : io::read_labels(labels)) {
    if (!rec.state.depth_valid) continue;  // no caption without a contact
    for (int v = 0; v < lang::kNumVariants; ++v) {
      const lang::Description d = lang::describe(rec.state, cfg.style, v, vocab);
      std::vector<int> ids(d.tokens.ids.begin(), d.tokens.ids.begin() + d.tokens.length);
      lines.push_back({{"id", rec.id}, {"variant", v}, {"style", std::string(lang::to_string(cfg.style))},
                       {"text", d.text}, {"ids", ids}});
    }
  }
  io::write_jsonl(out, lines);
  io::write_text(vocab_out, vocab.to_json().dump(1) + "\n");
}

namespace {

std::vector<pretrain::Prepared> prepare_from(const fs::path& corpus_dir, const fs::path& annotations,
                                             lang::Style style) {
  require(annotations, "annotate");
  std::vector<pretrain::Example> ex = pretrain::load_examples(corpus_dir, annotations);
  std::erase_if(ex, [](const pretrain::Example& e) { return !e.state.depth_valid; });
  if (ex.empty()) throw std::runtime_error("no sample with a valid contact in " + annotations.string());
  return pretrain::prepare(ex, style);
}

// Token ids from a descriptions file replace the in-memory captions; both come from the same
// templates, so any difference means the files are out of sync.
void attach_descriptions(std::vector<pretrain::Prepared>& data, const fs::path& path) {
  std::map<std::string, pretrain::Prepared*> by_id;
  for (auto& p : data) by_id[p.id] = &p;
  std::map<std::string, int> seen;
  for (const auto& line : io::read_jsonl(path)) {
    const std::string id = line.at("id").get<std::string>();
    const int v = line.at("variant").get<int>();
    const auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    if (v < 0 || v >= lang::kNumVariants) throw std::runtime_error("bad variant in " + path.string());
    const auto ids = line.at("ids").get<std::vector<int>>();
    if (ids.size() > static_cast<std::size_t>(lang::kMaxTokens)) throw std::runtime_error("caption too long");
    lang::TokenSequence seq;
    std::copy(ids.begin(), ids.end(), seq.ids.begin());
    seq.length = static_cast<int>(ids.size());
    if (!(seq == it->second->tokens[static_cast<std::size_t>(v)])) {
      throw std::runtime_error(path.string() + " does not match the annotations (sample " + id +
                               "); re-run 'tokenize'");
    }
    ++seen[id];
  }
  for (const auto& p : data) {
    if (seen[p.id] != lang::kNumVariants) {
      throw std::runtime_error(path.string() + " lacks captions for " + p.id + "; re-run 'tokenize'");
    }
  }
}

std::vector<ContactState> ground_truth(const fs::path& corpus_dir, const std::vector<pretrain::Prepared>& data) {
  const fs::path labels = corpus_dir / "labels.jsonl";
  require(labels, "gen");
  std::map<std::string, ContactState> by_id;
  for (auto& r : io::read_labels(labels)) by_id[r.id] = r.state;
  std::vector<ContactState> out;
  for (const auto& p : data) {
    const auto it = by_id.find(p.id);
    if (it == by_id.end()) throw std::runtime_error("sample " + p.id + " missing from " + labels.string());
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

pretrain::TrainResult run_train(const pretrain::TrainConfig& cfg, const fs::path& corpus_dir,
                                const fs::path& annotations, const std::optional<fs::path>& descriptions,
                                const fs::path& out_ckpt, const fs::path& metrics, bool quiet) {
  std::vector<pretrain::Prepared> data = prepare_from(corpus_dir, annotations, cfg.style);
  if (descriptions) {
    require(*descriptions, "tokenize");
    attach_descriptions(data, *descriptions);
  }
  return pretrain::train(data, cfg, lang::Vocabulary::standard(),
                         {.checkpoint = out_ckpt, .metrics = metrics, .quiet = quiet});
}

eval::ProbeReport run_eval(const eval::EvalConfig& cfg, lang::Style style, const fs::path& ckpt,
                           const fs::path& corpus_dir, const fs::path& annotations, const fs::path& report) {
  require(ckpt, "train");
  const nn::Model model = pretrain::load_model(ckpt);
  const std::vector<pretrain::Prepared> data = prepare_from(corpus_dir, annotations, style);
  const eval::ProbeReport rep = eval::evaluate(model, data, ground_truth(corpus_dir, data), cfg);
  io::write_text(report, rep.to_json().dump(1) + "\n");
  return rep;
}

void run_policy_train(const PolicySection& cfg, const fs::path& encoder_ckpt, const fs::path& out,
                      const fs::path& metrics) {
  require(encoder_ckpt, "train");
  const nn::Model model = pretrain::load_model(encoder_ckpt);
  const flow::PolicyTrainResult res = flow::train_policy(model.tactile, cfg.train);
  flow::save_policy(out, res.policy, lang::Vocabulary::standard().hash(),
                    {{"encoder", encoder_ckpt.filename().string()}, {"config", cfg.train.to_json()}});
  io::write_text(metrics, io::json{{"version", 1}, {"config", cfg.train.to_json()}, {"loss", res.loss_history}}
                              .dump(1) + "\n");
}

io::json run_policy_eval(const PolicySection& cfg, const fs::path& ckpt, const fs::path& report,
                         const std::optional<fs::path>& traj_out) {
  require(ckpt, "policy-train");
  const flow::Policy policy = flow::load_policy(ckpt, lang::Vocabulary::standard().hash());
  // Evaluation episodes come from a stream disjoint from the demonstrations.
  const std::uint64_t eval_seed = synth::splitmix64(cfg.train.seed ^ 0xe7a1ULL);
  const flow::EnvConfig env;
  const flow::RolloutResult trained = flow::run_policy(policy, env, cfg.eval_episodes, eval_seed);

  std::mt19937_64 rng(synth::splitmix64(cfg.train.seed ^ 0xba5eULL));
  const flow::Policy untrained{flow::FlowNet(policy.net.action_dim, policy.net.cond_dim, rng), policy.encoder,
                               policy.sample_steps};
  const flow::RolloutResult baseline = flow::run_policy(untrained, env, cfg.eval_episodes, eval_seed);

  double terminal = 0, lateral = 0;
  for (const auto& t : trained.traces) {
    terminal += std::abs(t.states.back().depth - t.target_depth);
    lateral += std::abs(t.states.back().y - t.target_line);
  }
  const double n = static_cast<double>(trained.traces.size());
  const io::json j = {{"version", 1},
                      {"episodes", cfg.eval_episodes},
                      {"success_rate", trained.success_rate},
                      {"untrained_success_rate", baseline.success_rate},
                      {"mean_terminal_depth_error_mm", terminal / n},
                      {"mean_terminal_lateral_error_mm", lateral / n}};
  io::write_text(report, j.dump(1) + "\n");
  if (traj_out) flow::write_trajectories(*traj_out, trained.traces);
  return j;
}

namespace {

struct Manifest {
  io::json doc;

  static std::optional<Manifest> read(const fs::path& p) {
    if (!fs::exists(p)) return std::nullopt;
    try {
      return Manifest{io::json::parse(io::read_text(p))};
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
};

// Hash of a whole corpus directory: frames plus labels, in name order.
std::string corpus_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = io::fnv1a("corpus");
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    const auto bytes = io::read_bytes(f);
    h = io::fnv1a(name.data(), name.size(), h);
    h = io::fnv1a(bytes.data(), bytes.size(), h);
  }
  return io::hex64(h);
}

struct StageSpec {
  io::json config;
  std::vector<fs::path> inputs;  // files (the corpus directory is hashed as a whole)
  std::vector<fs::path> outputs;
  std::function<void()> run;
};

io::json describe_inputs(const StageSpec& s, const Layout& layout) {
  io::json out = io::json::object();
  for (const auto& p : s.inputs) {
    const std::string key = fs::relative(p, layout.root).generic_string();
    out[key] = fs::is_directory(p) ? corpus_hash(p) : io::file_hash(p);
  }
  return out;
}

}  // namespace

std::vector<StageOutcome> run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages,
                                       const Layout& L, const RunOptions& opts) {
  DirectoryLock lock(L.root);
  fs::create_directories(L.root / "manifests");
  const std::string style(lang::to_string(config.tokenizer.style));
  io::json gen_cfg = config.generator.corpus.to_json();
  gen_cfg["n"] = config.generator.n;
  gen_cfg["seed"] = config.seed;

  std::map<std::string, StageSpec> specs;
  specs["gen"] = {gen_cfg, {}, {L.corpus()}, [&] {
                   fs::remove_all(L.corpus());  // no stale frames from a larger earlier corpus
                   run_gen(config.generator, config.seed, L.corpus(), opts.threads);
                 }};
  specs["annotate"] = {config.annotator.to_json(), {L.corpus()}, {L.annotations()}, [&] {
                         run_annotate(config.annotator, L.corpus(), L.labels(), L.annotations(), opts.threads);
                       }};
  specs["tokenize"] = {{{"style", style}, {"vocab", io::hex64(lang::Vocabulary::standard().hash())}},
                       {L.annotations()},
                       {L.descriptions(), L.vocab()},
                       [&] { run_tokenize(config.tokenizer, L.annotations(), L.descriptions(), L.vocab()); }};
  specs["train"] = {config.training.to_json(),
                    {L.corpus(), L.annotations(), L.descriptions()},
                    {L.checkpoint(), L.train_metrics()},
                    [&] {
                      run_train(config.training, L.corpus(), L.annotations(), L.descriptions(), L.checkpoint(),
                                L.train_metrics(), opts.quiet);
                    }};
  specs["eval"] = {config.evaluation.to_json(),
                   {L.corpus(), L.annotations(), L.checkpoint()},
                   {L.report()},
                   [&] {
                     run_eval(config.evaluation, config.tokenizer.style, L.checkpoint(), L.corpus(), L.annotations(),
                              L.report());
                   }};
  specs["policy-train"] = {config.policy.train.to_json(),
                           {L.checkpoint()},
                           {L.policy(), L.policy_metrics()},
                           [&] { run_policy_train(config.policy, L.checkpoint(), L.policy(), L.policy_metrics()); }};
  io::json pe_cfg = config.policy.train.to_json();
  pe_cfg["eval_episodes"] = config.policy.eval_episodes;
  specs["policy-eval"] = {pe_cfg,
                          {L.policy()},
                          {L.policy_report(), L.trajectories()},
                          [&] { run_policy_eval(config.policy, L.policy(), L.policy_report(), L.trajectories()); }};
  const std::map<std::string, std::string> producer = {
      {L.corpus().string(), "gen"},        {L.annotations().string(), "annotate"},
      {L.descriptions().string(), "tokenize"}, {L.checkpoint().string(), "train"},
      {L.policy().string(), "policy-train"}};

  std::vector<StageOutcome> outcomes;
  for (const auto& name : stages) {
    const StageSpec& s = specs.at(name);
    for (const auto& in : s.inputs) {
      if (!fs::exists(in)) throw MissingArtifact(in, producer.at(in.string()));
    }
    const io::json inputs = describe_inputs(s, L);
    const std::string config_hash = sha(s.config);
    const auto previous = Manifest::read(L.manifest(name));
    bool skip = !opts.force && previous && previous->doc.value("config_hash", "") == config_hash &&
                previous->doc.value("inputs", io::json()) == inputs;
    if (skip) {
      for (const auto& out : s.outputs) {
        const std::string key = fs::relative(out, L.root).generic_string();
        const io::json& rec = previous->doc["outputs"];
        if (!fs::exists(out) || !rec.contains(key) ||
            rec[key] != (fs::is_directory(out) ? corpus_hash(out) : io::file_hash(out))) {
          skip = false;
        }
      }
    }
    if (!opts.quiet) std::cerr << (skip ? "skip  " : "run   ") << name << "\n";
    if (!skip) {
      s.run();
      io::json outputs = io::json::object();
      for (const auto& out : s.outputs) {
        outputs[fs::relative(out, L.root).generic_string()] =
            fs::is_directory(out) ? corpus_hash(out) : io::file_hash(out);
      }
      const io::json manifest = {{"stage", name},        {"config", s.config}, {"config_hash", config_hash},
                                 {"seed", config.seed},  {"inputs", inputs},   {"outputs", outputs}};
      io::write_text(L.manifest(name), manifest.dump(1) + "\n");
    }
    outcomes.push_back({name, skip});
  }
  return outcomes;
}

}  // namespace fgcltp::pipeline
