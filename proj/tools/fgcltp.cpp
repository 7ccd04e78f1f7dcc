// fgcltp: corpus generation, annotation, captioning, pretraining, probing and the toy policy.
#include "fgcltp/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

using namespace fgcltp;
namespace fs = std::filesystem;
namespace pl = fgcltp::pipeline;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir = "fgcltp_out";
  std::string config;
  unsigned threads = 0;
  bool quiet = false;
};

[[noreturn]] void fail(const std::string& kind, const std::string& message, const io::json& extra = {}) {
  io::json j = {{"error", kind}, {"message", message}};
  if (extra.is_object()) j.update(extra);
  std::cerr << j.dump() << std::endl;
  std::exit(kind == "usage" ? 2 : 1);
}

unsigned resolve_threads(unsigned flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("FGCLTP_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    fail("usage", std::string("FGCLTP_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

template <typename T>
std::string str(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  const pl::PipelineConfig defaults;
  const pl::Layout dl{"<out-dir>"};

  CLI::App app{"Fine-grained tactile-language pretraining toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base seed for every stage (overrides the config)")->default_str("0");
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--config", g.config, "Pipeline config JSON (sections generator, annotator, tokenizer, "
                                       "training, evaluation, policy)");
  app.add_option("--threads", g.threads, "Worker threads (falls back to FGCLTP_THREADS, then 1)")->default_str("0");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic marker-displacement corpus into <out-dir>/corpus");
  std::optional<std::size_t> gen_n;
  std::optional<double> gen_noise;
  gen->add_option("--n", gen_n, "Number of samples")->default_str(str(defaults.generator.n));
  gen->add_option("--noise", gen_noise, "Marker noise sigma in mm")
      ->default_str(str(defaults.generator.corpus.noise_sigma_mm));

  // annotate
  auto* ann = app.add_subcommand("annotate", "Estimate contact states from frames");
  std::optional<std::string> ann_in, ann_out;
  ann->add_option("--in-dir", ann_in, "Corpus directory")->default_str(dl.corpus().string());
  ann->add_option("--out", ann_out, "Annotations JSONL")->default_str(dl.annotations().string());

  // tokenize
  auto* tok = app.add_subcommand("tokenize", "Write the vocabulary and ten captions per sample");
  std::optional<std::string> tok_labels, tok_out, tok_vocab, tok_style;
  tok->add_option("--labels", tok_labels, "Labels or annotations JSONL")->default_str(dl.annotations().string());
  tok->add_option("--out", tok_out, "Descriptions JSONL")->default_str(dl.descriptions().string());
  tok->add_option("--vocab-out", tok_vocab, "Vocabulary JSON")->default_str(dl.vocab().string());
  tok->add_option("--style", tok_style, "Caption style")
      ->check(CLI::IsMember({"tokenized", "plain"}))
      ->default_str(std::string(lang::to_string(defaults.tokenizer.style)));

  // train
  auto* tr = app.add_subcommand("train", "Contrastive pretraining with auxiliary regression");
  std::optional<std::string> tr_corpus, tr_ann, tr_desc, tr_ckpt, tr_metrics, tr_style;
  std::optional<int> tr_epochs, tr_batch;
  std::optional<double> tr_lr, tr_tl, tr_ti, tr_li;
  bool tr_mean = false;
  tr->add_option("--corpus", tr_corpus, "Corpus directory")->default_str(dl.corpus().string());
  tr->add_option("--annotations", tr_ann, "Annotations JSONL")->default_str(dl.annotations().string());
  tr->add_option("--descriptions", tr_desc, "Descriptions JSONL (checked against the annotations when present)")
      ->default_str(dl.descriptions().string());
  tr->add_option("--epochs", tr_epochs, "Epochs")->default_str(str(defaults.training.epochs));
  tr->add_option("--batch", tr_batch, "Batch size")->default_str(str(defaults.training.batch));
  tr->add_option("--lr", tr_lr, "Peak learning rate")->default_str(str(defaults.training.lr));
  tr->add_option("--lambda-tl", tr_tl, "Tactile-language weight")->default_str(str(defaults.training.weights.tl));
  tr->add_option("--lambda-ti", tr_ti, "Tactile-image weight")->default_str(str(defaults.training.weights.ti));
  tr->add_option("--lambda-li", tr_li, "Language-image weight")->default_str(str(defaults.training.weights.li));
  tr->add_flag("--mean-reduction", tr_mean, "Average InfoNCE over the batch instead of summing");
  tr->add_option("--style", tr_style, "Caption style")
      ->check(CLI::IsMember({"tokenized", "plain"}))
      ->default_str(std::string(lang::to_string(defaults.tokenizer.style)));
  tr->add_option("--out-ckpt", tr_ckpt, "Checkpoint")->default_str(dl.checkpoint().string());
  tr->add_option("--metrics", tr_metrics, "Per-epoch metrics JSONL")->default_str(dl.train_metrics().string());

  // eval
  auto* ev = app.add_subcommand("eval", "Probe frozen tactile embeddings");
  std::optional<std::string> ev_ckpt, ev_corpus, ev_ann, ev_report, ev_probe, ev_style;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->default_str(dl.checkpoint().string());
  ev->add_option("--corpus", ev_corpus, "Corpus directory")->default_str(dl.corpus().string());
  ev->add_option("--annotations", ev_ann, "Annotations JSONL")->default_str(dl.annotations().string());
  ev->add_option("--report", ev_report, "Report JSON")->default_str(dl.report().string());
  ev->add_option("--probe", ev_probe, "Classifier probe")
      ->check(CLI::IsMember({"linear", "mlp"}))
      ->default_str(defaults.evaluation.probe);
  ev->add_option("--style", ev_style, "Caption style used for retrieval")
      ->check(CLI::IsMember({"tokenized", "plain"}))
      ->default_str(std::string(lang::to_string(defaults.tokenizer.style)));

  // policy-train
  auto* pt = app.add_subcommand("policy-train", "Train the flow-matching policy on expert demonstrations");
  std::optional<std::string> pt_enc, pt_out, pt_metrics;
  std::optional<int> pt_episodes, pt_steps;
  bool pt_stage2 = false;
  pt->add_option("--encoder-ckpt", pt_enc, "Pretrained checkpoint")->default_str(dl.checkpoint().string());
  pt->add_flag("--stage2", pt_stage2, "Also fine-tune the tactile encoder");
  pt->add_option("--episodes", pt_episodes, "Demonstration episodes")
      ->default_str(str(defaults.policy.train.episodes));
  pt->add_option("--steps", pt_steps, "Optimizer steps")->default_str(str(defaults.policy.train.steps));
  pt->add_option("--out", pt_out, "Policy checkpoint")->default_str(dl.policy().string());
  pt->add_option("--metrics", pt_metrics, "Training summary JSON")->default_str(dl.policy_metrics().string());

  // policy-eval
  auto* pe = app.add_subcommand("policy-eval", "Roll out the policy in the contact-following task");
  std::optional<std::string> pe_ckpt, pe_traj, pe_report;
  std::optional<int> pe_episodes;
  pe->add_option("--ckpt", pe_ckpt, "Policy checkpoint")->default_str(dl.policy().string());
  pe->add_option("--episodes", pe_episodes, "Evaluation episodes")->default_str(str(defaults.policy.eval_episodes));
  pe->add_option("--traj-out", pe_traj, "Per-step trajectory CSV")->default_str(dl.trajectories().string());
  pe->add_option("--report", pe_report, "Result JSON")->default_str(dl.policy_report().string());

  // pipeline
  auto* pp = app.add_subcommand("pipeline", "Run stages in order, skipping those whose manifest is current");
  std::string pp_stages = "all";
  bool pp_force = false;
  pp->add_option("--stages", pp_stages, "Comma-separated subset of gen,annotate,tokenize,train,eval,"
                                        "policy-train,policy-eval")
      ->capture_default_str();
  pp->add_flag("--force", pp_force, "Re-run stages even when their manifest matches");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    pl::PipelineConfig cfg = g.config.empty() ? pl::PipelineConfig{} : pl::PipelineConfig::load(g.config);
    if (g.seed) cfg.apply_seed(*g.seed);
    const unsigned threads = resolve_threads(g.threads);
    const pl::Layout L{g.out_dir};
    auto path = [](const std::optional<std::string>& flag, const fs::path& def) {
      return flag ? fs::path(*flag) : def;
    };

    if (stage == "pipeline") {
      const auto outcomes = pl::run_pipeline(cfg, pl::parse_stages(pp_stages), L,
                                             {.threads = threads, .quiet = g.quiet, .force = pp_force});
      if (!g.quiet) {
        for (const auto& o : outcomes) std::cout << o.stage << (o.skipped ? " skipped" : " done") << "\n";
      }
      return 0;
    }

    pl::DirectoryLock lock(L.root);
    if (stage == "gen") {
      if (gen_n) {
        if (*gen_n < 1) throw pl::ConfigError("n", "must be >= 1");
        cfg.generator.n = *gen_n;
      }
      if (gen_noise) {
        if (*gen_noise < 0) throw pl::ConfigError("noise", "must be non-negative");
        cfg.generator.corpus.noise_sigma_mm = *gen_noise;
      }
      pl::run_gen(cfg.generator, cfg.seed, L.corpus(), threads);
    } else if (stage == "annotate") {
      const fs::path in = path(ann_in, L.corpus());
      pl::run_annotate(cfg.annotator, in, in / "labels.jsonl", path(ann_out, L.annotations()), threads);
    } else if (stage == "tokenize") {
      if (tok_style) cfg.tokenizer.style = lang::parse_style(*tok_style);
      pl::run_tokenize(cfg.tokenizer, path(tok_labels, L.annotations()), path(tok_out, L.descriptions()),
                       path(tok_vocab, L.vocab()));
    } else if (stage == "train") {
      pretrain::TrainConfig t = cfg.training;
      if (tr_epochs) t.epochs = *tr_epochs;
      if (tr_batch) t.batch = *tr_batch;
      if (tr_lr) t.lr = *tr_lr;
      if (tr_tl) t.weights.tl = *tr_tl;
      if (tr_ti) t.weights.ti = *tr_ti;
      if (tr_li) t.weights.li = *tr_li;
      if (tr_mean) t.mean_reduction = true;
      if (tr_style) t.style = lang::parse_style(*tr_style);
      t.validate();
      const fs::path desc = path(tr_desc, L.descriptions());
      if (tr_desc && !fs::exists(desc)) throw pl::MissingArtifact(desc, "tokenize");
      pl::run_train(t, path(tr_corpus, L.corpus()), path(tr_ann, L.annotations()),
                    fs::exists(desc) ? std::optional<fs::path>(desc) : std::nullopt, path(tr_ckpt, L.checkpoint()),
                    path(tr_metrics, L.train_metrics()), g.quiet);
    } else if (stage == "eval") {
      if (ev_probe) cfg.evaluation.probe = *ev_probe;
      const lang::Style style = ev_style ? lang::parse_style(*ev_style) : cfg.tokenizer.style;
      const auto rep = pl::run_eval(cfg.evaluation, style, path(ev_ckpt, L.checkpoint()), path(ev_corpus, L.corpus()),
                                    path(ev_ann, L.annotations()), path(ev_report, L.report()));
      if (!g.quiet) std::cout << rep.to_json().dump(1) << "\n";
    } else if (stage == "policy-train") {
      if (pt_episodes) cfg.policy.train.episodes = *pt_episodes;
      if (pt_steps) cfg.policy.train.steps = *pt_steps;
      if (pt_stage2) cfg.policy.train.stage2 = true;
      cfg.policy.train = flow::PolicyTrainConfig::from_json(cfg.policy.train.to_json());  // validates
      pl::run_policy_train(cfg.policy, path(pt_enc, L.checkpoint()), path(pt_out, L.policy()),
                           path(pt_metrics, L.policy_metrics()));
    } else if (stage == "policy-eval") {
      if (pe_episodes) {
        if (*pe_episodes < 1) throw pl::ConfigError("episodes", "must be >= 1");
        cfg.policy.eval_episodes = *pe_episodes;
      }
      const auto j = pl::run_policy_eval(cfg.policy, path(pe_ckpt, L.policy()), path(pe_report, L.policy_report()),
                                         path(pe_traj, L.trajectories()));
      if (!g.quiet) std::cout << j.dump(1) << "\n";
    }
  } catch (const pl::ConfigError& e) {
    fail("config", e.what(), {{"stage", stage}, {"field", e.field()}});
  } catch (const pl::MissingArtifact& e) {
    fail("missing_artifact", e.what(), {{"stage", stage}, {"run_first", e.needed()}});
  } catch (const pl::LockError& e) {
    fail("locked", e.what(), {{"stage", stage}});
  } catch (const std::exception& e) {
    fail("runtime", e.what(), {{"stage", stage}});
  }
  return 0;
}
