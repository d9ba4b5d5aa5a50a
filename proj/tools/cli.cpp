#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "fewshot/analysis.hpp"
#include "fewshot/data.hpp"
#include "fewshot/inference.hpp"
#include "fewshot/predictor.hpp"
#include "fewshot/trainer.hpp"

namespace fewshot::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 20170613;

struct GenOptions {
  SyntheticSpec spec;
  std::size_t few = 5;
  std::size_t shots = 1;
  std::string out_dir = "data";
};

struct TrainOptions {
  std::string data;
  std::string format = "binary";
  std::string checkpoint = "phi.bin";
  std::string log = "train_log.csv";
  std::string variant = "linear";
  std::string mode = "mixed";
  std::string init_checkpoint;
  std::uint64_t init_seed = kDefaultSeed;
  double init_noise = 1e-3;
  std::size_t checkpoint_every = 0;
  TrainConfig cfg;
};

struct EvalOptions {
  std::string checkpoint;
  std::string large;
  std::string large_test;
  std::string few_train;
  std::string few_test;
  std::size_t shots = 0;
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;
  std::string out_dir = ".";
};

struct EpisodeOptions {
  std::string checkpoint;
  std::vector<std::string> few;
  std::size_t n_way = 5;
  std::size_t k_shot = 1;
  std::size_t episodes = 600;
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;
  std::string out_dir;
};

struct AnalyzeOptions {
  std::string checkpoint;
  std::string reference;
  std::string reference_csv;
  std::vector<std::size_t> ks;
  std::size_t submatrix = 256;
  int threads = 1;
  std::string out_dir = "analysis";
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return f;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ActivationStore load_binary(const std::string& path) { return load_store(path, StoreFormat::Binary); }

void require_dim(const PhiModel& phi, const ActivationStore& store, const std::string& name) {
  if (store.dim() != phi.dim()) {
    throw ValidationError("dim mismatch: checkpoint has dim " + std::to_string(phi.dim()) + ", " +
                          name + " has dim " + std::to_string(store.dim()));
  }
}

// ---------------------------------------------------------------------------

void cmd_gen(const GenOptions& o, std::ostream& out) {
  o.spec.validate();
  if (o.few < 1 || o.few >= o.spec.n_categories) {
    throw ValidationError("gen: --few must be in [1, categories - 1]");
  }
  if (o.shots < 1 || o.shots >= o.spec.samples_per_category) {
    throw ValidationError("gen: --shots must be in [1, samples - 1]");
  }
  const SyntheticData data = gen_synthetic(o.spec);
  std::vector<CategoryId> few;
  for (std::size_t i = o.spec.n_categories - o.few; i < o.spec.n_categories; ++i) {
    few.push_back(static_cast<CategoryId>(i));
  }
  Rng split_rng(o.spec.seed + 1);
  const StoreSplit split = split_store(data.store, few, o.shots, split_rng);

  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  write_store(dir / "large.bin", split.large);
  write_store(dir / "few_train.bin", split.few_train);
  write_store(dir / "few_test.bin", split.few_test);
  auto centers = open_out(dir / "centers.csv");
  for (const auto& [y, c] : data.centers) {
    centers << y;
    for (double v : c) centers << ',' << fmt17(v);
    centers << '\n';
  }
  out << "seed=" << o.spec.seed << '\n';
  out << "wrote " << (dir / "large.bin").string() << " (" << split.large.size() << " samples), "
      << (dir / "few_train.bin").string() << " (" << split.few_train.size() << "), "
      << (dir / "few_test.bin").string() << " (" << split.few_test.size() << ")\n";
}

void cmd_train(TrainOptions o, std::ostream& out) {
  if (o.variant != "linear" && o.variant != "two-layer") {
    throw ValidationError("train: --variant must be linear or two-layer");
  }
  o.cfg.mode = o.mode == "mean-only" ? TrainMode::MeanOnly : TrainMode::Mixed;
  o.cfg.validate();
  const StoreFormat fmt = o.format == "csv" ? StoreFormat::Csv : StoreFormat::Binary;
  const ActivationStore store = load_store(o.data, fmt);

  PhiModel init;
  if (!o.init_checkpoint.empty()) {
    init = load_checkpoint(o.init_checkpoint);
  } else {
    Rng init_rng(o.init_seed);
    init = o.variant == "linear" ? PhiModel::linear_init(store.dim(), init_rng, o.init_noise)
                                 : PhiModel::two_layer_init(store.dim(), init_rng);
  }
  require_dim(init, store, o.data);

  TrainHooks hooks;
  if (o.checkpoint_every > 0) {
    hooks.on_epoch = [&](const EpochRecord& rec, const PhiModel& phi) {
      if (rec.epoch % o.checkpoint_every == 0) {
        write_checkpoint(o.checkpoint + ".epoch" + std::to_string(rec.epoch), phi);
      }
    };
  }
  const TrainResult res = train(store, o.cfg, std::move(init), hooks);
  write_checkpoint(o.checkpoint, res.model);

  auto log = open_out(o.log);
  log << "# variant=" << o.variant << " mode=" << o.mode
      << " effective_p_mean=" << fmt17(o.cfg.effective_p_mean()) << '\n';
  log << "# epoch,mean_loss,seconds\n";
  write_train_log(log, res.log);

  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(res.log.final_digest));
  out << "effective_p_mean=" << fmt17(o.cfg.effective_p_mean()) << '\n';
  if (!res.log.epochs.empty()) {
    out << "final_epoch_mean_loss=" << fmt17(res.log.epochs.back().mean_loss) << '\n';
  }
  out << "digest=" << digest << '\n';
}

void cmd_eval(const EvalOptions& o, std::ostream& out) {
  const PhiModel phi = load_checkpoint(o.checkpoint);
  const ActivationStore large = load_binary(o.large);
  const ActivationStore large_test = o.large_test.empty() ? large : load_binary(o.large_test);
  ActivationStore few_train = load_binary(o.few_train);
  ActivationStore few_test = load_binary(o.few_test);
  require_dim(phi, large, o.large);
  require_dim(phi, large_test, o.large_test);
  require_dim(phi, few_train, o.few_train);
  require_dim(phi, few_test, o.few_test);

  if (o.shots > 0) {
    const ActivationStore merged = concat_stores(few_train, few_test);
    Rng rng(o.seed);
    const auto few_cats = merged.categories();
    StoreSplit split = split_store(merged, few_cats, o.shots, rng);
    few_train = std::move(split.few_train);
    few_test = std::move(split.few_test);
  }

  const kernels::ExecPolicy policy{o.threads};
  const Classifier classifier = build_classifier(phi, compute_means(large), few_train);
  const ActivationStore refs = concat_stores(large, few_train);
  const std::size_t n_candidates = classifier.size();

  EvalReport report;
  auto add_rows = [&](const std::string& split, const ActivationStore& test) {
    SplitAccuracy pred{"predictor", split, top_k_accuracy(classifier, test, 1, std::nullopt, policy), {}};
    SplitAccuracy base{"nn_cosine", split, nn_cosine_baseline(refs, test, 1, policy), {}};
    if (n_candidates >= 5) {
      pred.top5 = top_k_accuracy(classifier, test, 5, std::nullopt, policy);
      base.top5 = nn_cosine_baseline(refs, test, 5, policy);
    }
    report.rows.push_back(pred);
    report.rows.push_back(base);
  };
  add_rows("large", large_test);
  add_rows("few", few_test);

  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  auto text = open_out(dir / "eval.txt");
  write_eval_text(text, report);
  auto rec = open_out(dir / "eval_records.csv");
  write_eval_records(rec, report);
  write_eval_text(out, report);
}

void cmd_episodes(const EpisodeOptions& o, std::ostream& out) {
  const PhiModel phi = load_checkpoint(o.checkpoint);
  ActivationStore few;
  for (const auto& path : o.few) {
    ActivationStore s = load_binary(path);
    require_dim(phi, s, path);
    few = concat_stores(few, s);
  }
  const EpisodeReport rep =
      run_episodes(few, phi, o.n_way, o.k_shot, o.episodes, o.seed, kernels::ExecPolicy{o.threads});
  if (!o.out_dir.empty()) {
    const fs::path dir(o.out_dir);
    ensure_dir(dir);
    auto text = open_out(dir / "episodes.txt");
    write_episode_text(text, rep);
    text << "summary=" << episode_summary(rep) << '\n';
    auto rec = open_out(dir / "episodes_records.csv");
    write_episode_records(rec, rep);
  }
  out << episode_summary(rep) << '\n';
}

void cmd_analyze(const AnalyzeOptions& o, std::ostream& out) {
  const PhiModel phi = load_checkpoint(o.checkpoint);
  const Matrix m = phi.linear_matrix();
  if (!o.ks.empty() && o.reference.empty() && o.reference_csv.empty()) {
    throw ValidationError("analyze: order similarity requested (--k) but no --reference or --reference-csv given");
  }
  if (!o.reference.empty() && !o.reference_csv.empty()) {
    throw ValidationError("analyze: give at most one of --reference and --reference-csv");
  }
  const kernels::ExecPolicy policy{o.threads};
  const ImpactVector impacts = channel_impact(m, policy);
  const ImpactSummary summary = summarize_impacts(impacts);
  const DiagonalStats diag = diagonal_dominance(m);

  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  {
    auto f = open_out(dir / "impacts.txt");
    write_values(f, impacts.impacts);
  }
  {
    auto f = open_out(dir / "impacts_sum_normalized.txt");
    write_values(f, summary.sum_normalized);
  }
  {
    auto f = open_out(dir / "impacts_l2_normalized.txt");
    write_values(f, summary.l2_normalized);
  }
  std::ostringstream kv;
  kv << "impact_sum_normalized_mean=" << fmt17(summary.sum_mean) << '\n'
     << "impact_sum_normalized_std=" << fmt17(summary.sum_std) << '\n'
     << "impact_l2_normalized_mean=" << fmt17(summary.l2_mean) << '\n'
     << "impact_l2_normalized_std=" << fmt17(summary.l2_std) << '\n'
     << "mean_diag_abs=" << fmt17(diag.mean_diag_abs) << '\n'
     << "mean_offdiag_abs=" << fmt17(diag.mean_offdiag_abs) << '\n'
     << "diag_min=" << fmt17(diag.diag_min) << '\n'
     << "diag_max=" << fmt17(diag.diag_max) << '\n';
  {
    auto f = open_out(dir / "summary.txt");
    f << kv.str();
  }
  {
    auto f = open_out(dir / "heatmap.csv");
    write_grid_csv(f, export_log_heatmap(m, std::min(o.submatrix, m.rows())));
  }
  out << kv.str();

  if (o.reference.empty() && o.reference_csv.empty()) return;
  Matrix ref;
  if (!o.reference.empty()) {
    ref = load_checkpoint(o.reference).linear_matrix();
  } else {
    std::ifstream in(o.reference_csv);
    if (!in) throw ValidationError("cannot open " + o.reference_csv);
    ref = grid_to_matrix(read_grid_csv(in));
  }
  const ImpactVector ref_impacts = channel_impact(ref, policy);
  if (ref_impacts.size() != impacts.size()) {
    throw ValidationError("analyze: reference has " + std::to_string(ref_impacts.size()) +
                          " input channels, checkpoint has " + std::to_string(impacts.size()));
  }
  std::vector<std::size_t> ks = o.ks;
  if (ks.empty()) {
    for (std::size_t k = 1; k <= impacts.size(); ++k) ks.push_back(k);
  }
  auto f = open_out(dir / "order_similarity.csv");
  f << "k,os\n";
  for (std::size_t k : ks) {
    const double os = order_similarity(impacts, ref_impacts, k);
    f << k << ',' << fmt17(os) << '\n';
    out << "os_k" << k << '=' << fmt17(os) << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot classifier adaptation by predicting weights from activation statistics"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic activation dataset and split it");
  g->add_option("--out", gen.out_dir, "Output directory")->capture_default_str();
  g->add_option("--categories", gen.spec.n_categories, "Total categories")->capture_default_str();
  g->add_option("--few", gen.few, "Few-shot categories (highest ids)")->capture_default_str();
  g->add_option("--samples", gen.spec.samples_per_category, "Samples per category")->capture_default_str();
  g->add_option("--dim", gen.spec.dim, "Activation dimension")->capture_default_str();
  g->add_option("--center-scale", gen.spec.center_scale, "Std of category centers")->capture_default_str();
  g->add_option("--noise", gen.spec.noise_sigma, "Std of per-sample noise")->capture_default_str();
  g->add_option("--normalize", gen.spec.normalize, "Unit-normalize samples (true/false)")->capture_default_str();
  g->add_option("--shots", gen.shots, "Few-shot training samples per few category")->capture_default_str();
  g->add_option("--seed", gen.spec.seed, "Random seed")->capture_default_str();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train the parameter predictor on the large split");
  t->add_option("--data", tr.data, "Large-split activation file")->required();
  t->add_option("--format", tr.format, "Input format")->check(CLI::IsMember({"binary", "csv"}))->capture_default_str();
  t->add_option("--checkpoint", tr.checkpoint, "Output checkpoint path")->capture_default_str();
  t->add_option("--log", tr.log, "Output training log path")->capture_default_str();
  t->add_option("--checkpoint-every", tr.checkpoint_every, "Also write <checkpoint>.epochN every N epochs (0 = off)")->capture_default_str();
  t->add_option("--variant", tr.variant, "Predictor architecture")->check(CLI::IsMember({"linear", "two-layer"}))->capture_default_str();
  t->add_option("--mode", tr.mode, "mixed statistics or mean-only")->check(CLI::IsMember({"mixed", "mean-only"}))->capture_default_str();
  t->add_option("--init-checkpoint", tr.init_checkpoint, "Start from this checkpoint instead of a fresh init");
  t->add_option("--init-seed", tr.init_seed, "Seed for the initialization")->capture_default_str();
  t->add_option("--init-noise", tr.init_noise, "Std of noise added to the identity init (linear)")->capture_default_str();
  t->add_option("--epochs", tr.cfg.epochs, "Epochs")->capture_default_str();
  t->add_option("--batches", tr.cfg.batches_per_epoch, "Batches per epoch")->capture_default_str();
  t->add_option("--lr", tr.cfg.lr, "Learning rate")->capture_default_str();
  t->add_option("--momentum", tr.cfg.momentum, "Momentum")->capture_default_str();
  t->add_option("--weight-decay", tr.cfg.weight_decay, "Weight decay")->capture_default_str();
  t->add_option("--p-mean", tr.cfg.p_mean, "Probability of using the category mean as statistic")->capture_default_str();
  t->add_option("--lambda", tr.cfg.lambda, "Squared-Frobenius regularizer weight")->capture_default_str();
  t->add_option("--seed", tr.cfg.seed, "Sampling seed")->capture_default_str();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Top-1/top-5 accuracy of the mixed classifier and the NN+cosine baseline");
  e->add_option("--checkpoint", ev.checkpoint, "Predictor checkpoint")->required();
  e->add_option("--large", ev.large, "Large-split activations (means and baseline references)")->required();
  e->add_option("--large-test", ev.large_test, "Large-split queries (default: --large)");
  e->add_option("--few-train", ev.few_train, "Few-shot reference activations")->required();
  e->add_option("--few-test", ev.few_test, "Few-shot query activations")->required();
  e->add_option("--shots", ev.shots, "Re-split the few data with this many shots (0 = use files as given)")->capture_default_str();
  e->add_option("--seed", ev.seed, "Seed for --shots re-split")->capture_default_str();
  e->add_option("--threads", ev.threads, "OpenMP threads")->check(CLI::PositiveNumber)->capture_default_str();
  e->add_option("--out", ev.out_dir, "Output directory")->capture_default_str();

  EpisodeOptions ep;
  auto* p = app.add_subcommand("episodes", "N-way K-shot episodic evaluation");
  p->add_option("--checkpoint", ep.checkpoint, "Predictor checkpoint")->required();
  p->add_option("--few", ep.few, "Few-shot activation file(s), concatenated")->required();
  p->add_option("--n-way", ep.n_way, "Categories per episode")->capture_default_str();
  p->add_option("--k-shot", ep.k_shot, "References per category")->capture_default_str();
  p->add_option("--episodes", ep.episodes, "Number of episodes")->capture_default_str();
  p->add_option("--seed", ep.seed, "Base seed; episode i uses seed + i")->capture_default_str();
  p->add_option("--threads", ep.threads, "OpenMP threads")->check(CLI::PositiveNumber)->capture_default_str();
  p->add_option("--out", ep.out_dir, "Optional output directory for report files");

  AnalyzeOptions an;
  auto* a = app.add_subcommand("analyze", "Channel impacts, diagonal dominance, order similarity, heatmap");
  a->add_option("--checkpoint", an.checkpoint, "Linear predictor checkpoint")->required();
  a->add_option("--reference", an.reference, "Linear checkpoint to compare impacts against");
  a->add_option("--reference-csv", an.reference_csv, "Reference weight matrix as CSV (rows x input channels)");
  a->add_option("--k", an.ks, "Top-k sizes for order similarity (default: 1..dim)")->delimiter(',');
  a->add_option("--submatrix", an.submatrix, "Heatmap block size")->capture_default_str();
  a->add_option("--threads", an.threads, "OpenMP threads")->check(CLI::PositiveNumber)->capture_default_str();
  a->add_option("--out", an.out_dir, "Output directory")->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  // Echo the selected command's fully resolved options as a loadable config.
  for (const CLI::App* sub : app.get_subcommands()) {
    out << "# resolved configuration\n[" << sub->get_name() << "]\n"
        << sub->config_to_str(true, false) << "# end configuration\n";
  }
  try {
    if (*g) cmd_gen(gen, out);
    if (*t) cmd_train(tr, out);
    if (*e) cmd_eval(ev, out);
    if (*p) cmd_episodes(ep, out);
    if (*a) cmd_analyze(an, out);
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const NumericError& ex) {
    err << "numeric failure: " << ex.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace fewshot::cli
