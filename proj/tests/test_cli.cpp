#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "fewshot/analysis.hpp"
#include "fewshot/data.hpp"
#include "fewshot/inference.hpp"
#include "fewshot/predictor.hpp"

using namespace fewshot;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "fewshot_test_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Generated data plus a short linear training run, shared by several cases.
struct Workspace {
  fs::path dir;
  fs::path data;
  fs::path ckpt;

  explicit Workspace(const std::string& name) : dir(fresh_dir(name)), data(dir / "data"), ckpt(dir / "phi.bin") {
    REQUIRE(run({"gen", "--out", data.string()}).code == 0);
    REQUIRE(run({"train", "--data", (data / "large.bin").string(), "--epochs", "5", "--batches", "20",
                 "--checkpoint", ckpt.string(), "--log", (dir / "log.csv").string()})
                .code == 0);
  }
};

}  // namespace

TEST_CASE("gen: files parse back, determinism, validation") {
  const fs::path d = fresh_dir("gen");
  const Run r = run({"gen", "--out", (d / "a").string(), "--seed", "17"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("seed=17") != std::string::npos);
  CHECK(r.out.find("[gen]") != std::string::npos);
  for (const char* f : {"large.bin", "few_train.bin", "few_test.bin"}) {
    CHECK(load_store(d / "a" / f, StoreFormat::Binary).dim() == 16);
  }
  CHECK(fs::exists(d / "a" / "centers.csv"));
  REQUIRE(run({"gen", "--out", (d / "b").string(), "--seed", "17"}).code == 0);
  for (const char* f : {"large.bin", "few_train.bin", "few_test.bin", "centers.csv"}) {
    CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
  }
  const Run bad = run({"gen", "--out", (d / "c").string(), "--categories", "1"});
  CHECK(bad.code == 1);
  CHECK_FALSE(fs::exists(d / "c"));
  CHECK(run({"gen", "--bogus"}).code == 1);
  CHECK(run({}).code == 1);
}

TEST_CASE("config file fills options and flags win") {
  const fs::path d = fresh_dir("config");
  {
    std::ofstream cfg(d / "run.toml");
    cfg << "[gen]\nseed=5\ndim=6\nout=\"" << (d / "from_config").string() << "\"\n";
  }
  REQUIRE(run({"--config", (d / "run.toml").string(), "gen", "--dim", "7"}).code == 0);
  CHECK(load_store(d / "from_config" / "large.bin", StoreFormat::Binary).dim() == 7);
  {
    std::ofstream cfg(d / "bad.toml");
    cfg << "[gen]\nnot_an_option=1\n";
  }
  CHECK(run({"--config", (d / "bad.toml").string(), "gen"}).code == 1);
}

TEST_CASE("train: mean-only log, zero epochs, determinism, numeric failure") {
  const fs::path d = fresh_dir("train");
  REQUIRE(run({"gen", "--out", (d / "data").string()}).code == 0);
  const std::string large = (d / "data" / "large.bin").string();
  const std::string before = slurp(large);

  const Run mo = run({"train", "--data", large, "--mode", "mean-only", "--epochs", "2", "--batches", "5",
                      "--checkpoint", (d / "mo.bin").string(), "--log", (d / "mo.csv").string()});
  REQUIRE(mo.code == 0);
  CHECK(slurp(d / "mo.csv").find("effective_p_mean=1\n") != std::string::npos);

  REQUIRE(run({"train", "--data", large, "--epochs", "0", "--init-seed", "3", "--checkpoint", (d / "e0.bin").string(),
               "--log", (d / "e0.csv").string()})
              .code == 0);
  Rng rng(3);
  CHECK(load_checkpoint(d / "e0.bin") == PhiModel::linear_init(16, rng));

  for (const char* name : {"r1.bin", "r2.bin"}) {
    REQUIRE(run({"train", "--data", large, "--variant", "two-layer", "--epochs", "3", "--batches", "10",
                 "--checkpoint", (d / name).string(), "--log", (d / "r.csv").string(), "--checkpoint-every", "2"})
                .code == 0);
  }
  CHECK(slurp(d / "r1.bin") == slurp(d / "r2.bin"));
  CHECK(fs::exists(d / "r1.bin.epoch2"));
  CHECK(slurp(large) == before);

  write_checkpoint(d / "huge.bin", PhiModel::linear(Matrix(16, 16, 1e300)));
  const Run nan = run({"train", "--data", large, "--init-checkpoint", (d / "huge.bin").string(), "--checkpoint",
                       (d / "nan.bin").string(), "--log", (d / "nan.csv").string()});
  CHECK(nan.code == 2);
  CHECK(nan.err.find("iteration 0") != std::string::npos);

  CHECK(run({"train", "--data", (d / "missing.bin").string()}).code == 1);
}

TEST_CASE("eval: report rows, baseline cross-check, validation") {
  Workspace ws("eval");
  const std::string large = (ws.data / "large.bin").string();
  const std::string ft = (ws.data / "few_train.bin").string();
  const std::string fte = (ws.data / "few_test.bin").string();
  const Run r = run({"eval", "--checkpoint", ws.ckpt.string(), "--large", large, "--few-train", ft, "--few-test", fte,
                     "--out", (ws.dir / "ev").string()});
  REQUIRE(r.code == 0);
  const std::string text = slurp(ws.dir / "ev" / "eval.txt");
  CHECK(text.find("predictor.few.top1=") != std::string::npos);
  CHECK(text.find("nn_cosine.large.top5=") != std::string::npos);
  CHECK(slurp(ws.dir / "ev" / "eval_records.csv").rfind("metric,split,value\n", 0) == 0);

  // The baseline row equals the standalone baseline.
  const auto l = load_store(large, StoreFormat::Binary);
  const auto f = load_store(ft, StoreFormat::Binary);
  const auto t = load_store(fte, StoreFormat::Binary);
  const TopKResult base = nn_cosine_baseline(concat_stores(l, f), t, 1);
  std::ostringstream want;
  want << "nn_cosine.few.count=" << base.count << '\n';
  CHECK(text.find(want.str()) != std::string::npos);
  char buf[64];
  std::snprintf(buf, sizeof buf, "nn_cosine.few.top1=%.17g\n", base.accuracy());
  CHECK(text.find(buf) != std::string::npos);

  const Run shots = run({"eval", "--checkpoint", ws.ckpt.string(), "--large", large, "--few-train", ft, "--few-test",
                         fte, "--shots", "30", "--out", (ws.dir / "ev2").string()});
  CHECK(shots.code == 1);
  CHECK(run({"eval", "--checkpoint", ws.ckpt.string(), "--large", large, "--few-train", ft, "--few-test", fte,
             "--shots", "3", "--out", (ws.dir / "ev3").string()})
            .code == 0);

  REQUIRE(run({"gen", "--out", (ws.dir / "d8").string(), "--dim", "8"}).code == 0);
  CHECK(run({"eval", "--checkpoint", ws.ckpt.string(), "--large", (ws.dir / "d8" / "large.bin").string(),
             "--few-train", ft, "--few-test", fte})
            .code == 1);
}

TEST_CASE("episodes: single candidate, threads, shot ordering") {
  Workspace ws("episodes");
  const std::string ft = (ws.data / "few_train.bin").string();
  const std::string fte = (ws.data / "few_test.bin").string();
  const Run one = run({"episodes", "--checkpoint", ws.ckpt.string(), "--few", ft, "--few", fte, "--n-way", "1",
                       "--episodes", "20"});
  REQUIRE(one.code == 0);
  CHECK(one.out.find("1.0000 ± 0.0000\n") != std::string::npos);

  const fs::path s = ws.dir / "serial", p = ws.dir / "parallel";
  REQUIRE(run({"episodes", "--checkpoint", ws.ckpt.string(), "--few", ft, "--few", fte, "--episodes", "50", "--out",
               s.string()})
              .code == 0);
  REQUIRE(run({"episodes", "--checkpoint", ws.ckpt.string(), "--few", ft, "--few", fte, "--episodes", "50",
               "--threads", "4", "--out", p.string()})
              .code == 0);
  CHECK(slurp(s / "episodes.txt") == slurp(p / "episodes.txt"));
  CHECK(slurp(s / "episodes_records.csv") == slurp(p / "episodes_records.csv"));

  CHECK(run({"episodes", "--checkpoint", ws.ckpt.string(), "--few", ft, "--n-way", "6"}).code == 1);
}

TEST_CASE("analyze: identity, self-similarity, reference, variant checks") {
  const fs::path d = fresh_dir("analyze");
  write_checkpoint(d / "id.bin", PhiModel::linear_identity(16));
  const Run r = run({"analyze", "--checkpoint", (d / "id.bin").string(), "--reference", (d / "id.bin").string(),
                     "--k", "1,4,16", "--out", (d / "out").string()});
  REQUIRE(r.code == 0);
  std::ifstream impacts(d / "out" / "impacts.txt");
  double v = 0.0;
  int n = 0;
  while (impacts >> v) {
    CHECK(v == 1.0);
    ++n;
  }
  CHECK(n == 16);
  CHECK(slurp(d / "out" / "order_similarity.csv") == "k,os\n1,1\n4,1\n16,1\n");
  CHECK(slurp(d / "out" / "summary.txt").find("mean_diag_abs=1\n") != std::string::npos);
  std::ifstream heat(d / "out" / "heatmap.csv");
  CHECK(read_grid_csv(heat).size() == 16);

  CHECK(run({"analyze", "--checkpoint", (d / "id.bin").string(), "--k", "2", "--out", (d / "o2").string()}).code == 1);
  Rng rng(1);
  write_checkpoint(d / "two.bin", PhiModel::two_layer_init(16, rng));
  const Run two = run({"analyze", "--checkpoint", (d / "two.bin").string(), "--out", (d / "o3").string()});
  CHECK(two.code == 1);
  CHECK(two.err.find("linear") != std::string::npos);
}

TEST_CASE("analyze: order similarity against a second-seed reference") {
  Workspace ws("analyze_ref");
  const fs::path ref = ws.dir / "ref.bin";
  REQUIRE(run({"train", "--data", (ws.data / "large.bin").string(), "--epochs", "5", "--batches", "20", "--seed", "99",
               "--init-seed", "99", "--checkpoint", ref.string(), "--log", (ws.dir / "ref.csv").string()})
              .code == 0);
  std::string first;
  for (const char* out : {"a", "b"}) {
    REQUIRE(run({"analyze", "--checkpoint", ws.ckpt.string(), "--reference", ref.string(), "--out",
                 (ws.dir / out).string()})
                .code == 0);
    const std::string os = slurp(ws.dir / out / "order_similarity.csv");
    if (first.empty()) first = os; else CHECK(os == first);
  }
  std::istringstream in(first);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const double v = std::stod(line.substr(line.find(',') + 1));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
