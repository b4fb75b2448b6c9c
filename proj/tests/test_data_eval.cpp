#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "smooth/config.hpp"
#include "smooth/csv.hpp"
#include "smooth/error.hpp"
#include "smooth/eval.hpp"
#include "smooth/hash.hpp"
#include "smooth/svm.hpp"
#include "smooth/util.hpp"
#include "testutil.hpp"

using namespace smooth;
using namespace testutil;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// classifies by dominant input coordinate; 100% accurate on argmax labels
Model identity_classifier(std::size_t dim) {
  Model m;
  m.input_shape = {dim};
  m.layers.push_back(LayerSpec::dense(dim, dim));
  for (std::size_t i = 0; i < dim; ++i) m.layers[0].weight.at(i, i) = 10.0;
  m.sync_noise();
  return m;
}

Dataset argmax_dataset(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Dataset ds;
  ds.classes = dim;
  ds.x = Tensor({n, dim});
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t top = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      ds.x.at(i, d) = rng::uniform(rng::derive(seed, i), d, 0.0, 1.0);
      if (ds.x.at(i, d) > ds.x.at(i, top)) top = d;
    }
    ds.y[i] = static_cast<int>(top);
  }
  return ds;
}

}  // namespace

TEST_CASE("blobs with wide separation are linearly separable") {
  const Dataset ds = make_blobs(2, 2, 10.0, 120, 7);
  const SvmModel svm = train_linear_svm(ds);
  CHECK(svm_accuracy(svm, ds) == 100.0);
  for (double v : ds.x.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("moons come out normalized with balanced binary labels") {
  const Dataset ds = make_moons(200, 0.05, 11);
  CHECK(ds.classes == 2);
  std::size_t ones = 0;
  for (int v : ds.y) ones += static_cast<std::size_t>(v);
  CHECK(ones == 100);
  for (double v : ds.x.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("mini-digits: 8x8 images in [0,1], all ten classes, deterministic") {
  const Dataset a = make_mini_digits(100, 3);
  const Dataset b = make_mini_digits(100, 3);
  CHECK(a.x.shape == std::vector<std::size_t>{100, 1, 8, 8});
  CHECK(a.x.data == b.x.data);
  CHECK(a.y == b.y);
  std::vector<int> counts(10, 0);
  for (int v : a.y) counts[static_cast<std::size_t>(v)]++;
  for (int c : counts) CHECK(c == 10);
  for (double v : a.x.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // different digits render differently
  CHECK(make_mini_digits(20, 3).x.data != make_mini_digits(20, 4).x.data);
}

TEST_CASE("csv loader echoes a well-formed file exactly") {
  const std::string path = tmp_path("smooth_test_echo.csv");
  {
    std::ofstream f(path);
    f << "f0,f1,label\n0.25,0.5,0\n0.75,0.1,1\n0.5,0.9,2\n0,1,1\n";
  }
  const Dataset ds = load_csv_dataset(path, -1);
  CHECK(ds.size() == 4);
  CHECK(ds.classes == 3);
  CHECK(ds.x.data == std::vector<double>{0.25, 0.5, 0.75, 0.1, 0.5, 0.9, 0.0, 1.0});
  CHECK(ds.y == std::vector<int>{0, 1, 2, 1});
  std::filesystem::remove(path);
}

TEST_CASE("csv loader reports malformed rows with line numbers") {
  const std::string path = tmp_path("smooth_test_bad.csv");
  {
    std::ofstream f(path);
    f << "a,b,label\n1,2,0\n1,oops,1\n";
  }
  CHECK_THROWS_WITH_AS(load_csv_dataset(path, -1), doctest::Contains("line 3"), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("csv features outside [0,1] get min-max normalized") {
  const std::string path = tmp_path("smooth_test_range.csv");
  {
    std::ofstream f(path);
    f << "a,label\n-2,0\n0,1\n2,0\n";
  }
  const Dataset ds = load_csv_dataset(path, -1);
  CHECK(ds.x.data == std::vector<double>{0.0, 0.5, 1.0});
  std::filesystem::remove(path);
}

TEST_CASE("idx loader") {
  const std::string ipath = tmp_path("smooth_test_images.idx");
  const std::string lpath = tmp_path("smooth_test_labels.idx");
  auto write_be32 = [](std::ofstream& f, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) f.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  {
    std::ofstream fi(ipath, std::ios::binary);
    write_be32(fi, 0x00000803u);
    write_be32(fi, 2);  // n
    write_be32(fi, 2);  // h
    write_be32(fi, 2);  // w
    const unsigned char pix[8] = {0, 51, 102, 153, 204, 255, 0, 255};
    fi.write(reinterpret_cast<const char*>(pix), 8);
    std::ofstream fl(lpath, std::ios::binary);
    write_be32(fl, 0x00000801u);
    write_be32(fl, 2);
    fl.put(3);
    fl.put(7);
  }
  SUBCASE("round trip") {
    const Dataset ds = load_idx_dataset(ipath, lpath);
    CHECK(ds.size() == 2);
    CHECK(ds.x.shape == std::vector<std::size_t>{2, 1, 2, 2});
    CHECK(ds.x.data[1] == doctest::Approx(51.0 / 255));
    CHECK(ds.y == std::vector<int>{3, 7});
  }
  SUBCASE("magic mismatch is a parse error") {
    CHECK_THROWS_WITH_AS(load_idx_dataset(lpath, ipath), doctest::Contains("magic"),
                         ParseError);
  }
  std::filesystem::remove(ipath);
  std::filesystem::remove(lpath);
}

TEST_CASE("dataset splits are deterministic and disjoint") {
  DatasetSpec spec;
  spec.source = DataSource::MiniDigits;
  spec.n = 100;
  spec.seed = 5;
  spec.test_fraction = 0.2;
  const DataSplits a = load_dataset(spec);
  const DataSplits b = load_dataset(spec);
  CHECK(a.train.x.data == b.train.x.data);
  CHECK(a.test.x.data == b.test.x.data);
  CHECK(a.train.size() == 80);
  CHECK(a.test.size() == 20);
}

TEST_CASE("report row format fixture") {
  CHECK(format_mean_std(55.92, 0.22) == std::string("55.92±0.22"));
  CHECK(format_mean_std(100.0, 0.0) == std::string("100.00±0.00"));
}

TEST_CASE("csv writer escapes fields and keeps LF endings") {
  CsvWriter csv({"a", "b"});
  csv.add_row({"plain", "with,comma"});
  csv.add_row({"quote\"inside", "line\nbreak"});
  const std::string out = csv.to_string();
  CHECK(out ==
        "a,b\nplain,\"with,comma\"\n\"quote\"\"inside\",\"line\nbreak\"\n");
  CHECK_THROWS_AS(csv.add_row({"only-one"}), ConfigError);
}

TEST_CASE("sha1 matches known vectors") {
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(sha1_hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  // git hash-object of "hello\n"
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("evaluate on a perfect classifier reports 100 with zero std") {
  const Dataset test = argmax_dataset(50, 3, 21);
  const Model m = identity_classifier(3);
  SmoothingConfig sm;  // M=1, sigma=0
  const EvalRow row = evaluate(m, test, std::nullopt, sm, 3, 77, "identity", 1);
  REQUIRE(row.per_seed_clean.size() == 3);
  for (double v : row.per_seed_clean) CHECK(v == 100.0);
  const MeanStd stats = mean_std(row.per_seed_clean);
  CHECK(stats.mean == 100.0);
  CHECK(*stats.std_dev == 0.0);
  CHECK(row.per_seed_adv.empty());
}

TEST_CASE("zero-budget attack leaves adversarial accuracy at clean accuracy") {
  const Dataset test = argmax_dataset(60, 3, 22);
  const Model m = identity_classifier(3);
  AttackConfig a;
  a.family = AttackFamily::Pgd;
  a.epsilon = 0.0;
  a.steps = 3;
  SmoothingConfig sm;
  const EvalRow row = evaluate(m, test, a, sm, 2, 78, "identity", 1);
  CHECK(row.per_seed_adv == row.per_seed_clean);
}

TEST_CASE("report integrity: mean inside [min,max], std recomputable") {
  const std::vector<double> vals{55.7, 56.1, 55.92, 55.4, 56.3};
  const MeanStd stats = mean_std(vals);
  double lo = vals[0], hi = vals[0], sum = 0.0;
  for (double v : vals) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  const double mean = sum / 5.0;
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  CHECK(stats.mean >= lo);
  CHECK(stats.mean <= hi);
  CHECK(std::abs(*stats.std_dev - std::sqrt(ss / 4.0)) < 1e-9);
}

TEST_CASE("sweep_sigma_M") {
  const Dataset test = argmax_dataset(40, 3, 23);
  const Model m = identity_classifier(3);
  ExperimentConfig cfg;
  cfg.eval_seeds = 1;
  cfg.eval_seed = 5;
  cfg.threads = 1;
  cfg.has_attack = false;

  SUBCASE("trivial 1x1 grid equals plain evaluation") {
    cfg.sweep_sigmas = {0.0};
    cfg.sweep_ms = {1};
    const EvalReport rep = sweep_sigma_M(m, test, cfg, "identity");
    REQUIRE(rep.rows.size() == 1);
    SmoothingConfig sm;
    const EvalRow direct = evaluate(m, test, std::nullopt, sm, 1, 5, "identity", 1);
    CHECK(rep.rows[0].per_seed_clean == direct.per_seed_clean);
  }
  SUBCASE("sigma=0 column is constant across M for a deterministic base") {
    cfg.sweep_sigmas = {0.0};
    cfg.sweep_ms = {1, 4, 16};
    const EvalReport rep = sweep_sigma_M(m, test, cfg, "identity");
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[1].per_seed_clean == rep.rows[0].per_seed_clean);
    CHECK(rep.rows[2].per_seed_clean == rep.rows[0].per_seed_clean);
  }
}

TEST_CASE("sweep_epsilon rows are tied to clean accuracy at eps=0 and reproducible") {
  // train a small model on blobs so the attack has structure to break
  DatasetSpec dspec;
  dspec.source = DataSource::Blobs;
  dspec.classes = 3;
  dspec.dim = 4;
  dspec.separation = 6.0;
  dspec.n = 150;
  dspec.seed = 31;
  const DataSplits data = load_dataset(dspec);
  Model m = build_model("mlp:16", data.train.example_shape(), 3, 32);
  TrainConfig tc;
  tc.mode = TrainMode::Clean;
  tc.epochs = 4;
  tc.batch_size = 16;
  tc.lr = 0.2;
  tc.seed = 33;
  tc.attack.family = AttackFamily::None;
  tc.attack.epsilon = 0;
  m = finetune(m, data.train, tc).model;

  ExperimentConfig cfg;
  cfg.eval_seeds = 2;
  cfg.eval_seed = 35;
  cfg.sweep_eps = {0.0, 0.05, 0.3};
  cfg.attack.family = AttackFamily::Pgd;
  cfg.attack.steps = 5;
  cfg.has_attack = true;

  const EvalReport rep = sweep_epsilon(m, data.test, cfg, "blob-mlp");
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].per_seed_adv == rep.rows[0].per_seed_clean);  // eps=0
  const MeanStd first = mean_std(rep.rows[0].per_seed_adv);
  const MeanStd last = mean_std(rep.rows[2].per_seed_adv);
  CHECK(last.mean <= first.mean);  // monotone threat, desk scale

  const EvalReport rep2 = sweep_epsilon(m, data.test, cfg, "blob-mlp");
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i].per_seed_clean == rep2.rows[i].per_seed_clean);
    CHECK(rep.rows[i].per_seed_adv == rep2.rows[i].per_seed_adv);
  }
}

TEST_CASE("sweep_kM buckets pgd k=8 with epgd k=1 mb=8") {
  const Dataset test = argmax_dataset(20, 3, 41);
  const Model m = identity_classifier(3);
  ExperimentConfig cfg;
  cfg.eval_seeds = 1;
  cfg.eval_seed = 42;
  cfg.sweep_families = {"pgd", "epgd"};
  cfg.sweep_ks = {1, 8};
  cfg.sweep_mbs = {8};
  cfg.attack.epsilon = 0.05;
  cfg.has_attack = true;

  const EvalReport rep = sweep_kM(m, test, cfg, "identity");
  // pgd: k in {1,8} with mb=1; epgd: k in {1,8} with mb=8
  REQUIRE(rep.rows.size() == 4);
  const EvalRow* pgd8 = nullptr;
  const EvalRow* epgd1x8 = nullptr;
  for (const auto& r : rep.rows) {
    if (r.attack_spec.find("family:pgd") != std::string::npos &&
        r.attack_spec.find("k:8") != std::string::npos)
      pgd8 = &r;
    if (r.attack_spec.find("family:epgd") != std::string::npos &&
        r.attack_spec.find("k:1,") != std::string::npos)
      epgd1x8 = &r;
  }
  REQUIRE(pgd8 != nullptr);
  REQUIRE(epgd1x8 != nullptr);
  CHECK(pgd8->grad_evals == 8);
  CHECK(epgd1x8->grad_evals == 8);
}

TEST_CASE("report CSV carries the schema and survives a round of formatting") {
  EvalReport rep;
  EvalRow r;
  r.model_id = "m";
  r.scheme = "prediction";
  r.samples = 4;
  r.sigma = 0.25;
  r.attack_spec = "family:pgd,eps:0.1,k:7,alpha:0.035714285714285712,random_start:0,seed:0";
  r.grad_evals = 7;
  r.per_seed_clean = {90.0, 92.5};
  r.per_seed_adv = {60.0, 61.5};
  rep.rows.push_back(r);
  const CsvWriter csv = report_to_csv(rep);
  const std::string out = csv.to_string();
  CHECK(out.find("model,scheme,samples,sigma,attack,grad_evals,clean_mean,clean_std,"
                 "adv_mean,adv_std,seeds,per_seed_clean,per_seed_adv") == 0);
  CHECK(out.find("\"family:pgd") != std::string::npos);  // quoted: contains commas
  CHECK(out.find("90;92.5") != std::string::npos);
}

TEST_CASE("svm noise experiment") {
  SUBCASE("sigma=0 makes the Monte Carlo mean exactly the noiseless objective") {
    const SvmNoiseReport rep = svm_noise_experiment(4, 80, 0.0, 50, 9, 0.1, 8.0);
    CHECK(rep.noisy_mc_mean == rep.noiseless_objective);
    CHECK(rep.clt_half_width == 0.0);
    CHECK(rep.separable);
  }
  SUBCASE("E[w.eta] term concentrates at 0 with CLT rate") {
    const std::size_t trials = 20000;
    const SvmNoiseReport rep = svm_noise_experiment(6, 100, 0.5, trials, 10, 0.1, 8.0);
    // |mc_mean - noiseless| is the empirical |mean of the noise term|
    const Dataset data = make_blobs(2, 6, 8.0, 100, 10);
    const SvmModel svm = train_linear_svm(data);
    double wnorm2 = 0.0;
    for (double v : svm.w) wnorm2 += v * v;
    // per-trial noise term variance: sigma^2 ||w||^2 / n
    const double band =
        4.0 * 0.5 * std::sqrt(wnorm2 / 100.0) / std::sqrt(static_cast<double>(trials));
    CHECK(std::abs(rep.noisy_mc_mean - rep.noiseless_objective) < band);
  }
  SUBCASE("coverage: MC mean within the reported half-width in nearly all reps") {
    std::size_t covered = 0;
    const std::size_t reps = 30;
    for (std::size_t rep_i = 0; rep_i < reps; ++rep_i) {
      const SvmNoiseReport rep = svm_noise_experiment(5, 60, 0.4, 2000, 100 + rep_i, 0.1, 8.0);
      if (std::abs(rep.noisy_mc_mean - rep.noiseless_objective) <= rep.clt_half_width)
        ++covered;
    }
    CHECK(covered >= 28);
  }
}

TEST_CASE("config parsing") {
  const std::string path = tmp_path("smooth_test_config.cfg");
  {
    std::ofstream f(path);
    f << "# comment line\n";
    f << "train.lr=0.25\n";
    f << "dataset.source=blobs\n";
    f << "dataset.classes=3\n";
    f << "dataset.n=50   # trailing comment\n";
    f << "sweep.sigmas=0,0.1,0.2\n";
    f << "attack.spec=family:pgd,eps:0.05,k:3\n";
  }
  SUBCASE("values land in the experiment config") {
    KvConfig kv = KvConfig::parse_file(path);
    const ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
    CHECK(cfg.train.lr == 0.25);
    CHECK(cfg.dataset.source == DataSource::Blobs);
    CHECK(cfg.dataset.n == 50);
    CHECK(cfg.sweep_sigmas == std::vector<double>{0.0, 0.1, 0.2});
    CHECK(cfg.has_attack);
    CHECK(cfg.attack.epsilon == doctest::Approx(0.05));
  }
  SUBCASE("overrides win over the file") {
    KvConfig kv = KvConfig::parse_file(path);
    kv.merge(KvConfig::parse_overrides({"train.lr=0.5"}));
    CHECK(ExperimentConfig::from_kv(kv).train.lr == 0.5);
  }
  SUBCASE("unknown keys are rejected") {
    KvConfig kv = KvConfig::parse_file(path);
    kv.set("train.typo_key", "1");
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_kv(kv), doctest::Contains("typo_key"),
                         ConfigError);
  }
  SUBCASE("dump echoes every resolved key deterministically") {
    KvConfig kv = KvConfig::parse_file(path);
    const ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
    const std::string dump = cfg.dump();
    CHECK(dump.find("train.lr=0.25\n") != std::string::npos);
    CHECK(dump.find("dataset.source=blobs\n") != std::string::npos);
    CHECK(dump.find("smooth.m=1\n") != std::string::npos);  // default included
    CHECK(dump == cfg.dump());
  }
  std::filesystem::remove(path);
}

TEST_CASE("build_model architectures") {
  CHECK(build_model("linear", {8}, 3, 1).layers.size() == 1);
  const Model mlp_model = build_model("mlp:16-8", {10}, 4, 2);
  CHECK(mlp_model.num_classes() == 4);
  const Model cnn = build_model("cnn:4-8", {1, 8, 8}, 10, 3);
  CHECK(cnn.num_classes() == 10);
  CHECK_THROWS_AS(build_model("resnet:50", {8}, 3, 1), ConfigError);
  CHECK_THROWS_AS(build_model("cnn:4", {8}, 3, 1), ConfigError);  // needs image input

  Model noisy = build_model("mlp:8", {6}, 3, 4);
  apply_model_noise(noisy, "weight", 0.25, 1.0, true);
  std::size_t enabled = 0;
  for (const auto& n : noisy.noise) enabled += n.enabled ? 1 : 0;
  CHECK(enabled == 2);  // both dense layers
  CHECK_THROWS_AS(apply_model_noise(noisy, "blue", 0.1, 1.0, false), ConfigError);
}

TEST_CASE("tally dump lists every (sample, class) pair with ranks") {
  const Model m = identity_classifier(3);
  SmoothingConfig sm;
  sm.samples = 3;
  sm.sigma = 0.2;
  sm.base_seed = 9;
  Tensor x({1, 3}, {0.9, 0.2, 0.1});
  const VoteTally tally = smooth_predict(m, x, sm);
  const CsvWriter csv = tally_to_csv(tally);
  CHECK(csv.rows() == 9);
  CHECK(csv.to_string().find("sample_index,class,probability,rank\n") == 0);
}
