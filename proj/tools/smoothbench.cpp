// smoothbench: train, attack and evaluate smoothed classifiers on desk-scale
// datasets, and drive the sweep experiments that produce the report CSVs.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smooth/checkpoint.hpp"
#include "smooth/config.hpp"
#include "smooth/csv.hpp"
#include "smooth/error.hpp"
#include "smooth/eval.hpp"
#include "smooth/hash.hpp"
#include "smooth/svm.hpp"
#include "smooth/train.hpp"
#include "smooth/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir;
  std::string seed;
  std::string threads;
  std::vector<std::string> overrides;
  std::string dump_tally_path;  // evaluate only
};

smooth::ExperimentConfig resolve_config(const CliArgs& args) {
  smooth::KvConfig kv;
  if (!args.config_path.empty()) kv = smooth::KvConfig::parse_file(args.config_path);
  kv.merge(smooth::KvConfig::parse_overrides(args.overrides));
  if (!args.seed.empty()) kv.set("seed", args.seed);
  if (!args.out_dir.empty()) kv.set("out.dir", args.out_dir);
  if (!args.threads.empty()) kv.set("threads", args.threads);
  return smooth::ExperimentConfig::from_kv(kv);
}

json config_json(const smooth::ExperimentConfig& cfg) {
  json j = json::object();
  std::istringstream ss(cfg.dump());
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return j;
}

void write_summary(const smooth::ExperimentConfig& cfg, const std::string& command,
                   const std::vector<std::string>& outputs, const std::string& checkpoint_hash,
                   std::size_t rows, double wall_ms) {
  json j;
  j["command"] = command;
  j["config"] = config_json(cfg);
  j["outputs"] = outputs;
  if (!checkpoint_hash.empty()) j["checkpoint_hash"] = checkpoint_hash;
  j["rows"] = rows;
  j["wall_ms"] = wall_ms;
  std::string name = command;
  for (char& c : name)
    if (c == '-') c = '_';
  const std::string path = (fs::path(cfg.out_dir) / (name + "_summary.json")).string();
  smooth::write_file_atomic(path, j.dump(2) + "\n");
}

smooth::Model load_or_build_model(const smooth::ExperimentConfig& cfg,
                                  const smooth::DataSplits& data, bool require_checkpoint) {
  if (!cfg.model_checkpoint.empty()) {
    if (!fs::exists(cfg.model_checkpoint))
      throw smooth::ConfigError("model.checkpoint: file not found: " + cfg.model_checkpoint);
    return smooth::load_model(cfg.model_checkpoint);
  }
  if (require_checkpoint)
    throw smooth::ConfigError("model.checkpoint is required (set model.checkpoint=PATH)");
  smooth::Model m = smooth::build_model(cfg.model_arch, data.train.example_shape(),
                                        data.train.classes, cfg.model_init_seed);
  m.domain_lo = 0.0;
  m.domain_hi = 1.0;
  smooth::apply_model_noise(m, cfg.model_noise_target, cfg.model_noise_alpha,
                            cfg.model_noise_base_sigma, cfg.model_noise_learnable);
  return m;
}

std::string model_label(const smooth::ExperimentConfig& cfg) {
  if (!cfg.model_checkpoint.empty()) return fs::path(cfg.model_checkpoint).stem().string();
  return cfg.model_arch;
}

smooth::CsvWriter trainlog_to_csv(const smooth::TrainLog& log) {
  std::size_t n_alpha = 0;
  for (const auto& row : log.rows) n_alpha = std::max(n_alpha, row.alphas.size());
  std::vector<std::string> header{"epoch", "train_loss", "val_clean_acc", "val_adv_acc", "lr"};
  for (std::size_t i = 0; i < n_alpha; ++i) header.push_back("alpha_" + std::to_string(i));
  smooth::CsvWriter csv(header);
  for (const auto& row : log.rows) {
    std::vector<std::string> fields{
        std::to_string(row.epoch),           smooth::format_double(row.train_loss),
        smooth::format_double(row.val_clean_acc), smooth::format_double(row.val_adv_acc),
        smooth::format_double(row.lr)};
    for (std::size_t i = 0; i < n_alpha; ++i)
      fields.push_back(i < row.alphas.size() ? smooth::format_double(row.alphas[i]) : "");
    csv.add_row(std::move(fields));
  }
  return csv;
}

int run_training(const CliArgs& args, const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  const smooth::ExperimentConfig cfg = resolve_config(args);
  const smooth::DataSplits data = smooth::load_dataset(cfg.dataset);
  const smooth::Model start =
      load_or_build_model(cfg, data, /*require_checkpoint=*/command == "finetune");

  const smooth::FinetuneResult result = smooth::finetune(start, data.train, cfg.train);

  fs::create_directories(cfg.out_dir);
  const std::string ckpt_path = (fs::path(cfg.out_dir) / "model.smck").string();
  smooth::save_model(result.model, ckpt_path);
  const std::string log_path = (fs::path(cfg.out_dir) / "trainlog.csv").string();
  trainlog_to_csv(result.log).write(log_path);

  const double wall =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  write_summary(cfg, command, {ckpt_path, log_path}, smooth::git_blob_sha1_file(ckpt_path),
                result.log.rows.size(), wall);

  const double test_acc = smooth::clean_accuracy(result.model, data.test);
  std::cout << command << ": " << result.log.rows.size() << " epochs, test clean accuracy "
            << smooth::format_double(test_acc) << "%, checkpoint " << ckpt_path << "\n";
  return 0;
}

int run_evaluate_like(const CliArgs& args, const std::string& command) {
  const auto t0 = std::chrono::steady_clock::now();
  const smooth::ExperimentConfig cfg = resolve_config(args);
  const smooth::DataSplits data = smooth::load_dataset(cfg.dataset);
  const smooth::Model model = load_or_build_model(cfg, data, /*require_checkpoint=*/true);
  const std::string label = model_label(cfg);

  smooth::EvalReport report;
  std::string csv_name;
  if (command == "evaluate") {
    std::optional<smooth::AttackConfig> attack;
    if (cfg.has_attack) attack = cfg.attack;
    report.rows.push_back(smooth::evaluate(model, data.test, attack, cfg.smoothing,
                                           cfg.eval_seeds, cfg.eval_seed, label, cfg.threads));
    csv_name = "eval_report.csv";
    if (!args.dump_tally_path.empty() && data.test.size() > 0) {
      smooth::SmoothingConfig sm = cfg.smoothing;
      sm.base_seed = smooth::rng::derive(cfg.eval_seed, 0x7A11);
      const smooth::VoteTally tally = smooth::smooth_predict(model, data.test.example(0), sm);
      smooth::tally_to_csv(tally).write(args.dump_tally_path);
    }
  } else if (command == "attack") {
    if (!cfg.has_attack)
      throw smooth::ConfigError("attack.spec is required for the attack subcommand");
    smooth::SmoothingConfig plain;  // base model only: M=1, sigma=0
    report.rows.push_back(smooth::evaluate(model, data.test, cfg.attack, plain, cfg.eval_seeds,
                                           cfg.eval_seed, label, cfg.threads));
    csv_name = "attack_report.csv";
  } else if (command == "sweep-sigma-m") {
    report = smooth::sweep_sigma_M(model, data.test, cfg, label);
    csv_name = "sweep_sigma_m.csv";
  } else if (command == "sweep-km") {
    report = smooth::sweep_kM(model, data.test, cfg, label);
    csv_name = "sweep_km.csv";
  } else {  // sweep-eps
    report = smooth::sweep_epsilon(model, data.test, cfg, label);
    csv_name = "sweep_eps.csv";
  }

  fs::create_directories(cfg.out_dir);
  const std::string csv_path = (fs::path(cfg.out_dir) / csv_name).string();
  smooth::report_to_csv(report).write(csv_path);

  std::vector<std::string> outputs{csv_path};
  if (!args.dump_tally_path.empty()) outputs.push_back(args.dump_tally_path);
  const double wall =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  write_summary(cfg, command, outputs,
                cfg.model_checkpoint.empty() ? "" : smooth::git_blob_sha1_file(cfg.model_checkpoint),
                report.rows.size(), wall);

  std::cout << command << ": wrote " << report.rows.size() << " row(s) to " << csv_path << "\n";
  if (!report.rows.empty()) {
    const auto& r = report.rows.front();
    const auto clean = smooth::mean_std(r.per_seed_clean);
    std::cout << "  first row: clean "
              << smooth::format_mean_std(clean.mean, clean.std_dev.value_or(0.0));
    if (!r.per_seed_adv.empty()) {
      const auto adv = smooth::mean_std(r.per_seed_adv);
      std::cout << ", adversarial "
                << smooth::format_mean_std(adv.mean, adv.std_dev.value_or(0.0));
    }
    std::cout << "\n";
  }
  return 0;
}

int run_svm_demo(const CliArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  const smooth::ExperimentConfig cfg = resolve_config(args);

  smooth::CsvWriter csv({"rep", "noiseless_objective", "noisy_mc_mean", "clt_half_width",
                         "covered", "separable", "train_accuracy"});
  std::size_t covered = 0;
  for (std::size_t rep = 0; rep < cfg.svm_reps; ++rep) {
    const smooth::SvmNoiseReport r = smooth::svm_noise_experiment(
        cfg.svm_dim, cfg.svm_n, cfg.svm_sigma, cfg.svm_trials,
        smooth::rng::derive(cfg.master_seed, 0x5FD0, rep), cfg.svm_epsilon,
        cfg.dataset.separation);
    const bool ok = std::abs(r.noisy_mc_mean - r.noiseless_objective) <= r.clt_half_width;
    covered += ok ? 1 : 0;
    csv.add_row({std::to_string(rep), smooth::format_double(r.noiseless_objective),
                 smooth::format_double(r.noisy_mc_mean),
                 smooth::format_double(r.clt_half_width), ok ? "1" : "0",
                 r.separable ? "1" : "0", smooth::format_double(r.train_accuracy)});
  }

  fs::create_directories(cfg.out_dir);
  const std::string csv_path = (fs::path(cfg.out_dir) / "svm_demo.csv").string();
  csv.write(csv_path);
  const double wall =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  write_summary(cfg, "svm-demo", {csv_path}, "", cfg.svm_reps, wall);

  std::cout << "svm-demo: " << covered << "/" << cfg.svm_reps
            << " repetitions inside the CLT half-width; " << csv_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smoothed-inference toolkit: training, attacks and Monte Carlo voting"};
  app.require_subcommand(1);

  CliArgs args;
  app.add_option("--config", args.config_path, "key=value config file");
  app.add_option("--seed", args.seed, "master seed override");
  app.add_option("--out", args.out_dir, "output directory");
  app.add_option("--threads", args.threads, "worker threads for evaluation fan-out");
  app.fallthrough();

  const std::vector<std::string> commands = {"train",        "finetune",  "attack",
                                             "evaluate",     "sweep-sigma-m", "sweep-km",
                                             "sweep-eps",    "svm-demo",  "dump-config"};
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("overrides", args.overrides, "key=value config overrides");
    subs[name] = sub;
  }
  subs["evaluate"]->add_option("--dump-tally", args.dump_tally_path,
                               "write the first test example's vote tally CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "dump-config") {
      const smooth::ExperimentConfig cfg = resolve_config(args);
      std::cout << cfg.dump();
      return 0;
    }
    if (command == "train" || command == "finetune") return run_training(args, command);
    if (command == "svm-demo") return run_svm_demo(args);
    return run_evaluate_like(args, command);
  } catch (const smooth::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const smooth::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const smooth::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
