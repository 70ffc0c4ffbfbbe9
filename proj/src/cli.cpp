#include "sodgp/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "sodgp/dataio.hpp"
#include "sodgp/predict.hpp"
#include "sodgp/subset.hpp"

namespace sodgp {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path);
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

std::string dataset_csv(const Dataset& d) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (const auto& name : d.feature_names) out << name << ',';
  out << (d.target_name.empty() ? "y" : d.target_name) << '\n';
  for (int i = 0; i < d.rows(); ++i) {
    for (int c = 0; c < d.features(); ++c) out << d.x(i, c) << ',';
    out << d.y(i) << '\n';
  }
  return out.str();
}

std::string metrics_csv(const Metrics& m) {
  std::ostringstream out;
  out << std::setprecision(17) << "nlpp,rmse\n" << m.nlpp << ',' << m.rmse << '\n';
  return out.str();
}

Metrics read_metrics(const fs::path& path) {
  const auto rows = parse_csv(read_file(path.string()));
  if (rows.size() != 2 || rows[1].size() != 2) throw ParseError("metrics file " + path.string() + " is malformed", 0);
  return {std::stod(rows[1][0]), std::stod(rows[1][1])};
}

std::vector<std::string> model_files(const std::string& path) {
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path)) throw IoError("model not found: " + path);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("model_", 0) == 0 && entry.path().extension() == ".json") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no model_*.json files in " + path);
  return files;
}

// Test file written next to a model by `train`: model_seedN.json -> test_seedN.csv.
std::string sibling_test_file(const std::string& model_path) {
  const fs::path p(model_path);
  std::string stem = p.stem().string();
  if (stem.rfind("model_", 0) == 0) stem = stem.substr(6);
  return (p.parent_path() / ("test_" + stem + ".csv")).string();
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct SuiteEntry {
  std::string name;
  std::string path;
  std::string target;
};

SuiteEntry parse_suite_entry(const std::string& spec) {
  SuiteEntry e;
  const auto eq = spec.find('=');
  std::string rest = spec;
  if (eq != std::string::npos) {
    e.name = spec.substr(0, eq);
    rest = spec.substr(eq + 1);
  }
  const auto colon = rest.rfind(':');
  if (colon != std::string::npos && colon + 1 < rest.size() && rest.find('/', colon) == std::string::npos) {
    e.path = rest.substr(0, colon);
    e.target = rest.substr(colon + 1);
  } else {
    e.path = rest;
  }
  if (e.name.empty()) e.name = fs::path(e.path).stem().string();
  return e;
}

}  // namespace

void RunConfig::validate() const {
  if (repeats < 1) throw UsageError("repeats must be at least 1");
  if (hidden_layers < 0) throw UsageError("layers must be non-negative");
  if (subset_size < 0) throw UsageError("subset-size must be non-negative");
  if (subset_method != "kmeans" && subset_method != "random") {
    throw UsageError("subset-method must be kmeans or random, got '" + subset_method + "'");
  }
  if (t_predict < 1) throw UsageError("samples-predict must be positive");
  train.validate();
}

RunResult train_run(const RunConfig& cfg, const Dataset& data, std::uint64_t seed,
                    std::ostream* progress) {
  RunResult r;
  r.split = split(data, cfg.test_fraction, seed);
  const Standardization& st = r.split.standardization;
  const Tensor x = st.apply_x(r.split.train.x);
  const Vector y = st.apply_y(r.split.train.y);
  const int n = static_cast<int>(x.rows());
  const int m = cfg.subset_size > 0 ? cfg.subset_size : std::min(default_subset_size(n), n);

  Architecture arch;
  arch.input_dim = data.features();
  arch.hidden_layers = cfg.hidden_layers;
  arch.hidden_width = cfg.hidden_width;
  arch.ard = cfg.ard;
  arch.linear_mean = cfg.linear_mean;

  const SubsetIndex subset =
      cfg.subset_method == "random" ? random_subset(n, m, seed) : kmeans_subset(x, m, seed);
  r.model = init_model(arch, m, seed);
  r.model.standardization = st;
  attach_subset(r.model, x, y, subset);

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.progress = progress;
  r.history = train(r.model, x, y, tc);
  return r;
}

std::vector<std::uint64_t> repeat_seeds(const RunConfig& cfg) {
  std::vector<std::uint64_t> seeds;
  for (int r = 0; r < cfg.repeats; ++r) seeds.push_back(cfg.train.seed + static_cast<std::uint64_t>(r));
  return seeds;
}

std::string format_mean_std(const std::vector<double>& values) {
  double mean = 0.0;
  for (double v : values) mean += v;
  if (!values.empty()) mean /= static_cast<double>(values.size());
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << mean << '(' << sample_std(values) << ')';
  return out.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return 1;
  if (dynamic_cast<const UsageError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const std::ios_base::failure*>(&e) != nullptr) return 2;
  return 1;
}

int worker_threads(int cells) {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SODGP_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, std::min(n, cells));
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.validate();
  require_file(cfg.data, "data file");
  const Dataset data = load_csv(cfg.data, cfg.target);
  const fs::path dir(cfg.out);
  ensure_dir(dir);
  for (const std::uint64_t seed : repeat_seeds(cfg)) {
    RunResult r = train_run(cfg, data, seed, cfg.quiet ? nullptr : &out);
    for (const auto& w : r.split.standardization.warnings) err << "warning: " << w << '\n';
    const std::string tag = seed_tag(seed);
    save_model(r.model, (dir / ("model_" + tag + ".json")).string());
    write_history(r.history, (dir / ("history_" + tag + ".csv")).string());
    write_file((dir / ("test_" + tag + ".csv")).string(), dataset_csv(r.split.test));
    const double final_elbo = r.history.rows.empty() ? std::nan("") : r.history.rows.back().elbo.total;
    out << tag << " final elbo " << std::setprecision(10) << final_elbo << '\n';
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
  cfg.validate();
  const std::vector<std::string> files = model_files(cfg.model_path);
  std::vector<double> nlpps;
  std::vector<double> rmses;
  std::ostringstream csv;
  csv << std::setprecision(17) << "model,nlpp,rmse\n";
  for (const auto& file : files) {
    const DgpModel model = load_model(file);
    const std::string test = cfg.test_data.empty() ? sibling_test_file(file) : cfg.test_data;
    require_file(test, "test data");
    const Dataset data = load_csv(test, cfg.target);
    const Metrics m = evaluate(model, data.x, data.y, cfg.t_predict, cfg.train.seed);
    nlpps.push_back(m.nlpp);
    rmses.push_back(m.rmse);
    out << fs::path(file).filename().string() << ": nlpp " << std::setprecision(6) << m.nlpp
        << " rmse " << m.rmse << '\n';
    csv << fs::path(file).filename().string() << ',' << m.nlpp << ',' << m.rmse << '\n';
  }
  out << "NLPP " << format_mean_std(nlpps) << "  RMSE " << format_mean_std(rmses) << '\n';
  ensure_dir(cfg.out);
  write_file((fs::path(cfg.out) / "eval_results.csv").string(), csv.str());
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& /*err*/) {
  cfg.validate();
  require_file(cfg.model_path, "model");
  const std::string input = cfg.test_data.empty() ? cfg.data : cfg.test_data;
  require_file(input, "input data");
  const DgpModel model = load_model(cfg.model_path);
  const auto records = parse_csv(read_file(input));
  Tensor x;
  if (!records.empty() && static_cast<int>(records.front().size()) == model.arch.input_dim) {
    // Features only: add a dummy target column so the common parser applies.
    std::ostringstream text;
    for (const auto& row : records) {
      for (const auto& cell : row) text << cell << ',';
      text << (&row == &records.front() ? "__target" : "0") << '\n';
    }
    x = parse_dataset(text.str(), "__target").x;
  } else {
    x = load_csv(input, cfg.target).x;
  }
  const Standardization& st = model.standardization;
  const auto mixtures = predict(model, st.apply_x(x), cfg.t_predict, cfg.train.seed);
  std::ostringstream csv;
  csv << std::setprecision(17) << "mean,variance\n";
  for (const auto& mix : mixtures) {
    double m1 = 0.0;
    double m2 = 0.0;
    for (const auto& c : mix.components) {
      m1 += c.mean;
      m2 += c.var + mix.noise_var + c.mean * c.mean;
    }
    const auto t = static_cast<double>(mix.components.size());
    m1 /= t;
    m2 = m2 / t - m1 * m1;
    csv << m1 * st.y_scale + st.y_mean << ',' << m2 * st.y_scale * st.y_scale << '\n';
  }
  ensure_dir(cfg.out);
  const std::string path = (fs::path(cfg.out) / "predictions.csv").string();
  write_file(path, csv.str());
  out << "wrote " << mixtures.size() << " predictions to " << path << '\n';
  return 0;
}

int cmd_benchmark(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.validate();
  std::vector<SuiteEntry> suite;
  for (const auto& spec : cfg.datasets) suite.push_back(parse_suite_entry(spec));
  if (suite.empty() && !cfg.data.empty()) suite.push_back(parse_suite_entry(cfg.data + (cfg.target.empty() ? "" : ":" + cfg.target)));
  if (suite.empty()) throw UsageError("benchmark: no datasets configured");
  if (cfg.depths.empty()) throw UsageError("benchmark: no depths configured");

  std::map<std::string, Dataset> loaded;
  for (const auto& e : suite) {
    require_file(e.path, "data file");
    loaded.emplace(e.name, load_csv(e.path, e.target));
  }

  struct Cell {
    std::string dataset;
    int depth;
    std::uint64_t seed;
    fs::path dir;
    Metrics metrics;
    std::string status;
  };
  std::vector<Cell> cells;
  for (const auto& e : suite) {
    for (int depth : cfg.depths) {
      for (const std::uint64_t seed : repeat_seeds(cfg)) {
        cells.push_back({e.name, depth, seed,
                         fs::path(cfg.out) / e.name / ("dgp" + std::to_string(depth)) / seed_tag(seed),
                         {}, ""});
      }
    }
  }

  std::mutex io;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& c = cells[i];
      const fs::path metrics_path = c.dir / "metrics.csv";
      try {
        if (fs::exists(metrics_path)) {
          c.metrics = read_metrics(metrics_path);
          c.status = "cached";
        } else {
          ensure_dir(c.dir);
          RunConfig run = cfg;
          run.hidden_layers = c.depth;
          const RunResult r = train_run(run, loaded.at(c.dataset), c.seed, nullptr);
          c.metrics = evaluate(r.model, r.split.test.x, r.split.test.y, cfg.t_predict, c.seed);
          save_model(r.model, (c.dir / "model.json").string());
          write_history(r.history, (c.dir / "history.csv").string());
          write_file(metrics_path.string(), metrics_csv(c.metrics));
          c.status = "ok";
        }
      } catch (const std::exception& e) {
        c.status = std::string("failed: ") + e.what();
      }
      std::lock_guard<std::mutex> lock(io);
      out << c.dataset << " DGP" << c.depth << " " << seed_tag(c.seed) << ": " << c.status;
      if (c.status.rfind("failed", 0) != 0) {
        out << " nlpp " << std::setprecision(6) << c.metrics.nlpp << " rmse " << c.metrics.rmse;
      }
      out << '\n';
    }
  };
  const int threads = worker_threads(static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << std::setprecision(17) << "dataset,depth,seed,nlpp,rmse,status\n";
  std::ostringstream md;
  md << "| Dataset | Model | NLPP | RMSE | Runs |\n|---|---|---|---|---|\n";
  bool any_failed = false;
  for (const auto& e : suite) {
    for (int depth : cfg.depths) {
      std::vector<double> nl;
      std::vector<double> rm;
      for (const auto& c : cells) {
        if (c.dataset != e.name || c.depth != depth) continue;
        const bool failed = c.status.rfind("failed", 0) == 0;
        any_failed = any_failed || failed;
        csv << c.dataset << ',' << c.depth << ',' << c.seed << ',';
        if (failed) {
          csv << ",,failed\n";
          err << c.dataset << " DGP" << c.depth << " " << seed_tag(c.seed) << " " << c.status << '\n';
        } else {
          csv << c.metrics.nlpp << ',' << c.metrics.rmse << ",ok\n";
          nl.push_back(c.metrics.nlpp);
          rm.push_back(c.metrics.rmse);
        }
      }
      md << "| " << e.name << " | SoD-DGP" << depth << " | "
         << (nl.empty() ? "-" : format_mean_std(nl)) << " | "
         << (rm.empty() ? "-" : format_mean_std(rm)) << " | " << nl.size() << " |\n";
    }
  }
  ensure_dir(cfg.out);
  write_file((fs::path(cfg.out) / "results.csv").string(), csv.str());
  write_file((fs::path(cfg.out) / "results.md").string(), md.str());
  out << md.str();
  return any_failed ? 1 : 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subset-of-data variational inference for GP and deep GP regression", "sodgp"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key = value file; command-line flags take precedence");

  RunConfig cfg;
  app.add_option("--data", cfg.data, "Training CSV (train, benchmark) or prediction input");
  app.add_option("--target", cfg.target, "Target column name or index (default: last column)");
  app.add_option("--test", cfg.test_data, "Test CSV for eval/predict");
  app.add_option("--model", cfg.model_path, "Model file, or a directory of model_*.json for eval");
  app.add_option("--layers", cfg.hidden_layers, "Hidden GP layers before the output layer")->capture_default_str();
  app.add_option("--hidden-width", cfg.hidden_width, "Hidden width (0: min(30, inputs))")->capture_default_str();
  app.add_option("--subset-size", cfg.subset_size, "Subset size M (0: 50 below 5000 rows, else 100)")->capture_default_str();
  app.add_option("--subset-method", cfg.subset_method, "kmeans or random")->capture_default_str();
  app.add_flag("--ard", cfg.ard, "One lengthscale per input dimension");
  app.add_flag("--linear-mean", cfg.linear_mean, "Linear mean function on hidden layers");
  app.add_flag("--freeze-noise", cfg.train.freeze_intermediate_noise, "Keep hidden-layer noise fixed");
  app.add_option("--test-fraction", cfg.test_fraction, "Held-out fraction")->capture_default_str();
  app.add_option("--iters", cfg.train.iterations, "Training iterations")->capture_default_str();
  app.add_option("--batch", cfg.train.batch_size, "Minibatch size")->capture_default_str();
  app.add_option("--lr", cfg.train.learning_rate, "Adam learning rate")->capture_default_str();
  app.add_option("--samples-train", cfg.train.t_train, "MC samples per training step")->capture_default_str();
  app.add_option("--samples-predict", cfg.t_predict, "MC samples for prediction")->capture_default_str();
  app.add_option("--log-every", cfg.train.log_every, "History interval")->capture_default_str();
  app.add_option("--seed", cfg.train.seed, "Master seed")->capture_default_str();
  app.add_option("--repeats", cfg.repeats, "Repeats with seeds seed, seed+1, ...")->capture_default_str();
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();
  app.add_option("--datasets", cfg.datasets, "Benchmark entries name=path[:target]");
  app.add_option("--depths", cfg.depths, "Benchmark hidden-layer counts")->capture_default_str();
  app.add_flag("--quiet", cfg.quiet, "No progress lines");

  auto* train_cmd = app.add_subcommand("train", "Select a subset, train and save models");
  auto* eval_cmd = app.add_subcommand("eval", "Score saved models on test data");
  auto* predict_cmd = app.add_subcommand("predict", "Write predictive means and variances");
  auto* bench_cmd = app.add_subcommand("benchmark", "Train and evaluate a dataset x depth x repeat suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(cfg, out, err);
    if (eval_cmd->parsed()) return cmd_eval(cfg, out, err);
    if (predict_cmd->parsed()) return cmd_predict(cfg, out, err);
    if (bench_cmd->parsed()) return cmd_benchmark(cfg, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 2;
}

}  // namespace sodgp
