#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sodgp/dataio.hpp"
#include "sodgp/train.hpp"

namespace sodgp {

struct RunConfig {
  std::string data;
  std::string target;
  std::string test_data;   // eval/predict input
  std::string model_path;  // eval/predict: a model file or a directory of them
  int hidden_layers = 2;
  int hidden_width = 0;
  int subset_size = 0;  // 0 selects 50 or 100 from the training size
  std::string subset_method = "kmeans";
  bool ard = false;
  bool linear_mean = false;
  double test_fraction = 0.1;
  TrainConfig train;
  int t_predict = 50;
  int repeats = 1;
  std::string out = "runs";
  bool quiet = false;

  // benchmark suite: entries "name=path[:target]" and depths
  std::vector<std::string> datasets;
  std::vector<int> depths{2};

  void validate() const;
};

struct RunResult {
  DgpModel model;
  TrainHistory history;
  Split split;
};

/// Split, standardize, select the subset, initialize and train one model.
RunResult train_run(const RunConfig& cfg, const Dataset& data, std::uint64_t seed,
                    std::ostream* progress = nullptr);

/// Seeds used for the repeats of a run.
std::vector<std::uint64_t> repeat_seeds(const RunConfig& cfg);

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_benchmark(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// "mean(std)" with three decimals; std is the sample standard deviation.
std::string format_mean_std(const std::vector<double>& values);

/// Maps an exception to the documented exit code: 1 numeric, 2 usage or IO.
int exit_code_for(const std::exception& e);

/// Full command line entry point (subcommands train, eval, predict, benchmark).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Worker count from SODGP_THREADS, capped by the hardware and `cells`.
int worker_threads(int cells);

}  // namespace sodgp
