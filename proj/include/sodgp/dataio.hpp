#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sodgp/model.hpp"
#include "sodgp/train.hpp"

namespace sodgp {

struct Dataset {
  Tensor x;
  Vector y;
  std::vector<std::string> feature_names;
  std::string target_name;

  int rows() const { return static_cast<int>(x.rows()); }
  int features() const { return static_cast<int>(x.cols()); }
};

/// Parses RFC-4180 style text (comma separated, optional quoting).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// `target` is a header name or a column index; negative indices count from
/// the end. An empty target selects the last column.
Dataset load_csv(const std::string& path, const std::string& target = "", bool header = true);
Dataset parse_dataset(const std::string& text, const std::string& target = "", bool header = true);

/// Population mean and standard deviation per column. Constant columns get
/// scale 1 and a warning.
Standardization fit_standardization(const Tensor& x, const Vector& y,
                                    const std::vector<std::string>& names = {});

struct Split {
  Dataset train;  // raw units
  Dataset test;
  Standardization standardization;  // fitted on train
};

/// Seeded shuffle, then the first round(N * test_fraction) rows go to test.
Split split(const Dataset& data, double test_fraction, std::uint64_t seed);

void save_model(const DgpModel& model, const std::string& path);
DgpModel load_model(const std::string& path);
std::string model_to_json(const DgpModel& model);
DgpModel model_from_json(const std::string& text);

void write_history(const TrainHistory& history, const std::string& path,
                   bool include_wall_time = true);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace sodgp
