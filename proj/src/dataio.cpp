#include "sodgp/dataio.hpp"

#include <sodium.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "sodgp/rng.hpp"

namespace sodgp {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "sodgp-model";
constexpr int kVersion = 1;

void ensure_sodium() {
  if (sodium_init() < 0) throw Error("libsodium failed to initialize");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& cell, double& out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

// Little-endian float64 array as base64.
std::string encode(const double* data, std::size_t n) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  ensure_sodium();
  const auto bytes = n * sizeof(double);
  std::string out(sodium_base64_encoded_len(bytes, sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), reinterpret_cast<const unsigned char*>(data), bytes,
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(std::strlen(out.c_str()));
  return out;
}

std::vector<double> decode(const std::string& text) {
  ensure_sodium();
  std::vector<unsigned char> bytes(text.size());
  std::size_t len = 0;
  if (sodium_base642bin(bytes.data(), bytes.size(), text.data(), text.size(), nullptr, &len,
                        nullptr, sodium_base64_VARIANT_ORIGINAL) != 0 ||
      len % sizeof(double) != 0) {
    throw ParseError("model file: malformed base64 array", 0);
  }
  std::vector<double> out(len / sizeof(double));
  std::memcpy(out.data(), bytes.data(), len);
  return out;
}

json encode_tensor(const Tensor& t) {
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"data", encode(t.data(), static_cast<std::size_t>(t.size()))}};
}

Tensor decode_tensor(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const std::vector<double> v = decode(j.at("data").get<std::string>());
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
    throw ParseError("model file: array length does not match its shape", 0);
  }
  Tensor t(rows, cols);
  std::copy(v.begin(), v.end(), t.data());
  return t;
}

json encode_vector(const Vector& v) { return encode(v.data(), static_cast<std::size_t>(v.size())); }

Vector decode_vector(const json& j) {
  const std::vector<double> v = decode(j.get<std::string>());
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string checksum(const std::string& payload) {
  ensure_sodium();
  unsigned char hash[crypto_generichash_BYTES];
  crypto_generichash(hash, sizeof hash, reinterpret_cast<const unsigned char*>(payload.data()),
                     payload.size(), nullptr, 0);
  char hex[2 * crypto_generichash_BYTES + 1];
  sodium_bin2hex(hex, sizeof hex, hash, sizeof hash);
  return hex;
}

Dataset select_rows(const Dataset& d, const std::vector<int>& rows) {
  Dataset out;
  out.feature_names = d.feature_names;
  out.target_name = d.target_name;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), d.x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = d.x.row(rows[i]);
    out.y(static_cast<Eigen::Index>(i)) = d.y(rows[i]);
  }
  return out;
}

// Records plus the source line each one starts on.
std::vector<std::vector<std::string>> parse_records(const std::string& text,
                                                    std::vector<long>* lines) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool row_has_content = false;
  long line = 1;
  long row_start = 1;
  auto finish_row = [&] {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
    if (lines != nullptr) lines->push_back(row_start);
  };
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (!row_has_content && cell.empty()) row_start = line;
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(cell));
        cell.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !cell.empty()) finish_row();
        row.clear();
        cell.clear();
        row_has_content = false;
        ++line;
        break;
      default:
        cell.push_back(c);
        row_has_content = true;
    }
  }
  if (quoted) throw ParseError("csv: unterminated quoted field at line " + std::to_string(row_start), row_start);
  if (row_has_content || !cell.empty()) finish_row();
  return rows;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

// ---- CSV --------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  return parse_records(text, nullptr);
}

Dataset parse_dataset(const std::string& text, const std::string& target, bool header) {
  std::vector<long> line_of;
  const auto records = parse_records(text, &line_of);
  if (records.empty()) throw ParseError("csv: no rows", 0);
  const std::size_t width = records.front().size();

  std::vector<std::string> names;
  std::size_t first = 0;
  if (header) {
    for (const auto& h : records.front()) names.push_back(trim(h));
    first = 1;
  } else {
    for (std::size_t c = 0; c < width; ++c) names.push_back("x" + std::to_string(c));
  }

  std::size_t tcol = width - 1;
  if (!target.empty()) {
    const auto it = std::find(names.begin(), names.end(), target);
    if (it != names.end()) {
      tcol = static_cast<std::size_t>(it - names.begin());
    } else {
      long idx = 0;
      const auto res = std::from_chars(target.data(), target.data() + target.size(), idx);
      if (res.ec != std::errc() || res.ptr != target.data() + target.size()) {
        throw MissingTarget("csv: no column named '" + target + "'");
      }
      if (idx < 0) idx += static_cast<long>(width);
      if (idx < 0 || idx >= static_cast<long>(width)) {
        throw MissingTarget("csv: target column " + target + " out of range for " +
                            std::to_string(width) + " columns");
      }
      tcol = static_cast<std::size_t>(idx);
    }
  }
  if (width < 2) throw ParseError("csv: need at least one feature and a target column", 1);

  const std::size_t n = records.size() - first;
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width - 1));
  out.y.resize(static_cast<Eigen::Index>(n));
  out.target_name = names[tcol];
  for (std::size_t c = 0; c < width; ++c) {
    if (c != tcol) out.feature_names.push_back(names[c]);
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[first + r];
    const long line = line_of[first + r];
    if (rec.size() != width) {
      throw ParseError("csv: line " + std::to_string(line) + " has " + std::to_string(rec.size()) +
                           " fields, expected " + std::to_string(width),
                       line);
    }
    Eigen::Index k = 0;
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      if (!parse_double(rec[c], v) || !std::isfinite(v)) {
        throw ParseError("csv: line " + std::to_string(line) + ", column '" + names[c] +
                             "': not a number: '" + rec[c] + "'",
                         line);
      }
      if (c == tcol) {
        out.y(static_cast<Eigen::Index>(r)) = v;
      } else {
        out.x(static_cast<Eigen::Index>(r), k++) = v;
      }
    }
  }
  return out;
}

Dataset load_csv(const std::string& path, const std::string& target, bool header) {
  return parse_dataset(read_file(path), target, header);
}

// ---- standardization and splits ----------------------------------------------

Standardization fit_standardization(const Tensor& x, const Vector& y,
                                    const std::vector<std::string>& names) {
  if (x.rows() == 0) throw DegenerateData("standardization: no rows");
  const auto n = static_cast<double>(x.rows());
  Standardization st;
  st.x_mean = x.colwise().mean().transpose();
  st.x_scale.resize(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double sd = std::sqrt((x.col(c).array() - st.x_mean(c)).square().sum() / n);
    if (sd > 1e-12 * std::max(1.0, std::abs(st.x_mean(c)))) {
      st.x_scale(c) = sd;
    } else {
      st.x_scale(c) = 1.0;
      const std::string name =
          static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)] : std::to_string(c);
      st.warnings.push_back("feature '" + name + "' is constant; scale set to 1");
    }
  }
  st.y_mean = y.mean();
  const double ysd = std::sqrt((y.array() - st.y_mean).square().sum() / n);
  if (ysd > 1e-12 * std::max(1.0, std::abs(st.y_mean))) {
    st.y_scale = ysd;
  } else {
    st.y_scale = 1.0;
    st.warnings.push_back("target is constant; scale set to 1");
  }
  return st;
}

Split split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidFraction("split: test fraction must lie in (0, 1)");
  }
  const int n = data.rows();
  const int n_test = static_cast<int>(std::lround(n * test_fraction));
  if (n_test < 1 || n_test >= n) {
    throw InvalidFraction("split: fraction " + std::to_string(test_fraction) + " of " +
                          std::to_string(n) + " rows leaves an empty side");
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(seed, Stream::Split);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> test(order.begin(), order.begin() + n_test);
  std::vector<int> train(order.begin() + n_test, order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  Split out;
  out.train = select_rows(data, train);
  out.test = select_rows(data, test);
  out.standardization = fit_standardization(out.train.x, out.train.y, data.feature_names);
  return out;
}

// ---- model persistence --------------------------------------------------------

std::string model_to_json(const DgpModel& model) {
  const Standardization& st = model.standardization;
  json payload;
  payload["architecture"] = {{"input_dim", model.arch.input_dim},
                             {"hidden_layers", model.arch.hidden_layers},
                             {"hidden_width", model.arch.hidden_width},
                             {"ard", model.arch.ard},
                             {"linear_mean", model.arch.linear_mean}};
  payload["subset_size"] = model.subset_size();
  payload["num_train"] = model.num_train;
  payload["subset"] = model.subset.s;
  payload["parameters"] = encode_vector(parameter_vector(model));
  payload["x_s"] = encode_tensor(model.x_s);
  payload["y_s"] = encode_vector(model.y_s);
  payload["standardization"] = {{"x_mean", encode_vector(st.x_mean)},
                                {"x_scale", encode_vector(st.x_scale)},
                                {"y", encode_vector(Eigen::Vector2d(st.y_mean, st.y_scale))},
                                {"warnings", st.warnings}};
  payload["jitter"] = {{"try_zero", model.jitter.try_zero},
                       {"ladder", encode(model.jitter.ladder.data(), model.jitter.ladder.size())}};
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["checksum"] = checksum(payload.dump());
  doc["payload"] = payload;
  return doc.dump(1);
}

DgpModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file: ") + e.what(), 0);
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw ParseError("model file: unknown format", 0);
    const int version = doc.at("version").get<int>();
    if (version != kVersion) {
      throw VersionMismatch("model file: version " + std::to_string(version) + ", expected " +
                            std::to_string(kVersion));
    }
    const json& payload = doc.at("payload");
    if (checksum(payload.dump()) != doc.at("checksum").get<std::string>()) {
      throw ChecksumMismatch("model file: checksum mismatch");
    }
    const json& a = payload.at("architecture");
    Architecture arch;
    arch.input_dim = a.at("input_dim").get<int>();
    arch.hidden_layers = a.at("hidden_layers").get<int>();
    arch.hidden_width = a.at("hidden_width").get<int>();
    arch.ard = a.at("ard").get<bool>();
    arch.linear_mean = a.at("linear_mean").get<bool>();
    DgpModel model = init_model(arch, payload.at("subset_size").get<int>(), 0);
    set_parameter_vector(model, decode_vector(payload.at("parameters")));
    model.num_train = payload.at("num_train").get<int>();
    model.subset = SubsetIndex::from_selected(payload.at("subset").get<std::vector<int>>(), model.num_train);
    model.x_s = decode_tensor(payload.at("x_s"));
    model.y_s = decode_vector(payload.at("y_s"));
    const json& s = payload.at("standardization");
    model.standardization.x_mean = decode_vector(s.at("x_mean"));
    model.standardization.x_scale = decode_vector(s.at("x_scale"));
    const Vector y = decode_vector(s.at("y"));
    if (y.size() != 2) throw ParseError("model file: bad target standardization", 0);
    model.standardization.y_mean = y(0);
    model.standardization.y_scale = y(1);
    model.standardization.warnings = s.at("warnings").get<std::vector<std::string>>();
    model.jitter.try_zero = payload.at("jitter").at("try_zero").get<bool>();
    const auto ladder = decode(payload.at("jitter").at("ladder").get<std::string>());
    model.jitter.ladder.assign(ladder.begin(), ladder.end());
    if (model.x_s.rows() != model.subset_size() || model.y_s.size() != model.subset_size()) {
      throw ParseError("model file: subset arrays do not match the subset size", 0);
    }
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what(), 0);
  }
}

void save_model(const DgpModel& model, const std::string& path) {
  write_file(path, model_to_json(model));
}

DgpModel load_model(const std::string& path) { return model_from_json(read_file(path)); }

void write_history(const TrainHistory& history, const std::string& path, bool include_wall_time) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "iteration,elbo_total,loglik_sbar,loglik_s,kl_first_layer,kl_intermediate,kl_last_layer";
  if (include_wall_time) out << ",wall_ms";
  out << '\n';
  for (const HistoryRow& r : history.rows) {
    out << r.iteration << ',' << r.elbo.total << ',' << r.elbo.loglik_sbar << ','
        << r.elbo.loglik_s << ',' << r.elbo.kl_first_layer << ',' << r.elbo.kl_intermediate << ','
        << r.elbo.kl_last_layer;
    if (include_wall_time) out << ',' << std::setprecision(6) << r.wall_ms << std::setprecision(17);
    out << '\n';
  }
  write_file(path, out.str());
}

}  // namespace sodgp
