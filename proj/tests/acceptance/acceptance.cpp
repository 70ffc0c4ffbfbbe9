// Acceptance checks. One PASS/FAIL line per criterion; tolerances are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "sodgp/cli.hpp"
#include "sodgp/dataio.hpp"
#include "sodgp/elbo.hpp"
#include "sodgp/predict.hpp"

using namespace sodgp;
using namespace sodgp::testing;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string data_dir = SODGP_DATA_DIR;
  std::string work_dir = "acceptance_work";
};

struct Outcome {
  bool pass = false;
  bool blocked = false;  // failed only because an input file is absent
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

std::string fixed(double v, int decimals = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << v;
  return s.str();
}

double cond_number(const Dense& k) {
  const Eigen::SelfAdjointEigenSolver<Dense> eig(k);
  return eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
}

// ---- 1 -----------------------------------------------------------------------

Outcome exact_marginal(const Options&) {
  const auto t0 = Clock::now();
  constexpr double kTol = 1e-8;
  constexpr double kBudget = 1.0;
  std::mt19937_64 rng(101);
  double worst = 0.0;
  double worst_cond = 0.0;
  int n_max = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 12 + 2 * trial;
    const double variance = 0.5 + 0.1 * trial;
    const double lengthscale = 0.4 + 0.02 * trial;
    const double noise = 0.05 + 0.01 * trial;
    const Synthetic d = gp_draw(n, 3, variance, lengthscale, noise, rng);
    const Dense k = se_loop(variance, Vector::Constant(1, lengthscale), d.x, d.x);
    worst_cond = std::max(worst_cond, cond_number(k));
    const DgpModel model = prior_model(d.x, d.y, variance, lengthscale, noise);
    const double bound = single_layer_elbo(model, d.x, d.y, model.subset).total;
    worst = std::max(worst, std::abs(bound - gp_log_evidence(k, noise, d.y)));
    n_max = std::max(n_max, n);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst < kTol && secs < kBudget && n_max <= 60;
  o.detail = "max |bound - log evidence| = " + fmt(worst) + " (< " + fmt(kTol) + ") over 20 instances, N <= " +
             std::to_string(n_max) + ", max cond(K) " + fmt(worst_cond, 2) + ", " + fixed(secs) + " s (< 1 s)";
  return o;
}

// ---- 2 -----------------------------------------------------------------------

Outcome lower_bound(const Options&) {
  const auto t0 = Clock::now();
  constexpr double kSlack = 1e-8;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  double tightest = -1e300;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 15;
    const Synthetic d = gp_draw(n, 2, 1.0, 0.8, 0.1, rng);
    const int m = 1 + trial % n;
    const SubsetIndex subset = random_subset(n, m, static_cast<std::uint64_t>(trial));
    Architecture arch;
    arch.input_dim = 2;
    DgpModel model = init_model(arch, m, static_cast<std::uint64_t>(trial));
    LayerState& layer = model.layers[0];
    layer.kernel = SqExpParams::from_constrained(0.3 + 2.0 * u(rng), 0.3 + 2.0 * u(rng));
    layer.log_noise_var = std::log(0.01 + u(rng));
    layer.set_variational(0, random_vector(m, rng), random_lower(m, rng, 0.05));
    attach_subset(model, d.x, d.y, subset);
    const double exact = gp_log_evidence(Dense(gram(layer.kernel, d.x)), layer.noise_var(), d.y);
    const double gap = single_layer_elbo(model, d.x, d.y, subset).total - exact;
    tightest = std::max(tightest, gap);
    if (gap > kSlack) ++violations;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = violations == 0 && secs < 5.0;
  o.detail = std::to_string(violations) + "/100 settings above evidence + 1e-8, max(bound - evidence) = " +
             fmt(tightest) + ", " + fixed(secs) + " s (< 5 s)";
  return o;
}

// ---- 3 -----------------------------------------------------------------------

Outcome predictive_oracle(const Options&) {
  const auto t0 = Clock::now();
  constexpr double kTol = 1e-6;
  std::mt19937_64 rng(303);
  const double variance = 1.3;
  const double lengthscale = 0.9;
  const double noise = 0.1;
  const Synthetic d = gp_draw(40, 2, variance, lengthscale, noise, rng);
  const DgpModel model = prior_model(d.x, d.y, variance, lengthscale, noise);
  const Tensor x_star = random_matrix(50, 2, rng);
  const auto mixes = predict(model, x_star, 1, 0);
  const Vector ls = Vector::Constant(1, lengthscale);
  const GpPredictive exact = gp_predictive(se_loop(variance, ls, d.x, d.x), se_loop(variance, ls, x_star, d.x),
                                           Vector::Constant(50, variance), noise, d.y);
  double dm = 0.0;
  double dv = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Component& c = mixes[static_cast<std::size_t>(i)].components.front();
    dm = std::max(dm, std::abs(c.mean - exact.mean(i)));
    dv = std::max(dv, std::abs(c.var - exact.var(i)));
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = dm < kTol && dv < kTol && secs < 1.0;
  o.detail = "50 test points: max |mean error| = " + fmt(dm) + ", max |variance error| = " + fmt(dv) +
             " (< 1e-6), " + fixed(secs) + " s (< 1 s)";
  return o;
}

// ---- 4 -----------------------------------------------------------------------

ad::Var symmetric(ad::Var a) { return ad::scale(a + ad::transpose(a), 0.5); }

Outcome gradient_suite(const Options&) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);

  // (a) log det of the gram matrix in the kernel hyperparameters and inputs
  const Tensor xa = random_matrix(8, 3, rng);
  const Tensor ridge = 0.1 * Tensor::Identity(8, 8);
  auto logdet = [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
    const ad::Var k = gram(SqExpVars{v[0], v[1]}, tape.constant(xa)) + tape.constant(ridge);
    return ad::scale(ad::sum(ad::log(ad::diag(ad::cholesky(symmetric(k))))), 2.0);
  };
  const double err_a = ad::check_gradients(logdet, {Tensor::Constant(1, 1, 0.2), random_matrix(1, 3, rng, 0.2)})
                           .max_relative_error;

  // (b) KL of the variational distribution against the kernel prior
  Architecture arch;
  arch.input_dim = 2;
  DgpModel model = init_model(arch, 6, 4);
  const Tensor xs = random_matrix(6, 2, rng);
  model.layers[0].set_variational(0, random_vector(6, rng), random_lower(6, rng, 0.3));
  attach_subset(model, xs, random_vector(6, rng), all_indices(6));
  const std::vector<Tensor> leaves = model_tensors(model);
  auto kl = [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
    const LayerVars layer = bind_leaves(v, model)[0];
    const ad::Var k = gram(layer.kernel, tape.constant(xs)) + tape.constant(Tensor(1e-3 * Tensor::Identity(6, 6)));
    return layer_kl(layer, ad::cholesky(symmetric(k)));
  };
  const double err_b = ad::check_gradients(kl, leaves).max_relative_error;

  // (c) full two-layer bound with frozen noise draws
  const DeepProblem p = small_deep_problem(405);
  auto deep = [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
    return deep_elbo(tape, bind_leaves(v, p.model), p.model, p.x_batch, p.y_batch, p.sbar_size, p.eps).total;
  };
  const double err_c = ad::check_gradients(deep, model_tensors(p.model)).max_relative_error;

  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = err_a < 1e-5 && err_b < 1e-6 && err_c < 1e-3 && secs < 30.0;
  o.detail = "max relative error (a) gram logdet " + fmt(err_a) + " (< 1e-5), (b) KL " + fmt(err_b) +
             " (< 1e-6), (c) 2-layer bound N=20 M=5 " + fmt(err_c) + " (< 1e-3), " + fixed(secs) + " s (< 30 s)";
  return o;
}

// ---- 5 -----------------------------------------------------------------------

Outcome monte_carlo(const Options&) {
  const auto t0 = Clock::now();
  DeepProblem p = small_deep_problem(13, 1);
  const LayerState& hidden = p.model.layers[0];
  const int m = p.model.subset_size();
  const int width = hidden.width();
  const int n = 100000;
  std::vector<Vector> sums(static_cast<std::size_t>(width), Vector::Zero(m));
  std::vector<Dense> outers(static_cast<std::size_t>(width), Dense::Zero(m, m));
  Rng rng(14);
  for (int i = 0; i < n; ++i) {
    const EpsBundle e = draw_eps(p.model.arch, m, 1, 1, rng);
    ad::Tape t;
    const auto v = bind_parameters(t, p.model);
    const ad::Var xs = t.constant(p.model.x_s);
    const ad::Var xb = t.constant(p.x_batch.topRows(1));
    const LayerGeometry g = layer_geometry(v[0].kernel, xs, xb, p.model.jitter);
    const LayerSampleState s = propagate_layer({xs, xb, {}}, v[0], g, e.samples[0][0]);
    for (int d = 0; d < width; ++d) {
      const Vector z = s.z_s.value().col(d);
      const Vector c = z - hidden.variational(d).mean;
      sums[static_cast<std::size_t>(d)] += z;
      outers[static_cast<std::size_t>(d)] += c * c.transpose();
    }
  }
  int checked = 0;
  int outside = 0;
  double worst_z = 0.0;
  for (int d = 0; d < width; ++d) {
    const MvnNatural q = hidden.variational(d);
    const Tensor cov = q.covariance() + hidden.noise_var() * Tensor::Identity(m, m);
    const Vector mean = sums[static_cast<std::size_t>(d)] / n;
    const Dense emp = outers[static_cast<std::size_t>(d)] / n;
    for (int i = 0; i < m; ++i) {
      const double zm = std::abs(mean(i) - q.mean(i)) / std::sqrt(cov(i, i) / n);
      worst_z = std::max(worst_z, zm);
      ++checked;
      if (zm > 3.0) ++outside;
      for (int j = 0; j < m; ++j) {
        const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n);
        const double zc = std::abs(emp(i, j) - cov(i, j)) / se;
        worst_z = std::max(worst_z, zc);
        ++checked;
        if (zc > 3.0) ++outside;
      }
    }
  }

  DeepProblem v = small_deep_problem(15, 1);
  separate_hidden_means(v);
  std::vector<double> variances;
  for (int t : {1, 10, 100}) {
    Rng r(100 + static_cast<std::uint64_t>(t));
    std::vector<double> values;
    for (int rep = 0; rep < 200; ++rep) {
      const EpsBundle e = draw_eps(v.model.arch, 5, v.sbar_size, t, r);
      values.push_back(deep_elbo(v.model, v.x_batch, v.y_batch, v.sbar_size, e).total);
    }
    variances.push_back(sample_var(values));
  }
  const double r1 = variances[0] / variances[1];
  const double r2 = variances[1] / variances[2];
  const bool ratios_ok = r1 >= 5.0 && r1 <= 20.0 && r2 >= 5.0 && r2 <= 20.0;

  Outcome o;
  o.pass = outside == 0 && ratios_ok;
  o.detail = "moments at 1e5 samples: " + std::to_string(outside) + "/" + std::to_string(checked) +
             " entries beyond 3 SE (max " + fixed(worst_z, 2) + " SE); variance ratios T=1/10 " + fixed(r1, 2) +
             ", T=10/100 " + fixed(r2, 2) + " (within 10x by a factor of 2), " + fixed(seconds_since(t0), 1) + " s";
  return o;
}

// ---- 6 -----------------------------------------------------------------------

Outcome parameter_count_inequality(const Options&) {
  struct Bench {
    const char* name;
    int h;
    int n;
  };
  const Bench benches[] = {{"boston", 13, 506},   {"energy", 8, 768},  {"protein", 9, 45730},
                           {"naval", 16, 11934},  {"year", 90, 515345}};
  int archs = 0;
  int bad = 0;
  for (const Bench& b : benches) {
    const int m = default_subset_size(static_cast<int>(std::lround(0.9 * b.n)));
    for (int hidden = 0; hidden <= 3; ++hidden) {
      Architecture a;
      a.input_dim = b.h;
      a.hidden_layers = hidden;
      std::size_t extra = 0;
      for (int l = 0; l < a.num_layers(); ++l) extra += static_cast<std::size_t>(m * a.input_width(l));
      const std::size_t ours = parameter_count(a, m);
      const bool ok = ours < ours + extra && inducing_input_parameter_count(a, m) == ours + extra &&
                      static_cast<std::size_t>(parameter_vector(init_model(a, m, 0)).size()) == ours;
      ++archs;
      if (!ok) ++bad;
    }
  }
  Outcome o;
  o.pass = bad == 0;
  o.detail = std::to_string(archs - bad) + "/" + std::to_string(archs) +
             " architectures (5 datasets x GP, DGP1-3) have count < count + sum_l M*D_(l-1), with no inducing inputs";
  return o;
}

// ---- 7 -----------------------------------------------------------------------

double seconds_per_iteration(const Tensor& x, const Vector& y, int m, int b, int iterations) {
  Architecture a;
  a.input_dim = static_cast<int>(x.cols());
  a.hidden_layers = 1;
  DgpModel model = init_model(a, m, 1);
  attach_subset(model, x, y, random_subset(static_cast<int>(x.rows()), m, 1));
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.batch_size = b;
  cfg.t_train = 1;
  cfg.log_every = cfg.iterations;
  const auto t0 = Clock::now();
  train(model, x, y, cfg);
  return seconds_since(t0) / cfg.iterations;
}

Outcome complexity_scaling(const Options&) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(707);
  const int n = 4200;
  const Tensor x = random_matrix(n, 5, rng);
  const Vector y = x.rowwise().sum().array().sin().matrix();
  const std::vector<double> ms{25, 50, 100};
  const std::vector<double> bs{250, 500, 1000};
  std::vector<double> tm(ms.size(), 1e300);
  std::vector<double> tb(bs.size(), 1e300);
  // sizes interleaved within each round so host drift hits all of them; best of 9
  for (int round = 0; round < 9; ++round) {
    for (std::size_t i = 0; i < ms.size(); ++i) {
      tm[i] = std::min(tm[i], seconds_per_iteration(x, y, static_cast<int>(ms[i]), 4000, 15));
    }
    for (std::size_t i = 0; i < bs.size(); ++i) {
      tb[i] = std::min(tb[i], seconds_per_iteration(x, y, 25, static_cast<int>(bs[i]), 150));
    }
  }
  const double slope_m = loglog_slope(ms, tm);
  const double slope_b = loglog_slope(bs, tb);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = std::abs(slope_m - 2.0) <= 0.6 && std::abs(slope_b - 1.0) <= 0.3 && secs < 120.0;
  std::string ms_list;
  for (std::size_t i = 0; i < tm.size(); ++i) ms_list += (i ? "/" : "") + fixed(1e3 * tm[i], 1);
  std::string bs_list;
  for (std::size_t i = 0; i < tb.size(); ++i) bs_list += (i ? "/" : "") + fixed(1e3 * tb[i], 2);
  o.detail = "N=" + std::to_string(n) + ": slope in M " + fixed(slope_m, 2) + " (2 +- 0.6; " + ms_list +
             " ms at B=4000), slope in B " + fixed(slope_b, 2) + " (1 +- 0.3; " + bs_list + " ms at M=25), " +
             fixed(secs, 1) + " s (< 120 s)";
  return o;
}

// ---- 8 -----------------------------------------------------------------------

struct BenchSummary {
  std::vector<double> nlpp;
  int failed = 0;
};

std::map<std::string, BenchSummary> read_results(const fs::path& path) {
  std::map<std::string, BenchSummary> out;
  const auto rows = parse_csv(read_file(path.string()));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    BenchSummary& s = out[r[0] + "/dgp" + r[1]];
    if (r.back() == "ok") {
      s.nlpp.push_back(std::stod(r[3]));
    } else {
      ++s.failed;
    }
  }
  return out;
}

Outcome table_reproduction(const Options& opt) {
  const auto t0 = Clock::now();
  const std::string boston = (fs::path(opt.data_dir) / "boston.csv").string();
  const std::string energy = (fs::path(opt.data_dir) / "energy.csv").string();
  const bool have_energy = fs::exists(energy);
  const fs::path out = fs::path(opt.work_dir) / "table";
  std::vector<std::string> args{"sodgp", "benchmark", "--datasets", "boston=" + boston};
  if (have_energy) args.push_back("energy=" + energy);
  for (const char* a : {"--depths", "2", "--repeats", "5", "--subset-size", "50", "--iters", "20000", "--out"}) {
    args.emplace_back(a);
  }
  args.push_back(out.string());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream log;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), log, std::cerr);

  Outcome o;
  if (code != 0 || !fs::exists(out / "results.csv")) {
    o.detail = "benchmark exited with " + std::to_string(code);
    return o;
  }
  const auto results = read_results(out / "results.csv");
  auto judge = [&](const std::string& key, double lo, double hi, std::string& text) {
    const auto it = results.find(key);
    if (it == results.end() || it->second.nlpp.size() != 5) {
      text += key + " incomplete";
      return false;
    }
    const auto& v = it->second.nlpp;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    const bool ok = mean >= lo && mean <= hi;
    text += key + " NLPP " + format_mean_std(v) + " in [" + fixed(lo, 2) + ", " + fixed(hi, 2) + "]: " +
            (ok ? "yes" : "no");
    return ok;
  };
  std::string text;
  const bool boston_ok = judge("boston/dgp2", 2.15, 2.70, text);
  bool energy_ok = false;
  if (have_energy) {
    text += "; ";
    energy_ok = judge("energy/dgp2", 0.5, 1.1, text);
  } else {
    text += "; energy: " + energy + " not present";
  }
  o.pass = boston_ok && energy_ok;
  o.blocked = boston_ok && !have_energy;
  o.detail = text + ", 5 repeats x 20000 iterations, M=50, " + fixed(seconds_since(t0) / 60.0, 1) + " min";
  return o;
}

// ---- 9 -----------------------------------------------------------------------

struct Progress {
  double initial = 0.0;
  double smoothed = 0.0;
  bool finite = true;
};

Progress training_progress(const Dataset& data, int hidden_layers, std::uint64_t seed) {
  RunConfig cfg;
  cfg.hidden_layers = hidden_layers;
  cfg.train.iterations = 2001;
  cfg.train.log_every = 1;
  Progress p;
  cfg.train.on_log = [&](int, const Vector& theta) { p.finite = p.finite && theta.allFinite(); };
  const RunResult r = train_run(cfg, data, seed);
  p.initial = r.history.rows.front().elbo.total;
  double sum = 0.0;
  int count = 0;
  for (const HistoryRow& row : r.history.rows) {
    p.finite = p.finite && std::isfinite(row.elbo.total);
    if (row.iteration > 1900 && row.iteration <= 2000) {
      sum += row.elbo.total;
      ++count;
    }
  }
  p.smoothed = sum / count;
  return p;
}

Dataset synthetic_dataset(int kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  const int n = 300;
  if (kind == 0) {
    const Synthetic s = gp_draw(n, 3, 1.0, 0.7, 0.05, rng);
    d.x = s.x;
    d.y = s.y;
  } else {
    d.x = random_matrix(n, kind == 1 ? 2 : 1, rng);
    d.y.resize(n);
    std::normal_distribution<double> noise(0.0, 0.1);
    for (int i = 0; i < n; ++i) {
      d.y(i) = kind == 1 ? std::tanh(3.0 * d.x(i, 0)) * d.x(i, 1) + noise(rng)
                         : std::sin(3.0 * std::sin(2.0 * d.x(i, 0))) + noise(rng);
    }
  }
  for (int c = 0; c < d.x.cols(); ++c) d.feature_names.push_back("x" + std::to_string(c));
  d.target_name = "y";
  return d;
}

Outcome training_progress_check(const Options& opt) {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, Dataset>> suites;
  suites.emplace_back("boston", load_csv((fs::path(opt.data_dir) / "boston.csv").string()));
  suites.emplace_back("gp-draw", synthetic_dataset(0, 1));
  suites.emplace_back("tanh-product", synthetic_dataset(1, 2));
  suites.emplace_back("nested-sine", synthetic_dataset(2, 3));
  Outcome o;
  o.pass = true;
  std::string text;
  for (const auto& [name, data] : suites) {
    const Progress p = training_progress(data, 2, 0);
    const bool ok = p.finite && p.smoothed > p.initial;
    o.pass = o.pass && ok;
    text += (text.empty() ? "" : "; ") + name + " " + fixed(p.initial, 1) + " -> " + fixed(p.smoothed, 1) +
            (p.finite ? "" : " (non-finite)");
  }
  o.detail = "DGP2 ELBO at it 0 -> mean over its 1901-2000: " + text + "; parameters finite at every step, " +
             fixed(seconds_since(t0), 0) + " s";
  return o;
}

// ---- 10 ----------------------------------------------------------------------

struct RunFiles {
  std::string history;
  std::string metrics;
  std::string model;
};

RunFiles deterministic_run(const Dataset& data, const fs::path& dir) {
  RunConfig cfg;
  cfg.hidden_layers = 2;
  cfg.train.iterations = 300;
  cfg.train.log_every = 10;
  cfg.train.seed = 42;
  const RunResult r = train_run(cfg, data, cfg.train.seed);
  const Metrics m = evaluate(r.model, r.split.test.x, r.split.test.y, cfg.t_predict, cfg.train.seed);
  fs::create_directories(dir);
  write_history(r.history, (dir / "history.csv").string(), false);
  std::ostringstream metrics;
  metrics << std::setprecision(17) << "nlpp,rmse\n" << m.nlpp << ',' << m.rmse << '\n';
  write_file((dir / "metrics.csv").string(), metrics.str());
  save_model(r.model, (dir / "model.json").string());
  return {read_file((dir / "history.csv").string()), read_file((dir / "metrics.csv").string()),
          read_file((dir / "model.json").string())};
}

Outcome determinism(const Options& opt) {
  const auto t0 = Clock::now();
  const Dataset data = load_csv((fs::path(opt.data_dir) / "boston.csv").string());
  const fs::path root = fs::path(opt.work_dir) / "determinism";
  fs::remove_all(root);
  const RunFiles a = deterministic_run(data, root / "first");
  const RunFiles b = deterministic_run(data, root / "second");
  Outcome o;
  o.pass = a.history == b.history && a.metrics == b.metrics && a.model == b.model;
  o.detail = std::string("Boston DGP2, 300 iterations, seed 42, run twice: history ") +
             (a.history == b.history ? "identical" : "differs") + ", metrics " +
             (a.metrics == b.metrics ? "identical" : "differs") + ", model file " +
             (a.model == b.model ? "identical" : "differs") + " (" + std::to_string(a.history.size()) + " + " +
             std::to_string(a.model.size()) + " bytes), " + fixed(seconds_since(t0), 1) + " s";
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome(const Options&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "exact-marginal oracle", exact_marginal},
      {2, "lower-bound property", lower_bound},
      {3, "predictive oracle", predictive_oracle},
      {4, "gradient suite", gradient_suite},
      {5, "Monte Carlo moments and 1/T variance", monte_carlo},
      {6, "parameter-count inequality", parameter_count_inequality},
      {7, "complexity scaling", complexity_scaling},
      {8, "benchmark table (Boston, Energy)", table_reproduction},
      {9, "training progress", training_progress_check},
      {10, "determinism", determinism},
  };

  CLI::App app{"Acceptance checks", "sodgp_acceptance"};
  Options opt;
  std::vector<int> selected;
  app.add_option("-c,--criterion", selected, "Criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--data-dir", opt.data_dir, "Directory with boston.csv and optionally energy.csv")->capture_default_str();
  app.add_option("--work-dir", opt.work_dir, "Scratch directory for runs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  bool any_failure = false;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Outcome o;
    try {
      o = c.run(opt);
    } catch (const std::exception& e) {
      o.detail = std::string("error: ") + e.what();
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.title << ": " << o.detail
              << (o.blocked ? " [blocked on missing data]" : "") << std::endl;
    if (!o.pass && !o.blocked) any_failure = true;
  }
  return any_failure ? 1 : 0;
}
