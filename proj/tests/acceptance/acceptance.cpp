// Acceptance run: ten criteria, one PASS/FAIL line each. Exit status is the
// number of failed criteria (0 when everything passes).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "dkhac/dkhac.hpp"

using namespace dkhac;
namespace fs = std::filesystem;

namespace {

constexpr long kReplications = 5000;

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

const FixedBCriticalValues& fixed_b() {
  static const auto cv = load_or_generate_fixed_b(std::string(DKHAC_DATA_DIR) + "/fixedb_bartlett_b1.json",
                                                  kFixedBGrid, kFixedBReplications, kFixedBSeed, workers());
  return cv;
}

SimulationReport run(Model m, long T, Design d, std::vector<double> deltas, std::vector<Estimator> est,
                     std::uint64_t seed, long R = kReplications) {
  ExperimentConfig cfg;
  cfg.model = m;
  cfg.T = T;
  cfg.design = d;
  cfg.deltas = std::move(deltas);
  cfg.estimators = std::move(est);
  cfg.replications = R;
  cfg.base_seed = seed;
  cfg.workers = workers();
  return run_experiment(cfg, fixed_b());
}

std::string g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

struct Check {
  std::ostringstream detail;
  bool ok = true;

  void within(const std::string& what, double value, double target, double tol) {
    const bool pass = std::abs(value - target) <= tol;
    ok = ok && pass;
    detail << what << "=" << format_number(value, 4) << " (" << g(target) << "+-" << g(tol) << (pass ? "" : " MISS") << ") ";
  }
  void at_least(const std::string& what, double value, double bound) {
    const bool pass = value >= bound;
    ok = ok && pass;
    detail << what << "=" << format_number(value, 4) << " (>=" << g(bound) << (pass ? "" : " MISS")
           << ") ";
  }
  void at_most(const std::string& what, double value, double bound) {
    const bool pass = value <= bound;
    ok = ok && pass;
    detail << what << "=" << format_number(value, 4) << " (<=" << g(bound) << (pass ? "" : " MISS")
           << ") ";
  }
  void less(const std::string& what, double lhs, double rhs) {
    const bool pass = lhs < rhs;
    ok = ok && pass;
    detail << what << ": " << format_number(lhs, 4) << " < " << format_number(rhs, 4) << (pass ? "" : " MISS")
           << " ";
  }
  void flag(const std::string& what, bool pass) {
    ok = ok && pass;
    detail << what << (pass ? " ok " : " MISS ");
  }
};

int failures = 0;

void report(int id, const std::string& title, const std::function<void(Check&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail << "error: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!c.ok) ++failures;
  std::cout << (c.ok ? "PASS" : "FAIL") << " C" << id << " " << title << ": " << c.detail.str() << "["
            << format_number(secs, 1) << " s]" << std::endl;
}

double rate(const SimulationReport& r, double delta, Estimator e) { return r.cell(delta, e).rate(); }

dkhac::SeriesMatrix gaussian(long T, long p, std::uint64_t seed) {
  NormalStream z(seed);
  SeriesMatrix V(T, p);
  for (long t = 0; t < T; ++t)
    for (long c = 0; c < p; ++c) V(t, c) = z();
  return V;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DKHAC_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main() {
  std::cout << "acceptance: R=" << kReplications << ", workers=" << workers() << std::endl;
  fixed_b();

  report(1, "size, stationary (M1/M2, T=200)", [](Check& c) {
    const auto m1 = run(Model::M1, 200, Design::Null, {0.0}, {Estimator::DkHac, Estimator::Kvb}, 101);
    c.within("M1 dk-hac", rate(m1, 0.0, Estimator::DkHac), 0.086, 0.02);
    c.within("M1 kvb", rate(m1, 0.0, Estimator::Kvb), 0.057, 0.015);
    const auto m2 = run(Model::M2, 200, Design::Null, {0.0}, {Estimator::DkHac}, 102);
    c.within("M2 dk-hac", rate(m2, 0.0, Estimator::DkHac), 0.054, 0.015);
  });

  report(2, "size, nonstationary (M3/M4, T=200)", [](Check& c) {
    const auto m3 = run(Model::M3, 200, Design::Null, {0.0}, {Estimator::DkHac, Estimator::Kvb}, 201);
    c.within("M3 dk-hac", rate(m3, 0.0, Estimator::DkHac), 0.063, 0.02);
    c.within("M3 kvb", rate(m3, 0.0, Estimator::Kvb), 0.003, 0.01);
    const auto m4 = run(Model::M4, 200, Design::Null, {0.0}, {Estimator::Kvb}, 202);
    c.at_most("M4 kvb", rate(m4, 0.0, Estimator::Kvb), 0.01);
  });

  report(3, "power non-monotonicity (M5, T=200)", [](Check& c) {
    const auto dk = run(Model::M5, 200, Design::Alternative, {1.6}, {Estimator::DkHac}, 301);
    const auto kvb = run(Model::M5, 200, Design::Alternative, {0.4, 1.6, 2.5}, {Estimator::Kvb}, 301);
    c.at_least("dk-hac(1.6)", rate(dk, 1.6, Estimator::DkHac), 0.90);
    c.at_most("kvb(1.6)", rate(kvb, 1.6, Estimator::Kvb), 0.25);
    c.less("kvb(2.5) vs kvb(0.4)+0.10", rate(kvb, 2.5, Estimator::Kvb), rate(kvb, 0.4, Estimator::Kvb) + 0.10);
  });

  report(4, "forecast-breakdown power (M8, T=800, delta=0.8)", [](Check& c) {
    const auto r = run(Model::M8, 800, Design::Alternative, {0.8},
                       {Estimator::DkHac, Estimator::Kvb, Estimator::Andrews}, 401);
    c.at_least("dk-hac", rate(r, 0.8, Estimator::DkHac), 0.95);
    c.at_most("kvb", rate(r, 0.8, Estimator::Kvb), 0.05);
    c.at_most("andrews", rate(r, 0.8, Estimator::Andrews), 0.05);
  });

  report(5, "DM power collapse (M7, T=400, delta=5)", [](Check& c) {
    const auto r = run(Model::M7, 400, Design::Alternative, {5.0}, {Estimator::DkHac, Estimator::Kvb}, 501);
    c.at_least("dk-hac", rate(r, 5.0, Estimator::DkHac), 0.90);
    c.at_most("kvb", rate(r, 5.0, Estimator::Kvb), 0.05);
  });

  report(6, "bandwidth constants", [](Check& c) {
    constexpr double pi = std::numbers::pi;
    const double k1q = 18.0 * pi * pi / 125.0;
    const double lag = std::pow(4.0 * k1q * k1q, -0.2);
    c.within("(9/100)^-1/5 (6/5)^1/5", std::pow(0.09, -0.2) * std::pow(1.2, 0.2), 1.6786, 5e-4);
    c.within("0.6584 (6/5)^1/5", 0.6584 * std::pow(1.2, 0.2), 0.6828, 5e-4);
    c.within("(4 K1q^2)^-1/5", lag, 0.6584, 5e-4);
    c.within("time constant (library)", time_bandwidth_constant(TimeKernel{}), 1.6786, 5e-4);
    c.within("lag constant (library)", lag_bandwidth_constant(LagKernel{}), 0.6584, 5e-4);
  });

  report(7, "uniform single-block reduction to kernel HAC", [](Check& c) {
    double worst = 0.0;
    const LagKernel kernels[] = {LagKernel{LagKernelFamily::QuadraticSpectral}, LagKernel{LagKernelFamily::Bartlett},
                                 LagKernel{LagKernelFamily::Parzen}};
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
      const long T = 40 + static_cast<long>(rng() % 400);
      const long p = 1 + static_cast<long>(rng() % 3);
      const double b1 = 0.01 + 0.3 * static_cast<double>(rng() % 1000) / 1000.0;
      const auto V = gaussian(T, p, rng());
      const auto& K1 = kernels[i % 3];
      const auto dk = dk_hac(V, K1, TimeKernel{TimeKernelFamily::Uniform}, BandwidthPlan::fixed(b1, 1.0, T, T), false, 0);
      const auto hac = kernel_hac(V, K1, b1, false, 0);
      worst = std::max(worst, (dk.J - hac.J).cwiseAbs().maxCoeff());
    }
    c.at_most("max |diff|", worst, 1e-10);
    c.detail << "(" << g(worst) << ") ";
    c.flag("50 series", true);
  });

  report(8, "population LRV recovery (AR(1) a=0.5, Var(u)=0.5, T=2000)", [](Check& c) {
    const long reps = 1000, T = 2000;
    std::vector<double> dk(reps), nw(reps), an(reps);
    parallel_for(static_cast<std::size_t>(reps), workers(), [&](std::size_t r) {
      NormalStream z(stream_seed(801, r));
      const double sd = std::sqrt(0.5);
      SeriesMatrix V(T, 1);
      double x = z() * sd / std::sqrt(0.75);
      for (long t = 0; t < T; ++t) V(t, 0) = x = 0.5 * x + sd * z();
      dk[r] = dk_hac_auto(V, LagKernel{}, TimeKernel{}, 0).J(0, 0);
      nw[r] = nw_hac(V, true, false).J(0, 0);
      an[r] = andrews_hac(V, false).J(0, 0);
    });
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    c.within("dk-hac-auto", mean(dk), 2.0, 0.2);
    c.within("newey-west", mean(nw), 2.0, 0.2);
    c.within("andrews", mean(an), 2.0, 0.2);
  });

  report(9, "PSD and symmetry (500 inputs x QS/Bartlett/Parzen)", [](Check& c) {
    const LagKernel kernels[] = {LagKernel{LagKernelFamily::QuadraticSpectral}, LagKernel{LagKernelFamily::Bartlett},
                                 LagKernel{LagKernelFamily::Parzen}};
    const TimeKernel K2{TimeKernelFamily::EpanechnikovOpt};
    std::mt19937_64 rng(9);
    long bad_sym = 0, bad_psd = 0, checked = 0;
    for (int i = 0; i < 500; ++i) {
      const long T = 40 + static_cast<long>(rng() % 460);
      const long p = 1 + static_cast<long>(rng() % 4);
      SeriesMatrix V = gaussian(T, p, rng());
      if (i % 3 == 1) {
        // Strong common persistence.
        for (long t = 1; t < T; ++t) V.row(t) += 0.95 * V.row(t - 1);
      } else if (i % 3 == 2) {
        // Variance break halfway through.
        V.bottomRows(T / 2) *= 5.0;
      }
      const double b1 = 0.005 + 0.5 * static_cast<double>(rng() % 1000) / 1000.0;
      const double b2 = 0.05 + 0.95 * static_cast<double>(rng() % 1000) / 1000.0;
      const long n_T = default_block_length(T);
      for (const auto& K1 : kernels) {
        std::vector<LrvEstimate> ests{dk_hac(V, K1, K2, BandwidthPlan::fixed(b1, std::max(b2, 8.0 / T), T, n_T), false, 0)};
        if (K1.family != LagKernelFamily::Bartlett) ests.push_back(dk_hac_auto(V, K1, K2, 0));
        for (const auto& e : ests) {
          ++checked;
          const double scale = std::max(e.J.cwiseAbs().maxCoeff(), 1e-300);
          if ((e.J - e.J.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) ++bad_sym;
          if (e.min_eigenvalue < -1e-10 * std::abs(e.J.trace())) ++bad_psd;
        }
      }
    }
    c.at_most("asymmetric", static_cast<double>(bad_sym), 0);
    c.at_most("not PSD", static_cast<double>(bad_psd), 0);
    c.detail << "estimates checked=" << checked << " ";
  });

  report(10, "determinism across worker counts", [](Check& c) {
    ExperimentConfig cfg;
    cfg.model = Model::M6;
    cfg.T = 200;
    cfg.design = Design::Alternative;
    cfg.deltas = {0.0, 0.4};
    cfg.replications = 200;
    cfg.base_seed = 1001;
    cfg.workers = 1;
    const auto a = run_experiment(cfg, fixed_b());
    cfg.workers = 4;
    const auto b = run_experiment(cfg, fixed_b());
    c.flag("library simulate", to_csv(a) == to_csv(b) && to_json(a).dump() == to_json(b).dump());

    const auto specs = table_specs();
    const auto& spec = find_table(specs, "Size Forecasting DM-GR");
    TableRunConfig tc;
    tc.replications = 100;
    tc.base_seed = 1002;
    tc.estimators = {Estimator::DkHac, Estimator::Kvb, Estimator::AndrewsPrewhite};
    tc.workers = 1;
    const auto t1 = run_table(spec, 3, tc, fixed_b());
    tc.workers = 3;
    const auto t3 = run_table(spec, 3, tc, fixed_b());
    c.flag("library tables", table_csv(t1) == table_csv(t3));

    const fs::path dir = fs::path(DKHAC_TEST_TMP) / "acceptance_determinism";
    fs::remove_all(dir);
    const std::string cache = std::string(DKHAC_DATA_DIR) + "/fixedb_bartlett_b1.json";
    const std::string sim = "simulate --model M3 --T 200 --R 150 --seed 5 --format both --cache " + cache;
    bool cli_ok = run_cli(sim + " --workers 1 --out-dir " + (dir / "s1").string()) == 0 &&
                  run_cli(sim + " --workers 4 --out-dir " + (dir / "s4").string()) == 0;
    const std::string stem = "M3_T200_null_R150_seed5";
    for (const char* ext : {".csv", ".json"})
      cli_ok = cli_ok && read_file(dir / "s1" / (stem + ext)) == read_file(dir / "s4" / (stem + ext));
    c.flag("cli simulate", cli_ok);

    const std::string tab = "tables --tables \"S1-S2\" --only-T 200 --R 100 --seed 6 --force --cache " + cache;
    bool tab_ok = run_cli(tab + " --workers 1 --out-dir " + (dir / "t1").string()) == 0 &&
                  run_cli(tab + " --workers 4 --out-dir " + (dir / "t4").string()) == 0;
    for (const char* f : {"table_S1-S2.csv", "table_S1-S2.json", "summary.json"})
      tab_ok = tab_ok && read_file(dir / "t1" / f) == read_file(dir / "t4" / f);
    c.flag("cli tables", tab_ok);
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
