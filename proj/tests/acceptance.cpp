// Acceptance checks. `acceptance` runs every criterion, `acceptance 3 6`
// runs a selection. One line per criterion:
//   criterion <n> PASS|FAIL <name>: <measurements> [<seconds> s]
// Exit status is nonzero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sirid/core.hpp"
#include "sirid/inference.hpp"
#include "sirid/ingest.hpp"
#include "sirid/normal.hpp"
#include "sirid/perturb.hpp"
#include "sirid/simulate.hpp"
#include "sirid/testing.hpp"

using namespace sirid;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  std::vector<std::string> notes;  // printed under the result line

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<void(Outcome&)> run;
};

const SirParams kTheta0(0.21, 0.07);
const InitialCondition kInit7 = InitialCondition::from_population(1e7);

int worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fixed(double x, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

double round_sig(double x, int digits) {
  const double scale = std::pow(10.0, digits - 1 - std::floor(std::log10(std::abs(x))));
  return std::round(x * scale) / scale;
}

double angle_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 2.0 * pi);
  return std::min(d, 2.0 * pi - d);
}

std::string config_label(const ReferenceConfig& c) {
  std::ostringstream s;
  s << '(' << c.beta << ',' << c.gamma << ',' << c.epsilon << ") N=1e" << std::lround(std::log10(c.population));
  return s.str();
}

// 1
void peak_time_check(Outcome& out) {
  const double t_star = find_peak_time(kTheta0, kInit7);
  out.detail << "t* = " << fixed(t_star, 2) << " (120 +- 2)";
  out.require(std::abs(t_star - 120.0) <= 2.0, "t* outside [118, 122]");
}

// 2
void ridge_check(Outcome& out) {
  const int days = 120;
  const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Constant(days, std::sqrt(100.0 * 1e7)));
  EnsembleOptions options;
  options.threads = worker_threads();
  const MleEnsemble e = mle_ensemble(kTheta0, kInit7, noise, 1.0, days, 1000, 20240601, options);
  const EnsembleSummary s = summarize(e);
  out.detail << "slope = " << fixed(s.slope_beta_on_gamma, 4) << " [0.95, 1.05], R0 range "
             << fixed(s.r0_min, 2) << "-" << fixed(s.r0_max, 2) << " (min < 2.2, max > 4.0), "
             << s.used << "/1000 converged";
  out.require(s.slope_beta_on_gamma >= 0.95 && s.slope_beta_on_gamma <= 1.05, "slope");
  out.require(s.r0_min < 2.2, "R0 min");
  out.require(s.r0_max > 4.0, "R0 max");
}

// 3
void approximation_validity_check(Outcome& out) {
  const Eigen::VectorXd omegas = equally_spaced_angles(90);
  double worst_ratio = std::numeric_limits<double>::infinity();
  int ratio_failures = 0, angle_failures = 0, half_peak_failures = 0, s_bound_failures = 0;
  double max_rel_log_error = -std::numeric_limits<double>::infinity();
  int positive_rel_configs = 0;

  for (const ReferenceConfig& cfg : reference_grid()) {
    const SirParams base(cfg.beta, cfg.gamma);
    const auto init = InitialCondition::from_population(cfg.population);
    const double t_star = find_peak_time(base, init);
    const int last = static_cast<int>(std::floor(0.8 * t_star));
    const auto curves = separation_sweep(base, init, cfg.epsilon, omegas, last);

    const auto min_distance = [&](int t, bool s_only = false) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t k = 0; k < curves.size(); ++k) {
        const double d = s_only ? curves[k].s_distance(t) : curves[k].distance(t);
        if (d < best) best = d, arg = k;
      }
      return std::pair{best, curves[arg].omega};
    };

    double config_ratio = std::numeric_limits<double>::infinity();
    int config_day = 0;
    for (int t = 5; t <= last; ++t) {
      const double ratio = min_distance(t).first / lower_bound(base, init, cfg.epsilon, t);
      if (ratio < config_ratio) config_ratio = ratio, config_day = t;
      if (min_distance(t, true).first < lower_bound(base, init, cfg.epsilon, t)) ++s_bound_failures;
    }
    worst_ratio = std::min(worst_ratio, config_ratio);
    if (config_ratio < 0.75) ++ratio_failures;

    const int t_angle = static_cast<int>(std::lround(0.6 * t_star));
    const double arg = min_distance(t_angle).second;
    const double off = std::min(angle_distance(arg, pi / 4), angle_distance(arg, 5 * pi / 4));
    if (off > pi / 12) ++angle_failures;

    const int t_half = static_cast<int>(std::lround(0.5 * t_star));
    if (lower_bound(base, init, cfg.epsilon, t_half) > min_distance(t_half).first) ++half_peak_failures;

    double config_rel = -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd fit_angles = error_fit_angles();
    for (Eigen::Index k = 0; k < fit_angles.size(); ++k) {
      const auto ae = approximation_error(init, Perturbation(base, cfg.epsilon, fit_angles(k)), last);
      for (int t = 1; t <= last; ++t) {
        if (ae.present(t)) config_rel = std::max(config_rel, ae.relative_log_error(t));
      }
    }
    max_rel_log_error = std::max(max_rel_log_error, config_rel);
    if (config_rel >= 0) ++positive_rel_configs;

    out.notes.push_back(config_label(cfg) + ": min separation / lower_bound = " + fixed(config_ratio, 3) +
                        " (day " + std::to_string(config_day) + "), argmin angle at day " +
                        std::to_string(t_angle) + " = " + fixed(arg * 180 / pi, 1) +
                        " deg, max relative_log_error = " + fixed(config_rel, 3));
  }
  out.detail << "worst min-separation / lower_bound = " << fixed(worst_ratio, 3) << " (>= 0.75), "
             << ratio_failures << "/16 configs below; argmin angle off diagonal in " << angle_failures
             << "/16";
  out.notes.push_back("lower_bound above min separation at 0.5 t*: " + std::to_string(half_peak_failures) +
                      "/16 configs; s_distance below lower_bound on " + std::to_string(s_bound_failures) +
                      " config-days; relative_log_error >= 0 before 0.8 t* in " +
                      std::to_string(positive_rel_configs) + "/16 configs (max " +
                      fixed(max_rel_log_error, 3) + ")");
  out.require(ratio_failures == 0, "separation ratio");
  out.require(angle_failures == 0, "minimizing angle");
}

// 4
void error_fit_check(Outcome& out) {
  const ErrorFit a = error_fit(kTheta0, InitialCondition::from_population(1e6), 0.03);
  const ErrorFit b = error_fit(SirParams(0.21, 0.14), kInit7, 0.03);
  out.detail << "N=1e6: slope " << fixed(a.slope, 4) << ", intercept " << fixed(a.intercept, 2)
             << ", crossing " << fixed(a.crossing_time, 1) << " d, " << fixed(a.percent_of_peak, 1)
             << "% of peak; (.21,.14) N=1e7: " << fixed(b.percent_of_peak, 1) << "% of peak";
  out.require(std::abs(a.slope - 0.15) <= 0.02, "slope 0.15 +- 0.02");
  out.require(std::abs(a.intercept + 13.3) <= 1.0, "intercept -13.3 +- 1.0");
  out.require(std::abs(a.crossing_time - 89.0) <= 8.0, "crossing 89 +- 8");
  out.require(std::abs(a.percent_of_peak - 85.0) <= 5.0, "percent 85 +- 5");
  out.require(std::abs(b.percent_of_peak - 90.0) <= 5.0, "percent 90 +- 5");
}

// 5
void theoretical_bound_check(Outcome& out) {
  const Eigen::VectorXd omegas = equally_spaced_angles(90);
  long checked = 0, violations = 0;
  double tightest = 0.0;
  for (const ReferenceConfig& cfg : reference_grid()) {
    const SirParams base(cfg.beta, cfg.gamma);
    const auto init = InitialCondition::from_population(cfg.population);
    const int last = static_cast<int>(std::floor(0.8 * find_peak_time(base, init)));
    for (Eigen::Index k = 0; k < omegas.size(); ++k) {
      const Perturbation pert(base, cfg.epsilon, omegas(k));
      const auto ae = approximation_error(init, pert, last);
      for (int t = 0; t <= last; ++t, ++checked) {
        const double bound = theoretical_error_bound(init, pert, t);
        if (std::abs(ae.error(t)) > bound) ++violations;
        if (bound > 0) tightest = std::max(tightest, std::abs(ae.error(t)) / bound);
      }
    }
  }
  out.detail << violations << " violations in " << checked << " (config, omega, t) triples, max |E|/bound = "
             << fixed(tightest, 3);
  out.require(violations == 0, "bound violated");
}

// 6
void type2_agreement_check(Outcome& out) {
  const std::vector<double> omegas{0.0, pi / 4, pi};
  std::vector<double> eps_grid{0.001};
  for (int k = 1; k <= 12; ++k) eps_grid.push_back(0.005 * k);
  std::vector<double> sigma_grid;
  for (int k = 1; k <= 20; ++k) sigma_grid.push_back(0.05 * k);

  double worst1 = 0.0, worst2 = 0.0;
  std::string where1, where2;
  double eps_limit = 0.0, sigma_limit = 0.0;
  std::uint64_t seed = 6000;
  const auto visit = [&](double omega, double eps, double sigma) {
    const TestSpec spec(Perturbation(kTheta0, eps, omega), 0.05, 60, 1.0, NoiseModel::case2(sigma), kInit7);
    const PowerResult r = power(spec, 1000, ++seed, worker_threads());
    const double emp = r.type2_empirical->rate;
    const std::string at = "omega=" + fixed(omega, 3) + " eps=" + fixed(eps, 3) + " sigma=" + fixed(sigma, 2);
    if (std::abs(r.type2_approx1 - emp) > worst1) worst1 = std::abs(r.type2_approx1 - emp), where1 = at;
    if (std::abs(r.type2_approx2 - emp) > worst2) worst2 = std::abs(r.type2_approx2 - emp), where2 = at;
    return emp;
  };
  for (double omega : omegas) {
    for (double eps : eps_grid) {
      const double emp = visit(omega, eps, 0.3);
      if (omega == pi / 4 && eps == eps_grid.front()) eps_limit = emp;
    }
    for (double sigma : sigma_grid) {
      const double emp = visit(omega, 0.03, sigma);
      if (omega == pi / 4 && sigma == sigma_grid.back()) sigma_limit = emp;
    }
  }
  out.detail << "max |approx1 - empirical| = " << fixed(worst1, 3) << " (<= 0.05), max |approx2 - empirical| = "
             << fixed(worst2, 3) << " (<= 0.07); limits " << fixed(eps_limit, 3) << " at eps=0.001, "
             << fixed(sigma_limit, 3) << " at sigma=1.0 (0.95 +- 0.03)";
  out.notes.push_back("approx1 worst at " + where1);
  out.notes.push_back("approx2 worst at " + where2);
  out.require(worst1 <= 0.05, "approx1 band");
  out.require(worst2 <= 0.07, "approx2 band");
  out.require(std::abs(eps_limit - 0.95) <= 0.03, "epsilon limit");
  out.require(std::abs(sigma_limit - 0.95) <= 0.03, "sigma limit");
}

// 7
void epsilon_inversion_check(Outcome& out) {
  const double fast = epsilon_for_power(0.5, 0.05, 0.2, 1.0, 60, 0.14);
  const double slow = epsilon_for_power(0.5, 0.05, 0.2, 1.0, 60, 0.07);
  out.detail << "delta=0.14: eps = " << fixed(fast, 4) << " (0.064 +- 0.001), delta=0.07: eps = " << fixed(slow, 4)
             << " (0.062 +- 0.001)";
  out.require(std::abs(fast - 0.064) <= 0.001, "delta 0.14");
  out.require(std::abs(slow - 0.062) <= 0.001, "delta 0.07");
}

// 8
void consequence_gap_check(Outcome& out) {
  const EpidemicSummary predicted = summarize_epidemic(kTheta0, kInit7);
  const EpidemicSummary actual =
      summarize_epidemic(Perturbation(kTheta0, 0.064, 5 * pi / 4).perturbed(), kInit7);
  const double attack_gap = actual.attack_fraction_at_peak_plus_10 - predicted.attack_fraction_at_peak_plus_10;
  const double duration_gap = static_cast<double>(actual.duration - predicted.duration) / predicted.duration;
  out.detail << "attack fraction " << fixed(actual.attack_fraction_at_peak_plus_10, 3) << " vs predicted "
             << fixed(predicted.attack_fraction_at_peak_plus_10, 3) << " (gap " << fixed(100 * attack_gap, 1)
             << " points > 5), duration " << actual.duration << " vs " << predicted.duration << " days (gap "
             << fixed(100 * duration_gap, 1) << "% > 20%)";
  out.require(attack_gap > 0.05, "attack fraction gap");
  out.require(duration_gap > 0.20, "duration gap");
}

// 9
void nyc_table_check(Outcome& out) {
  const auto path = std::filesystem::path(SIRID_DATA_DIR) / "nyc_cases.csv";
  const DateRange window{parse_date("2020-02-29"), parse_date("2020-03-14")};
  const double n = tune_population(load_cases(path, 8399000.0, window), 0.05, 4.82, 4e6, 8.399e6);
  const CaseData data = load_cases(path, n, window);
  const std::vector<double> grid{0.01, 0.02, 0.03, 0.04, 0.05, 0.1, 0.15, 0.2, 0.25};
  const auto table = reporting_rate_sweep(data, grid);

  bool monotone = true;
  std::ostringstream r0s;
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (!table[k].fit) {
      out.require(false, "fit failed at p=" + fixed(grid[k], 2) + ": " + table[k].error);
      return;
    }
    r0s << (k ? " " : "") << fixed(table[k].fit->r0_hat, 3);
    if (k > 0 && table[k].fit->r0_hat <= table[k - 1].fit->r0_hat) monotone = false;
  }
  const MleResult& m = *table[4].fit;
  out.detail << "N = " << fixed(n, 0) << ", p=0.05: (" << fixed(m.beta_hat, 3) << ", " << fixed(m.gamma_hat, 3)
             << ", " << fixed(*m.sigma_hat, 3) << "), R0 " << fixed(m.r0_hat, 3)
             << "; R0 column " << (monotone ? "increasing" : "not increasing");
  out.notes.push_back("R0 over p: " + r0s.str());
  out.require(round_sig(m.beta_hat, 2) == round_sig(4.82, 2), "beta to 2 s.f.");
  out.require(round_sig(m.gamma_hat, 2) == round_sig(4.22, 2), "gamma to 2 s.f.");
  out.require(round_sig(*m.sigma_hat, 2) == round_sig(1.37, 2), "sigma to 2 s.f.");
  out.require(round_sig(m.r0_hat, 2) == round_sig(1.14, 2), "R0 to 2 s.f.");
  out.require(monotone, "R0 monotone in p");
}

// 10
void property_suites_check(Outcome& out) {
  double conservation = 0.0;
  for (const ReferenceConfig& cfg : reference_grid()) {
    const Trajectory traj =
        integrate_exact(SirParams(cfg.beta, cfg.gamma), InitialCondition::from_population(cfg.population), 400);
    const Eigen::VectorXd total = traj.s() + traj.i() + traj.r();
    conservation = std::max(conservation, (total.array() - 1.0).abs().maxCoeff());
  }
  out.require(conservation < 1e-9, "conservation");

  double gradient_error = 0.0;
  {
    const auto init = InitialCondition::from_population(1e5);
    const NoiseModel noise = NoiseModel::case2(0.2);
    const ObservationSeries obs = observe(integrate_exact(kTheta0, init, 40), noise, 0.6, 40, 99);
    const LikelihoodSpec spec{obs, init, noise, true};
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> beta(0.15, 0.35), gamma(0.03, 0.12), sigma(0.1, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Vector3d x(beta(gen), gamma(gen), sigma(gen));
      const Eigen::VectorXd analytic = evaluate_log_likelihood(x(0), x(1), x(2), spec, true).gradient;
      Eigen::Vector3d numeric;
      for (int k = 0; k < 3; ++k) {
        const double h = 1e-6 * x(k);
        Eigen::Vector3d up = x, down = x;
        up(k) += h;
        down(k) -= h;
        numeric(k) = (evaluate_log_likelihood(up(0), up(1), up(2), spec, false).value -
                      evaluate_log_likelihood(down(0), down(1), down(2), spec, false).value) /
                     (2 * h);
      }
      gradient_error = std::max(gradient_error, (analytic - numeric).lpNorm<Eigen::Infinity>() /
                                                    analytic.lpNorm<Eigen::Infinity>());
    }
  }
  out.require(gradient_error < 1e-4, "gradient vs finite differences");

  const TestSpec lrt(Perturbation(kTheta0, 0.03, pi / 4), 0.05, 60, 1.0, NoiseModel::case2(0.3), kInit7);
  const EmpiricalRate type1 = empirical_type1(lrt, 10000, 1010, worker_threads());
  const double type1_se = std::sqrt(0.05 * 0.95 / 10000);
  out.require(std::abs(type1.rate - 0.05) <= 3 * type1_se, "type I calibration");

  bool deterministic = true;
  {
    const NoiseModel noise = NoiseModel::known(Eigen::VectorXd::Constant(120, std::sqrt(1e9)));
    EnsembleOptions one, many;
    many.threads = std::max(2, worker_threads());
    std::ostringstream a, b;
    write_ensemble_csv(a, mle_ensemble(kTheta0, kInit7, noise, 1.0, 120, 4, 77, one));
    write_ensemble_csv(b, mle_ensemble(kTheta0, kInit7, noise, 1.0, 120, 4, 77, many));
    deterministic = a.str() == b.str();
    std::ostringstream c, d;
    write_power_csv(c, {{pi / 4, 0.03, 0.3, power(lrt, 500, 5, 1)}});
    write_power_csv(d, {{pi / 4, 0.03, 0.3, power(lrt, 500, 5, many.threads)}});
    deterministic = deterministic && c.str() == d.str();
  }
  out.require(deterministic, "byte-identical reruns");

  double invariance = 0.0;
  const double closed_form = 1.0 - normal_cdf(normal_quantile(0.05) + 0.03 * std::sqrt(5.0) / (0.3 * std::sqrt(2.0)));
  for (const ReferenceConfig& cfg : reference_grid()) {
    const TestSpec spec(Perturbation(SirParams(cfg.beta, cfg.gamma), 0.03, pi / 4), 0.05, 5, 1.0,
                        NoiseModel::case2(0.3), InitialCondition::from_population(cfg.population));
    invariance = std::max(invariance, std::abs(type2_approx(spec, ApproxVariant::second) - closed_form));
  }
  out.require(invariance <= 1e-12, "case 2 closed-form invariance");

  out.detail << "conservation " << std::scientific << std::setprecision(1) << conservation << " (< 1e-9), gradient "
             << gradient_error << " (< 1e-4), type I " << std::fixed << std::setprecision(4) << type1.rate
             << " (0.05 +- " << 3 * type1_se << "), reruns " << (deterministic ? "identical" : "differ")
             << ", case 2 invariance " << std::scientific << std::setprecision(1) << invariance;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "peak time", 1, peak_time_check},
      {2, "MLE ridge", 600, ridge_check},
      {3, "approximation 1 validity", 120, approximation_validity_check},
      {4, "error fit", 120, error_fit_check},
      {5, "theoretical error bound", std::numeric_limits<double>::infinity(), theoretical_bound_check},
      {6, "type II agreement", 900, type2_agreement_check},
      {7, "epsilon inversion", 1, epsilon_inversion_check},
      {8, "consequence gap", 10, consequence_gap_check},
      {9, "NYC table", 60, nyc_table_check},
      {10, "property suites", std::numeric_limits<double>::infinity(), property_suites_check},
  };

  std::vector<int> selected;
  for (int a = 1; a < argc; ++a) selected.push_back(std::atoi(argv[a]));

  bool all_pass = true;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.notes.push_back(std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.require(seconds < c.budget_seconds, "runtime over " + fixed(c.budget_seconds, 0) + " s");
    all_pass = all_pass && out.pass;
    std::cout << "criterion " << c.id << ' ' << (out.pass ? "PASS " : "FAIL ") << c.name << ": "
              << out.detail.str() << " [" << fixed(seconds, 2) << " s]\n";
    for (const auto& note : out.notes) std::cout << "    " << note << '\n';
    std::cout.flush();
  }
  return all_pass ? 0 : 1;
}
