#include "sirid/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "sirid/csv.hpp"
#include "sirid/ingest.hpp"
#include "sirid/inference.hpp"
#include "sirid/perturb.hpp"
#include "sirid/testing.hpp"

#ifndef SIRID_VERSION
#define SIRID_VERSION "unknown"
#endif

namespace sirid {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  fail(ErrorKind::config_validation, path + ": " + what);
}

// Typed, path-aware view of one JSON object.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) invalid(path_, "expected an object");
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : j_.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) invalid(at(key), "unknown key");
    }
  }
  bool has(std::string_view key) const { return j_.contains(key); }
  std::string at(std::string_view key) const { return path_ + "/" + std::string(key); }

  const json& get(std::string_view key) const {
    if (!has(key)) invalid(at(key), "required key missing");
    return j_.at(std::string(key));
  }
  double number(std::string_view key) const {
    const json& v = get(key);
    if (!v.is_number()) invalid(at(key), "expected a number");
    return v.get<double>();
  }
  int integer(std::string_view key) const {
    const json& v = get(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < std::numeric_limits<int>::min() ||
        v.get<std::int64_t>() > std::numeric_limits<int>::max()) {
      invalid(at(key), "expected an integer");
    }
    return v.get<int>();
  }
  std::uint64_t unsigned_integer(std::string_view key) const {
    const json& v = get(key);
    if (!v.is_number_unsigned()) invalid(at(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::string string(std::string_view key) const {
    const json& v = get(key);
    if (!v.is_string()) invalid(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(std::string_view key) const {
    const json& v = get(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) invalid(at(key), "expected a number or a nonempty array");
    std::vector<double> out;
    for (const json& x : v) {
      if (!x.is_number()) invalid(at(key), "array entries must be numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  Block block(std::string_view key) const { return Block(get(key), at(key)); }

 private:
  const json& j_;
  std::string path_;
};

template <typename F>
auto checked(const std::string& path, F&& make) {
  try {
    return make();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config_validation) throw;
    invalid(path, e.what());
  }
}

struct Config {
  std::uint64_t seed = 0;
  int threads = 1;
  int steps_per_day = kDefaultStepsPerDay;
  std::optional<SirParams> params;
  std::optional<InitialCondition> init;
  std::optional<NoiseModel> noise;
  std::optional<int> horizon;
  // observe
  double p = 1.0;
  int days = 0;
  // perturbation
  double epsilon = 0.0;
  Eigen::VectorXd omegas;
  // test
  double alpha = 0.05;
  std::vector<double> test_epsilons, test_omegas, test_sigmas;
  int replicates = 0;
  // ensemble
  int starts = 8;
  // fit
  std::filesystem::path data;
  double population = 8'399'000.0;
  std::optional<DateRange> range;
  std::vector<double> p_values;
  double level = 0.95;
  // inversion
  std::vector<double> targets, deltas;
  double inv_sigma = 0.0;
};

struct Layout {
  std::set<std::string_view> required;
  std::set<std::string_view> optional;
};

const std::map<std::string, Layout, std::less<>>& layouts() {
  static const std::map<std::string, Layout, std::less<>> table{
      {"simulate", {{"params", "init", "horizon"}, {"integration", "noise", "observe"}}},
      {"sweep-directions", {{"params", "init", "perturbation", "horizon"}, {"integration"}}},
      {"error-fit", {{"params", "init", "perturbation"}, {"integration", "horizon"}}},
      {"fit", {{"fit"}, {}}},
      {"ensemble", {{"params", "init", "noise", "observe", "ensemble"}, {"integration"}}},
      {"power", {{"params", "init", "noise", "test"}, {"integration"}}},
      {"power-empirical", {{"params", "init", "noise", "test"}, {"integration"}}},
      {"epsilon-invert", {{"inversion"}, {}}},
      {"nyc-table", {{"fit"}, {}}},
  };
  return table;
}

NoiseModel parse_noise(const Block& b) {
  b.allow({"kind", "sigma", "sigma_t"});
  const std::string kind_name = b.string("kind");
  const NoiseKind kind = checked(b.at("kind"), [&] { return noise_kind_from_string(kind_name); });
  if (kind == NoiseKind::known_sequence) {
    if (b.has("sigma")) invalid(b.at("sigma"), "known_sequence takes sigma_t");
    const std::vector<double> sd = b.numbers("sigma_t");
    return checked(b.at("sigma_t"), [&] {
      return NoiseModel::known(Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size())));
    });
  }
  if (b.has("sigma_t")) invalid(b.at("sigma_t"), "only known_sequence takes sigma_t");
  const double sigma = b.number("sigma");
  return checked(b.at("sigma"), [&] { return NoiseModel::make(kind, sigma); });
}

Config parse(std::string_view subcommand, const json& doc) {
  const auto it = layouts().find(subcommand);
  if (it == layouts().end()) invalid("", "unknown subcommand '" + std::string(subcommand) + "'");
  const Layout& layout = it->second;
  const Block root(doc, "");
  for (const auto& [key, value] : doc.items()) {
    if (key == "seed" || key == "threads") continue;
    if (!layout.required.contains(key) && !layout.optional.contains(key)) {
      invalid("/" + key, "unknown key for subcommand '" + std::string(subcommand) + "'");
    }
  }
  for (std::string_view key : layout.required) {
    if (!doc.contains(key)) invalid("/" + std::string(key), "required key missing");
  }

  Config c;
  if (root.has("seed")) c.seed = root.unsigned_integer("seed");
  if (root.has("threads")) {
    c.threads = root.integer("threads");
    if (c.threads < 1) invalid("/threads", "must be >= 1");
  }
  if (root.has("integration")) {
    const Block b = root.block("integration");
    b.allow({"steps_per_day"});
    c.steps_per_day = b.integer("steps_per_day");
    if (c.steps_per_day < 1) invalid(b.at("steps_per_day"), "must be >= 1");
  }
  if (root.has("params")) {
    const Block b = root.block("params");
    b.allow({"beta", "gamma"});
    const double beta = b.number("beta"), gamma = b.number("gamma");
    c.params = checked("/params", [&] { return SirParams(beta, gamma); });
  }
  if (root.has("init")) {
    const Block b = root.block("init");
    b.allow({"population", "s0", "i0"});
    const double n = b.number("population");
    if (b.has("s0") != b.has("i0")) invalid("/init", "give both s0 and i0 or neither");
    c.init = checked("/init", [&] {
      return b.has("s0") ? InitialCondition(b.number("s0"), b.number("i0"), n)
                         : InitialCondition::from_population(n);
    });
  }
  if (root.has("horizon")) {
    c.horizon = root.integer("horizon");
    if (*c.horizon < 1) invalid("/horizon", "must be >= 1");
  }
  if (root.has("noise")) c.noise = parse_noise(root.block("noise"));
  if (root.has("observe")) {
    const Block b = root.block("observe");
    b.allow({"p", "days"});
    c.p = b.number("p");
    c.days = b.integer("days");
    if (!(c.p > 0.0 && c.p <= 1.0)) invalid(b.at("p"), "must lie in (0, 1]");
    if (c.days < 1) invalid(b.at("days"), "must be >= 1");
  }
  if (subcommand == "simulate" && root.has("noise") != root.has("observe")) {
    invalid("/observe", "noise and observe go together");
  }
  if (root.has("perturbation")) {
    const Block b = root.block("perturbation");
    if (subcommand == "error-fit") {
      b.allow({"epsilon"});
    } else {
      b.allow({"epsilon", "omegas", "omega_count"});
    }
    c.epsilon = b.number("epsilon");
    if (b.has("omegas") && b.has("omega_count")) invalid("/perturbation", "give omegas or omega_count");
    if (b.has("omegas")) {
      const std::vector<double> w = b.numbers("omegas");
      c.omegas = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    } else {
      const int count = b.has("omega_count") ? b.integer("omega_count") : 90;
      c.omegas = checked(b.at("omega_count"), [&] { return equally_spaced_angles(count); });
    }
    checked("/perturbation", [&] { return Perturbation(*c.params, c.epsilon, 0.0); });
  }
  if (root.has("test")) {
    const Block b = root.block("test");
    b.allow({"alpha", "days", "p", "epsilons", "omegas", "sigmas", "replicates"});
    c.alpha = b.number("alpha");
    c.days = b.integer("days");
    c.p = b.number("p");
    c.test_epsilons = b.numbers("epsilons");
    c.test_omegas = b.numbers("omegas");
    if (b.has("sigmas")) {
      if (c.noise->kind() == NoiseKind::known_sequence) {
        invalid(b.at("sigmas"), "a known sequence has no scale to sweep");
      }
      c.test_sigmas = b.numbers("sigmas");
    }
    if (subcommand == "power-empirical") {
      c.replicates = b.integer("replicates");
      if (c.replicates < 100) invalid(b.at("replicates"), "must be >= 100");
    } else if (b.has("replicates")) {
      invalid(b.at("replicates"), "only power-empirical simulates");
    }
  }
  if (root.has("ensemble")) {
    const Block b = root.block("ensemble");
    b.allow({"replicates", "starts"});
    c.replicates = b.integer("replicates");
    if (c.replicates < 1) invalid(b.at("replicates"), "must be >= 1");
    if (b.has("starts")) {
      c.starts = b.integer("starts");
      if (c.starts < 1) invalid(b.at("starts"), "must be >= 1");
    }
  }
  if (root.has("fit")) {
    const Block b = root.block("fit");
    if (subcommand == "fit") {
      b.allow({"data", "population", "first", "last", "p", "level"});
      c.p = b.number("p");
      if (!(c.p > 0.0 && c.p <= 1.0)) invalid(b.at("p"), "must lie in (0, 1]");
      if (b.has("level")) c.level = b.number("level");
      if (!(c.level > 0.0 && c.level < 1.0)) invalid(b.at("level"), "must lie in (0, 1)");
    } else {
      b.allow({"data", "population", "first", "last", "p_values"});
      c.p_values = b.numbers("p_values");
      for (double p : c.p_values) {
        if (!(p > 0.0 && p <= 1.0)) invalid(b.at("p_values"), "each p must lie in (0, 1]");
      }
    }
    c.data = b.string("data");
    if (b.has("population")) c.population = b.number("population");
    if (!(c.population >= 1.0)) invalid(b.at("population"), "must be >= 1");
    if (b.has("first") != b.has("last")) invalid("/fit", "give both first and last or neither");
    if (b.has("first")) {
      c.range = DateRange{checked(b.at("first"), [&] { return parse_date(b.string("first")); }),
                          checked(b.at("last"), [&] { return parse_date(b.string("last")); })};
    }
  }
  if (root.has("inversion")) {
    const Block b = root.block("inversion");
    b.allow({"target_type2", "alpha", "sigma", "p", "days", "delta"});
    c.targets = b.numbers("target_type2");
    c.alpha = b.number("alpha");
    c.inv_sigma = b.number("sigma");
    c.p = b.number("p");
    c.days = b.integer("days");
    c.deltas = b.numbers("delta");
  }
  return c;
}

struct Artifact {
  std::string name;
  std::string bytes;
};

std::string render_json(const json& j) { return j.dump(2) + "\n"; }

template <typename Writer>
Artifact csv_artifact(std::string name, Writer&& write) {
  std::ostringstream out;
  write(out);
  return {std::move(name), out.str()};
}

json summary_json(const EpidemicSummary& s) {
  return {{"peak_time", s.peak_time},
          {"attack_fraction_at_peak_plus_10", s.attack_fraction_at_peak_plus_10},
          {"duration", s.duration}};
}

json fit_json(const MleResult& m) {
  json j{{"beta_hat", m.beta_hat}, {"gamma_hat", m.gamma_hat}, {"r0_hat", m.r0_hat},
         {"delta_hat", m.delta_hat}, {"loglik", m.loglik}, {"converged", m.converged},
         {"iterations", m.iterations}, {"gradient_norm", m.gradient_norm}};
  j["sigma_hat"] = m.sigma_hat ? json(*m.sigma_hat) : json(nullptr);
  return j;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Artifact> run_simulate(const Config& c) {
  const Trajectory traj = integrate_exact(*c.params, *c.init, *c.horizon, c.steps_per_day);
  std::vector<Artifact> out;
  out.push_back(csv_artifact("trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, traj); }));
  out.push_back(csv_artifact("incidence.csv", [&](std::ostream& o) { write_incidence_csv(o, incidence(traj)); }));
  if (c.noise) {
    require(c.days <= *c.horizon, ErrorKind::config_validation,
            "/observe/days: exceeds the horizon");
    const ObservationSeries obs = observe(traj, *c.noise, c.p, c.days, c.seed);
    out.push_back(csv_artifact("observations.csv", [&](std::ostream& o) {
      o << "t,y\n";
      for (int t = 1; t <= obs.days(); ++t) o << t << ',' << csv::format(obs.values(t - 1)) << '\n';
    }));
    json sidecar{{"reporting_rate", obs.reporting_rate},
                 {"noise_kind", std::string(to_string(obs.noise.kind()))},
                 {"population", c.init->population()},
                 {"seed", obs.seed}};
    if (obs.noise.kind() == NoiseKind::known_sequence) {
      sidecar["sigma_t"] = std::vector<double>(obs.noise.sigma_t().begin(), obs.noise.sigma_t().end());
    } else {
      sidecar["sigma"] = obs.noise.sigma();
    }
    out.push_back({"observations.json", render_json(sidecar)});
  }
  out.push_back({"summary.json",
                 render_json(summary_json(summarize_epidemic(*c.params, *c.init, c.steps_per_day)))});
  return out;
}

std::vector<Artifact> run_sweep(const Config& c) {
  const std::vector<SeparationCurve> curves = separation_sweep(
      *c.params, *c.init, c.epsilon, c.omegas, *c.horizon, {c.steps_per_day, c.threads});
  std::vector<Artifact> out;
  out.push_back(csv_artifact("sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, curves); }));
  out.push_back(csv_artifact("bound.csv", [&](std::ostream& o) {
    o << "t,lower_bound,min_distance,argmin_omega\n";
    for (int t = 0; t <= *c.horizon; ++t) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < curves.size(); ++k) {
        if (curves[k].distance(t) < curves[best].distance(t)) best = k;
      }
      o << t << ',' << csv::format(lower_bound(*c.params, *c.init, c.epsilon, t)) << ','
        << csv::format(curves[best].distance(t)) << ',' << csv::format(curves[best].omega) << '\n';
    }
  }));
  return out;
}

std::vector<Artifact> run_error_fit(const Config& c) {
  const ErrorFit fit = error_fit(*c.params, *c.init, c.epsilon, c.horizon.value_or(0),
                                 {c.steps_per_day, c.threads});
  std::vector<Artifact> out;
  out.push_back(csv_artifact("error_fit.csv", [&](std::ostream& o) { write_error_fit_csv(o, fit); }));
  out.push_back({"error_fit.json",
                 render_json({{"slope", fit.slope},
                              {"intercept", fit.intercept},
                              {"crossing_time", fit.crossing_time},
                              {"percent_of_peak", fit.percent_of_peak},
                              {"peak_time", fit.peak_time}})});
  return out;
}

CaseData load_config_cases(const Config& c, const std::filesystem::path& path) {
  return load_cases(path, c.population, c.range);
}

std::vector<Artifact> run_fit(const Config& c, const std::filesystem::path& data_path) {
  const CaseData data = load_config_cases(c, data_path);
  const MleResult fit = fit_cases(data, c.p);
  json j = fit_json(fit);
  j["p"] = c.p;
  j["population"] = c.population;
  j["days"] = static_cast<int>(data.counts.size()) - 1;
  std::vector<Artifact> out;
  out.push_back({"fit.json", render_json(j)});
  const FittedBand band = fitted_band(data, fit, c.p, c.level);
  out.push_back(csv_artifact("band.csv", [&](std::ostream& o) { write_band_csv(o, data, band); }));
  return out;
}

std::vector<Artifact> run_ensemble(const Config& c) {
  EnsembleOptions options;
  options.threads = c.threads;
  options.starts = c.starts;
  options.steps_per_day = c.steps_per_day;
  const MleEnsemble e =
      mle_ensemble(*c.params, *c.init, *c.noise, c.p, c.days, c.replicates, c.seed, options);
  std::vector<Artifact> out;
  out.push_back(csv_artifact("ensemble.csv", [&](std::ostream& o) { write_ensemble_csv(o, e); }));
  const EnsembleSummary s = summarize(e);
  out.push_back({"ensemble_summary.json",
                 render_json({{"replicates", c.replicates},
                              {"converged", s.used},
                              {"failures", e.failures},
                              {"slope_beta_on_gamma", s.slope_beta_on_gamma},
                              {"r0_min", s.r0_min},
                              {"r0_max", s.r0_max},
                              {"sd_beta", s.sd_beta},
                              {"sd_gamma", s.sd_gamma},
                              {"sd_delta", s.sd_delta}})});
  return out;
}

std::vector<Artifact> run_power(const Config& c) {
  const bool scaled = c.noise->kind() != NoiseKind::known_sequence;
  const std::vector<double> sigmas =
      c.test_sigmas.empty() ? std::vector<double>{c.noise->sigma()} : c.test_sigmas;
  const TestSpec base = checked("/test", [&] {
    return TestSpec(Perturbation(*c.params, c.test_epsilons.front(), c.test_omegas.front()),
                    c.alpha, c.days, c.p, *c.noise, *c.init, c.steps_per_day);
  });
  std::vector<PowerRow> rows;
  std::uint64_t point = 0;
  for (double omega : c.test_omegas) {
    for (double eps : c.test_epsilons) {
      for (double sigma : sigmas) {
        const TestSpec spec = checked("/test", [&] {
          const TestSpec moved = base.with_direction(eps, omega);
          return scaled ? moved.with_noise(c.noise->with_sigma(sigma)) : moved;
        });
        const PowerResult r =
            power(spec, c.replicates, rng::derive_seed(c.seed, point++), c.threads);
        rows.push_back({omega, eps, scaled ? sigma : std::numeric_limits<double>::quiet_NaN(), r});
      }
    }
  }
  return {csv_artifact("power.csv", [&](std::ostream& o) { write_power_csv(o, rows); })};
}

std::vector<Artifact> run_inversion(const Config& c) {
  return {csv_artifact("epsilon.csv", [&](std::ostream& o) {
    o << "target_type2,alpha,sigma,p,days,delta,epsilon\n";
    for (double delta : c.deltas) {
      for (double target : c.targets) {
        const double eps = checked("/inversion", [&] {
          return epsilon_for_power(target, c.alpha, c.inv_sigma, c.p, c.days, delta);
        });
        o << csv::format(target) << ',' << csv::format(c.alpha) << ',' << csv::format(c.inv_sigma)
          << ',' << csv::format(c.p) << ',' << c.days << ',' << csv::format(delta) << ','
          << csv::format(eps) << '\n';
      }
    }
  })};
}

std::vector<Artifact> run_table(const Config& c, const std::filesystem::path& data_path) {
  const CaseData data = load_config_cases(c, data_path);
  const std::vector<RateFit> table = reporting_rate_sweep(data, c.p_values);
  return {csv_artifact("table.csv", [&](std::ostream& o) { write_rate_table_csv(o, table); })};
}

}  // namespace

const std::vector<std::string>& experiment_subcommands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, layout] : layouts()) out.push_back(name);
    return out;
  }();
  return names;
}

void validate_config(std::string_view subcommand, const json& config) { parse(subcommand, config); }

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  require(EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) == 1,
          ErrorKind::io, "sha256: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < length; ++k) {
    out.push_back(hex[digest[k] >> 4]);
    out.push_back(hex[digest[k] & 0xf]);
  }
  return out;
}

json error_document(const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  return {{"error",
           {{"kind", err ? std::string(to_string(err->kind())) : std::string("internal")},
            {"message", e.what()}}}};
}

RunReport run_experiment(std::string_view subcommand, const json& config,
                         const std::filesystem::path& out_dir,
                         const std::filesystem::path& base_dir, const RunOverrides& overrides) {
  Config c = parse(subcommand, config);
  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.threads) {
    require(*overrides.threads >= 1, ErrorKind::config_validation, "threads must be >= 1");
    c.threads = *overrides.threads;
  }

  json inputs{{"config_sha256", sha256_hex(config.dump())}};
  std::filesystem::path data_path;
  if (!c.data.empty()) {
    data_path = c.data.is_absolute() ? c.data : base_dir / c.data;
    inputs["data"] = {{"path", c.data.generic_string()}, {"sha256", sha256_hex(read_file(data_path))}};
  }

  std::vector<Artifact> artifacts;
  if (subcommand == "simulate") {
    artifacts = run_simulate(c);
  } else if (subcommand == "sweep-directions") {
    artifacts = run_sweep(c);
  } else if (subcommand == "error-fit") {
    artifacts = run_error_fit(c);
  } else if (subcommand == "fit") {
    artifacts = run_fit(c, data_path);
  } else if (subcommand == "ensemble") {
    artifacts = run_ensemble(c);
  } else if (subcommand == "power" || subcommand == "power-empirical") {
    artifacts = run_power(c);
  } else if (subcommand == "epsilon-invert") {
    artifacts = run_inversion(c);
  } else {
    artifacts = run_table(c, data_path);
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, ErrorKind::io, "cannot create " + out_dir.string() + ": " + ec.message());
  RunReport report{{}, c.seed};
  json outputs = json::array();
  const auto write = [&](const Artifact& a) {
    std::ofstream f(out_dir / a.name, std::ios::binary);
    f << a.bytes;
    require(static_cast<bool>(f), ErrorKind::io, "cannot write " + (out_dir / a.name).string());
    report.outputs.emplace_back(a.name);
  };
  for (const Artifact& a : artifacts) {
    write(a);
    outputs.push_back({{"path", a.name}, {"sha256", sha256_hex(a.bytes)}, {"bytes", a.bytes.size()}});
  }
  const json manifest{{"tool", "sirid"},
                      {"version", SIRID_VERSION},
                      {"subcommand", std::string(subcommand)},
                      {"seed", c.seed},
                      {"inputs", inputs},
                      {"outputs", outputs}};
  write({"manifest.json", render_json(manifest)});
  return report;
}

}  // namespace sirid
