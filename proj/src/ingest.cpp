#include "sirid/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <utility>

#include "sirid/csv.hpp"
#include "sirid/normal.hpp"

namespace sirid {

namespace {

using std::chrono::sys_days;

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::string at_line(std::size_t line) { return " (line " + std::to_string(line) + ")"; }

}  // namespace

Date parse_date(std::string_view text) {
  const bool shaped = text.size() == 10 && text[4] == '-' && text[7] == '-';
  const auto y = shaped ? parse_int<int>(text.substr(0, 4)) : std::nullopt;
  const auto m = shaped ? parse_int<unsigned>(text.substr(5, 2)) : std::nullopt;
  const auto d = shaped ? parse_int<unsigned>(text.substr(8, 2)) : std::nullopt;
  if (!y || !m || !d) fail(ErrorKind::malformed_csv, "not an ISO date: '" + std::string(text) + "'");
  const Date date{std::chrono::year{*y}, std::chrono::month{*m}, std::chrono::day{*d}};
  require(date.ok(), ErrorKind::malformed_csv, "invalid calendar date: '" + std::string(text) + "'");
  return date;
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

CaseData read_cases(std::istream& in, double population, std::optional<DateRange> range,
                    std::string label) {
  require(std::isfinite(population) && population >= 1.0, ErrorKind::invalid_argument,
          "read_cases: population must be >= 1");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::malformed_csv,
          "read_cases: missing header");
  const std::vector<std::string> header = csv::split_line(line);
  const auto column = [&header](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      fail(ErrorKind::malformed_csv, "read_cases: header lacks a '" + std::string(name) + "' column");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t date_col = column("date");
  const std::size_t count_col = column("count");

  std::vector<std::pair<Date, std::int64_t>> rows;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = csv::split_line(line);
    require(fields.size() == header.size(), ErrorKind::malformed_csv,
            "read_cases: expected " + std::to_string(header.size()) + " fields" + at_line(n));
    Date date;
    try {
      date = parse_date(fields[date_col]);
    } catch (const Error& e) {
      fail(ErrorKind::malformed_csv, std::string("read_cases: ") + e.what() + at_line(n));
    }
    const auto count = parse_int<std::int64_t>(fields[count_col]);
    require(count.has_value(), ErrorKind::malformed_csv,
            "read_cases: count is not an integer: '" + fields[count_col] + "'" + at_line(n));
    require(*count >= 0, ErrorKind::negative_count,
            "read_cases: negative count on " + format_date(date) + at_line(n));
    rows.emplace_back(date, *count);
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return sys_days(a.first) < sys_days(b.first); });
  for (std::size_t k = 1; k < rows.size(); ++k) {
    require(rows[k].first != rows[k - 1].first, ErrorKind::duplicate_date,
            "read_cases: duplicate date " + format_date(rows[k].first));
  }

  if (range) {
    require(sys_days(range->first) <= sys_days(range->last), ErrorKind::empty_series,
            "read_cases: empty date range " + format_date(range->first) + ".." +
                format_date(range->last));
    std::erase_if(rows, [&](const auto& r) {
      return sys_days(r.first) < sys_days(range->first) || sys_days(r.first) > sys_days(range->last);
    });
  }
  require(!rows.empty(), ErrorKind::empty_series, "read_cases: no rows in the requested range");

  const sys_days first = range ? sys_days(range->first) : sys_days(rows.front().first);
  const sys_days last = range ? sys_days(range->last) : sys_days(rows.back().first);
  CaseData data{{}, {}, population, std::move(label)};
  std::size_t k = 0;
  for (sys_days day = first; day <= last; day += std::chrono::days{1}) {
    if (k >= rows.size() || sys_days(rows[k].first) != day) {
      fail(ErrorKind::missing_date, "read_cases: no row for " + format_date(Date{day}));
    }
    data.dates.push_back(rows[k].first);
    data.counts.push_back(rows[k].second);
    ++k;
  }
  return data;
}

CaseData load_cases(const std::filesystem::path& path, double population,
                    std::optional<DateRange> range) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "load_cases: cannot open " + path.string());
  return read_cases(in, population, range, path.stem().string());
}

void save_cases(std::ostream& out, const CaseData& data) {
  out << "date,count\n";
  for (std::size_t k = 0; k < data.dates.size(); ++k) {
    out << format_date(data.dates[k]) << ',' << data.counts[k] << '\n';
  }
}

LikelihoodSpec case_likelihood(const CaseData& data, double p, int steps_per_day) {
  require(data.counts.size() >= 2, ErrorKind::insufficient_data,
          "case_likelihood: need the seed day and at least one further day");
  const auto days = static_cast<Eigen::Index>(data.counts.size()) - 1;
  Eigen::VectorXd y(days);
  for (Eigen::Index t = 0; t < days; ++t) y(t) = static_cast<double>(data.counts[t + 1]);
  const NoiseModel noise = NoiseModel::infection_root(1.0);
  return LikelihoodSpec{ObservationSeries{std::move(y), p, noise, 0},
                        InitialCondition::from_population(data.population), noise, true,
                        VarianceGradient::full, steps_per_day};
}

MleResult fit_cases(const CaseData& data, double p, const FitOptions& options) {
  const LikelihoodSpec spec = case_likelihood(data, p);
  return fit_mle(spec, default_starts(spec.obs), {}, options);
}

std::vector<RateFit> reporting_rate_sweep(const CaseData& data, const std::vector<double>& p_values,
                                          const FitOptions& options) {
  std::vector<RateFit> table;
  table.reserve(p_values.size());
  for (double p : p_values) {
    require(p > 0.0 && p <= 1.0, ErrorKind::invalid_argument,
            "reporting_rate_sweep: each p must lie in (0, 1]");
    try {
      table.push_back({p, fit_cases(data, p, options), {}});
    } catch (const Error& e) {
      table.push_back({p, std::nullopt, e.what()});
    }
  }
  return table;
}

void write_rate_table_csv(std::ostream& out, const std::vector<RateFit>& table) {
  out << "p,beta_hat,gamma_hat,sigma_hat,r0_hat,loglik,converged,error\n";
  for (const RateFit& row : table) {
    out << csv::format(row.p) << ',';
    if (row.fit) {
      const MleResult& m = *row.fit;
      out << csv::format(m.beta_hat) << ',' << csv::format(m.gamma_hat) << ','
          << (m.sigma_hat ? csv::format(*m.sigma_hat) : std::string()) << ','
          << csv::format(m.r0_hat) << ',' << csv::format(m.loglik) << ','
          << (m.converged ? 1 : 0) << ",\n";
    } else {
      std::string msg = row.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << ",,,,,0," << msg << '\n';
    }
  }
}

FittedBand fitted_band(const CaseData& data, const MleResult& fit, double p, double level) {
  require(fit.converged && fit.sigma_hat.has_value(), ErrorKind::invalid_argument,
          "fitted_band: needs a converged fit with an estimated sigma");
  require(level > 0.0 && level < 1.0, ErrorKind::invalid_argument,
          "fitted_band: level must lie in (0, 1)");
  const LikelihoodSpec spec = case_likelihood(data, p);
  const int days = spec.obs.days();
  const Trajectory traj =
      integrate_exact(SirParams(fit.beta_hat, fit.gamma_hat), spec.init, days, spec.steps_per_day);
  const double z = normal_quantile(0.5 + 0.5 * level);
  const Eigen::VectorXd mean = p * incidence(traj);
  const Eigen::VectorXd sd = sigma_sequence(NoiseModel::infection_root(*fit.sigma_hat), traj, days);
  return FittedBand{Eigen::VectorXd::LinSpaced(days, 1.0, days), mean, mean - z * sd,
                    mean + z * sd, z};
}

void write_band_csv(std::ostream& out, const CaseData& data, const FittedBand& band) {
  out << "t,date,observed,mean,lower,upper\n";
  for (Eigen::Index k = 0; k < band.mean.size(); ++k) {
    const auto day = static_cast<std::size_t>(k + 1);
    out << day << ',' << format_date(data.dates[day]) << ',' << data.counts[day] << ','
        << csv::format(band.mean(k)) << ',' << csv::format(band.lower(k)) << ','
        << csv::format(band.upper(k)) << '\n';
  }
}

double tune_population(CaseData data, double p, double target_beta, double lower, double upper,
                       const FitOptions& options) {
  require(lower >= 1.0 && upper > lower, ErrorKind::invalid_argument,
          "tune_population: need 1 <= lower < upper");
  const auto gap = [&](double log_n) {
    data.population = std::exp(log_n);
    return fit_cases(data, p, options).beta_hat - target_beta;
  };
  double lo = std::log(lower), hi = std::log(upper);
  double g_lo = gap(lo);
  const double g_hi = gap(hi);
  require(g_lo * g_hi <= 0.0, ErrorKind::invalid_argument,
          "tune_population: the target beta is not bracketed by the population interval");
  for (int k = 0; k < 60 && hi - lo > 1e-7; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double g_mid = gap(mid);
    if ((g_mid <= 0.0) == (g_lo <= 0.0)) {
      lo = mid;
      g_lo = g_mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace sirid
