#include "sgldreg/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "sgldreg/errors.hpp"
#include "sgldreg/formats.hpp"
#include "sgldreg/parallel.hpp"
#include "sgldreg/posterior.hpp"

namespace sgldreg {
namespace {

double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return std::sqrt(sq / double(v.size() - 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw NumericError("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double dice(const LabelMap& a, const LabelMap& b, std::int32_t label) {
  if (a.height != b.height || a.width != b.width) throw DimensionError("dice: label maps differ in extents");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool in_a = a.labels[i] == label, in_b = b.labels[i] == label;
    na += in_a;
    nb += in_b;
    both += in_a && in_b;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(both) / double(na + nb);
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  require_shape(b.shape(), a.shape(), "mean_squared_error");
  if (a.empty()) throw ContractError("mean_squared_error: empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s / double(a.size());
}

EvalMode parse_mode(const std::string& name) {
  if (name == "averaged") return EvalMode::Averaged;
  if (name == "last") return EvalMode::Last;
  if (name == "single") return EvalMode::Single;
  throw ConfigError("unknown mode '" + name + "' (expected averaged, last or single)");
}

std::string mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::Averaged: return "averaged";
    case EvalMode::Last: return "last";
    case EvalMode::Single: return "single";
  }
  return "?";
}

std::vector<WeightSnapshot> select_snapshots(EvalMode mode, const std::vector<WeightSnapshot>& snapshots,
                                             const std::vector<WeightSnapshot>& baseline) {
  const auto& source = mode == EvalMode::Single ? baseline : snapshots;
  if (source.empty()) {
    throw ConfigError(mode == EvalMode::Single ? "mode single needs a baseline checkpoint" : "checkpoint holds no snapshots");
  }
  if (mode == EvalMode::Averaged) return source;
  return {source.back()};
}

PairMetrics score_field(const ImagePair& pair, const DeformationField& field) {
  PairMetrics m;
  m.mse = mean_squared_error(pair.fixed, warp_bilinear(pair.moving, field));
  m.unregistered_mse = mean_squared_error(pair.fixed, pair.moving);
  if (pair.moving_labels && pair.fixed_labels) {
    const LabelMap warped = warp_nearest(*pair.moving_labels, field);
    std::set<std::int32_t> labels = pair.moving_labels->label_set();
    for (auto l : pair.fixed_labels->label_set()) labels.insert(l);
    labels.erase(0);
    std::vector<double> scores;
    for (auto l : labels) {
      const double d = dice(warped, *pair.fixed_labels, l);
      m.dice.emplace_back(l, d);
      scores.push_back(d);
    }
    if (!scores.empty()) {
      m.dice_mean = sample_mean(scores);
      m.dice_std = sample_std(scores);
    }
  }
  return m;
}

PairMetrics evaluate_pair(const UNetConfig& config, const ImagePair& pair,
                          const std::vector<WeightSnapshot>& snapshots, const Tensor& input_moving,
                          const Tensor& input_fixed) {
  const auto fields = sample_fields(config, snapshots, input_moving, input_fixed);
  return score_field(pair, posterior_mean<float>(fields));
}

PairMetrics evaluate_pair(const UNetConfig& config, const ImagePair& pair,
                          const std::vector<WeightSnapshot>& snapshots) {
  return evaluate_pair(config, pair, snapshots, pair.moving, pair.fixed);
}

const SweepCell& SweepReport::cell(EvalMode method, double sigma) const {
  for (const auto& c : cells) {
    if (c.method == method && c.sigma == sigma) return c;
  }
  throw ContractError("sweep report has no cell for " + mode_name(method) + " at sigma " + format_number(sigma));
}

SweepReport noise_sweep(const UNetConfig& config, const std::vector<ImagePair>& test_pairs,
                        const std::vector<WeightSnapshot>& snapshots, const std::vector<WeightSnapshot>& baseline,
                        std::span<const double> sigmas, std::uint64_t seed) {
  if (test_pairs.empty()) throw ConfigError("noise sweep: no test pairs");
  if (std::find(sigmas.begin(), sigmas.end(), 0.0) == sigmas.end()) {
    throw ConfigError("noise sweep: the sigma list must include 0");
  }
  for (double s : sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("noise sweep: sigma must be finite and >= 0");
  }
  const auto averaged = select_snapshots(EvalMode::Averaged, snapshots, baseline);
  const auto single = select_snapshots(EvalMode::Single, snapshots, baseline);
  check_layout(config, single.front().parameters);

  SweepReport report;
  report.methods = {EvalMode::Averaged, EvalMode::Last, EvalMode::Single};
  report.sigmas.assign(sigmas.begin(), sigmas.end());
  const std::size_t n = test_pairs.size();

  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    std::vector<PairMetrics> metrics(n * 3);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t pi = begin; pi < end; ++pi) {
        const auto& pair = test_pairs[pi];
        const auto sigma_bits = std::bit_cast<std::uint64_t>(sigmas[si]);
        std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(sigma_bits),
                          std::uint32_t(sigma_bits >> 32), std::uint32_t(pi)};
        std::mt19937_64 rng(seq);
        const Tensor moving = add_gaussian_noise(pair.moving, sigmas[si], rng);
        const Tensor fixed = add_gaussian_noise(pair.fixed, sigmas[si], rng);
        const auto fields = sample_fields(config, averaged, moving, fixed);
        metrics[pi * 3 + 0] = score_field(pair, posterior_mean<float>(fields));
        metrics[pi * 3 + 1] = score_field(pair, fields.back());
        const auto base = sample_fields(config, single, moving, fixed);
        metrics[pi * 3 + 2] = score_field(pair, base.front());
      }
    });
    for (std::size_t mi = 0; mi < 3; ++mi) {
      SweepCell cell;
      cell.method = report.methods[mi];
      cell.sigma = sigmas[si];
      for (std::size_t pi = 0; pi < n; ++pi) {
        const auto& m = metrics[pi * 3 + mi];
        cell.mse_values.push_back(m.mse);
        cell.unregistered_values.push_back(m.unregistered_mse);
        if (m.dice_mean) cell.dice_values.push_back(*m.dice_mean);
      }
      cell.mse_mean = sample_mean(cell.mse_values);
      cell.mse_std = sample_std(cell.mse_values);
      if (!cell.dice_values.empty()) {
        cell.dice_mean = sample_mean(cell.dice_values);
        cell.dice_std = sample_std(cell.dice_values);
      }
      report.cells.push_back(std::move(cell));
    }
  }
  std::stable_sort(report.cells.begin(), report.cells.end(),
                   [](const SweepCell& a, const SweepCell& b) { return int(a.method) < int(b.method); });
  return report;
}

std::string sweep_csv(const SweepReport& report) {
  std::string out = "method,metric";
  for (double s : report.sigmas) out += ",mean@" + format_number(s) + ",std@" + format_number(s);
  out += "\n";
  bool has_dice = !report.cells.empty() && report.cells.front().dice_mean.has_value();
  for (const char* metric : {"mse", "dice"}) {
    const bool is_dice = std::string(metric) == "dice";
    if (is_dice && !has_dice) continue;
    for (auto method : report.methods) {
      out += mode_name(method) + "," + metric;
      for (double s : report.sigmas) {
        const auto& c = report.cell(method, s);
        const double mean = is_dice ? c.dice_mean.value_or(std::nan("")) : c.mse_mean;
        const double sd = is_dice ? c.dice_std.value_or(std::nan("")) : c.mse_std;
        out += "," + format_number(mean) + "," + format_number(sd);
      }
      out += "\n";
    }
  }
  return out;
}

SweepCsv parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("sweep CSV: missing header at line 1");
  const auto header = split(line, ',');
  if (header.size() < 4 || header[0] != "method" || header[1] != "metric" || (header.size() - 2) % 2 != 0) {
    throw FormatError("sweep CSV: malformed header at line 1");
  }
  SweepCsv csv;
  for (std::size_t i = 2; i < header.size(); i += 2) {
    if (header[i].rfind("mean@", 0) != 0) throw FormatError("sweep CSV: malformed header column '" + header[i] + "'");
    csv.sigmas.push_back(parse_number(header[i].substr(5)));
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != header.size()) {
      throw FormatError("sweep CSV: line " + std::to_string(line_no) + " has " + std::to_string(cols.size()) +
                        " columns, expected " + std::to_string(header.size()));
    }
    SweepCsvRow row{cols[0], cols[1], {}, {}};
    for (std::size_t i = 2; i < cols.size(); i += 2) {
      row.means.push_back(parse_number(cols[i]));
      row.stds.push_back(parse_number(cols[i + 1]));
    }
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

std::string sweep_table(const SweepReport& report) {
  std::ostringstream out;
  char buf[64];
  const bool has_dice = !report.cells.empty() && report.cells.front().dice_mean.has_value();
  for (const char* metric : {"MSE", "Dice"}) {
    const bool is_dice = std::string(metric) == "Dice";
    if (is_dice && !has_dice) continue;
    std::snprintf(buf, sizeof(buf), "%-10s", metric);
    out << buf;
    for (double s : report.sigmas) {
      std::snprintf(buf, sizeof(buf), " %22s", ("sigma=" + format_number(s)).c_str());
      out << buf;
    }
    out << "\n";
    for (auto method : report.methods) {
      std::snprintf(buf, sizeof(buf), "%-10s", mode_name(method).c_str());
      out << buf;
      for (double s : report.sigmas) {
        const auto& c = report.cell(method, s);
        const double mean = is_dice ? *c.dice_mean : c.mse_mean;
        const double sd = is_dice ? *c.dice_std : c.mse_std;
        char cell[48];
        std::snprintf(cell, sizeof(cell), "%.4f (%.4f)", mean, sd);
        std::snprintf(buf, sizeof(buf), " %22s", cell);
        out << buf;
      }
      out << "\n";
    }
  }
  return out.str();
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ContractError("incomplete_beta: a and b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ContractError("incomplete_beta: x must lie in [0,1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw ContractError("student_t_two_sided: df must be > 0");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("paired_t_test: samples differ in length");
  if (a.size() < 2) throw ContractError("paired_t_test: need at least two pairs");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  TTestResult r;
  r.df = n - 1;
  r.mean_difference = sample_mean(d);
  const double sd = sample_std(d);
  if (sd == 0.0) {
    r.degenerate = true;
    if (r.mean_difference == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
      r.p = 0.0;
    }
    return r;
  }
  r.t = r.mean_difference / (sd / std::sqrt(double(n)));
  r.p = student_t_two_sided(r.t, double(r.df));
  return r;
}

}  // namespace sgldreg
