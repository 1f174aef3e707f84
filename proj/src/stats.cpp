#include "synprobe/stats.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <sstream>

#include "synprobe/log.hpp"
#include "synprobe/special_functions.hpp"

namespace synprobe {

RegressionFit ols_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  const auto cols = x.cols();
  if (y.size() != n) throw StatsError("y has " + std::to_string(y.size()) + " rows, X has " + std::to_string(n));
  if (cols == 0) throw StatsError("design matrix has no columns");
  if (n <= cols) {
    throw InsufficientDataError("need more observations than columns (n=" + std::to_string(n) +
                                ", columns=" + std::to_string(cols) + ")");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < cols) throw SingularDesignError("design matrix is rank deficient");

  RegressionFit fit;
  fit.n = static_cast<int>(n);
  fit.num_columns = static_cast<int>(cols);
  fit.df_resid = static_cast<int>(n - cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    if ((x.col(c).array() == 1.0).all()) fit.has_intercept = true;
  }
  fit.coefficients = qr.solve(y);
  fit.residuals = y - x * fit.coefficients;
  fit.rss = fit.residuals.squaredNorm();

  // (X^T X)^{-1} = P R^{-1} R^{-T} P^T with X P = Q R.
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(cols, cols));
  const Eigen::MatrixXd perm = qr.colsPermutation();
  const Eigen::MatrixXd xtx_inv = perm * (r_inv * r_inv.transpose()) * perm.transpose();

  const double sigma2 = fit.rss / double(fit.df_resid);
  fit.standard_errors = (sigma2 * xtx_inv.diagonal().array()).sqrt();
  fit.t_stats.resize(cols);
  fit.p_values.resize(cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double se = fit.standard_errors(c);
    const double b = fit.coefficients(c);
    if (se == 0) {
      fit.t_stats(c) = b == 0 ? 0.0 : std::copysign(INFINITY, b);
      fit.p_values(c) = b == 0 ? 1.0 : 0.0;
    } else {
      fit.t_stats(c) = b / se;
      fit.p_values(c) = special::student_t_two_sided_p(fit.t_stats(c), fit.df_resid);
    }
  }

  const double tss = fit.has_intercept ? (y.array() - y.mean()).square().sum() : y.squaredNorm();
  fit.r2 = tss == 0 ? 0.0 : 1.0 - fit.rss / tss;
  const double centered = fit.has_intercept ? 1.0 : 0.0;
  fit.adj_r2 = 1.0 - (1.0 - fit.r2) * (double(n) - centered) / double(fit.df_resid);
  const double nn = double(n);
  fit.log_likelihood = -0.5 * nn * (std::log(2.0 * std::numbers::pi * fit.rss / nn) + 1.0);
  return fit;
}

Eigen::MatrixXd design_with_intercept(std::span<const std::vector<double>> predictors) {
  const std::size_t n = predictors.empty() ? 0 : predictors.front().size();
  Eigen::MatrixXd x(n, predictors.size() + 1);
  x.col(0).setOnes();
  for (std::size_t p = 0; p < predictors.size(); ++p) {
    if (predictors[p].size() != n) throw StatsError("predictor columns differ in length");
    for (std::size_t i = 0; i < n; ++i) x(i, p + 1) = predictors[p][i];
  }
  return x;
}

std::vector<double> holm_bonferroni(std::span<const double> p_values) {
  for (double p : p_values) {
    if (!(p >= 0 && p <= 1)) throw StatsError("p-value outside [0, 1]: " + std::to_string(p));
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> out(m);
  double running = 0;
  for (std::size_t k = 0; k < m; ++k) {
    running = std::max(running, std::min(1.0, double(m - k) * p_values[order[k]]));
    out[order[k]] = running;
  }
  return out;
}

LrtResult lrt(const RegressionFit& reduced, const RegressionFit& full) {
  if (reduced.n != full.n) throw StatsError("LRT fits use different observation counts");
  const int df = full.num_columns - reduced.num_columns;
  if (df <= 0) throw StatsError("LRT needs the full model to have more columns than the reduced one");
  LrtResult r;
  r.df = df;
  r.statistic = std::max(0.0, 2.0 * (full.log_likelihood - reduced.log_likelihood));
  if (std::isnan(r.statistic)) r.statistic = 0;
  r.p_value = special::chi_square_sf(r.statistic, df);
  return r;
}

std::optional<TTestResult> welch_ttest_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) return std::nullopt;
  auto moments = [](std::span<const double> v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / double(v.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  if (va == 0 && vb == 0) return std::nullopt;
  const double sa = va / double(a.size());
  const double sb = vb / double(b.size());
  TTestResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) /
         (sa * sa / double(a.size() - 1) + sb * sb / double(b.size() - 1));
  r.p_value = special::student_t_sf(r.t, r.df);
  return r;
}

std::string granularity_name(Granularity g) {
  switch (g) {
    case Granularity::full: return "full";
    case Granularity::phenomenon: return "phenomenon";
    case Granularity::paradigm: return "paradigm";
  }
  return "unknown";
}

Granularity parse_granularity(const std::string& name) {
  if (name == "full") return Granularity::full;
  if (name == "phenomenon") return Granularity::phenomenon;
  if (name == "paradigm") return Granularity::paradigm;
  throw ValidationError("unknown granularity '" + name + "'");
}

std::string aggregation_name(PredictorAggregation a) {
  return a == PredictorAggregation::pooled ? "pooled" : "paradigm_mean";
}

PredictorAggregation parse_aggregation(const std::string& name) {
  if (name == "paradigm_mean") return PredictorAggregation::paradigm_mean;
  if (name == "pooled") return PredictorAggregation::pooled;
  throw ValidationError("unknown predictor aggregation '" + name + "'");
}

std::optional<double> aggregate_predictor(std::span<const TaggedScore> scores, PredictorAggregation mode) {
  if (scores.empty()) return std::nullopt;
  if (mode == PredictorAggregation::pooled) {
    double s = 0;
    for (const auto& t : scores) s += t.value;
    return s / double(scores.size());
  }
  std::map<std::string, std::pair<double, std::size_t>> per;
  for (const auto& t : scores) {
    auto& [sum, count] = per[t.paradigm];
    sum += t.value;
    ++count;
  }
  double total = 0;
  for (const auto& [name, sc] : per) total += sc.first / double(sc.second);
  return total / double(per.size());
}

namespace {

std::optional<RegressionFit> try_fit(const std::vector<double>& y, std::span<const std::vector<double>> xs,
                                     const std::string& what) {
  try {
    return ols_fit(Eigen::Map<const Eigen::VectorXd>(y.data(), Eigen::Index(y.size())), design_with_intercept(xs));
  } catch (const StatsError& e) {
    log_warning(what + ": " + e.what());
    return std::nullopt;
  }
}

// Corrects one p-value column across rows; rows without a value are skipped.
void correct_column(std::vector<RegressionRow>& rows, bool apply,
                    const std::function<std::optional<double>(const RegressionRow&)>& raw,
                    const std::function<std::optional<double>&(RegressionRow&)>& slot) {
  std::vector<double> ps;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (auto p = raw(rows[i])) {
      ps.push_back(*p);
      idx.push_back(i);
    }
  }
  const auto corrected = apply ? holm_bonferroni(ps) : ps;
  for (std::size_t k = 0; k < idx.size(); ++k) slot(rows[idx[k]]) = corrected[k];
}

}  // namespace

RegressionTable build_regression_table(const std::string& family, Granularity granularity,
                                       std::span<const ModelObservation> observations,
                                       std::span<const std::string> cell_order) {
  RegressionTable table;
  table.family = family;
  table.granularity = granularity;
  for (const auto& cell : cell_order) {
    RegressionRow row;
    row.cell = cell;
    bool all_have_control = true;
    for (const auto& obs : observations) {
      if (obs.cell != cell) continue;
      if (!obs.syntax_score || !obs.accuracy) {
        row.excluded_models.push_back(obs.model_id);
        continue;
      }
      row.models.push_back(obs.model_id);
      row.syntax_x.push_back(*obs.syntax_score);
      row.control_x.push_back(obs.control_score.value_or(0.0));
      row.y.push_back(*obs.accuracy);
      all_have_control = all_have_control && obs.control_score.has_value();
    }
    if (!row.excluded_models.empty()) {
      std::string names;
      for (const auto& m : row.excluded_models) names += (names.empty() ? "" : ", ") + m;
      log_warning(family + "/" + cell + ": excluding models with incomplete rows: " + names);
    }
    row.n = row.y.size();
    if (!all_have_control) row.control_x.clear();
    if (row.n < 3) {
      row.status = "insufficient-data";
      table.rows.push_back(std::move(row));
      continue;
    }
    const std::string what = family + "/" + cell;
    const std::vector<std::vector<double>> simple_x{row.syntax_x};
    row.simple = try_fit(row.y, simple_x, what + " simple");
    if (!row.control_x.empty()) {
      const std::vector<std::vector<double>> multi_x{row.syntax_x, row.control_x};
      const std::vector<std::vector<double>> control_x{row.control_x};
      row.multiple = try_fit(row.y, multi_x, what + " multiple");
      row.control = try_fit(row.y, control_x, what + " control");
    }
    if (row.simple && row.multiple) row.lrt = lrt(*row.simple, *row.multiple);
    if (!row.simple) row.status = "insufficient-data";
    table.rows.push_back(std::move(row));
  }

  const bool correct = granularity != Granularity::full;
  correct_column(
      table.rows, correct,
      [](const RegressionRow& r) { return r.simple ? std::optional(r.simple->p_values(1)) : std::nullopt; },
      [](RegressionRow& r) -> std::optional<double>& { return r.simple_p; });
  correct_column(
      table.rows, correct,
      [](const RegressionRow& r) { return r.multiple ? std::optional(r.multiple->p_values(1)) : std::nullopt; },
      [](RegressionRow& r) -> std::optional<double>& { return r.multiple_p; });
  correct_column(
      table.rows, correct,
      [](const RegressionRow& r) { return r.control ? std::optional(r.control->p_values(1)) : std::nullopt; },
      [](RegressionRow& r) -> std::optional<double>& { return r.control_p; });
  correct_column(
      table.rows, correct, [](const RegressionRow& r) { return r.lrt ? std::optional(r.lrt->p_value) : std::nullopt; },
      [](RegressionRow& r) -> std::optional<double>& { return r.lrt_p; });
  return table;
}

std::string format_stat(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string format_stat(const std::optional<double>& v) { return v ? format_stat(*v) : ""; }

std::string RegressionTable::to_csv() const {
  std::ostringstream out;
  out << "family,granularity,cell,n,status,"
         "simple_beta1,simple_p,simple_p_raw,simple_adj_r2,"
         "multiple_beta1,multiple_p,multiple_p_raw,multiple_adj_r2,"
         "lrt_stat,lrt_p,lrt_p_raw,"
         "control_beta1,control_p,control_p_raw,control_adj_r2\n";
  auto fit_cols = [](const std::optional<RegressionFit>& f, const std::optional<double>& corrected) {
    if (!f) return std::string(",,,");
    return format_stat(f->coefficients(1)) + "," + format_stat(corrected) + "," + format_stat(f->p_values(1)) + "," +
           format_stat(f->adj_r2);
  };
  for (const auto& r : rows) {
    out << family << ',' << granularity_name(granularity) << ',' << r.cell << ',' << r.n << ',' << r.status << ','
        << fit_cols(r.simple, r.simple_p) << ',' << fit_cols(r.multiple, r.multiple_p) << ',';
    if (r.lrt) {
      out << format_stat(r.lrt->statistic) << ',' << format_stat(r.lrt_p) << ',' << format_stat(r.lrt->p_value);
    } else {
      out << ",,";
    }
    out << ',' << fit_cols(r.control, r.control_p) << '\n';
  }
  return out.str();
}

std::string RegressionTable::to_json() const {
  nlohmann::ordered_json j;
  j["family"] = family;
  j["granularity"] = granularity_name(granularity);
  j["rows"] = nlohmann::ordered_json::array();
  auto fit_json = [](const std::optional<RegressionFit>& f, const std::optional<double>& corrected) {
    nlohmann::ordered_json o;
    if (!f) return nlohmann::ordered_json(nullptr);
    o["beta0"] = format_stat(f->coefficients(0));
    o["beta1"] = format_stat(f->coefficients(1));
    if (f->coefficients.size() > 2) o["beta2"] = format_stat(f->coefficients(2));
    o["se_beta1"] = format_stat(f->standard_errors(1));
    o["t_beta1"] = format_stat(f->t_stats(1));
    o["p_beta1"] = format_stat(corrected);
    o["p_beta1_raw"] = format_stat(f->p_values(1));
    o["r2"] = format_stat(f->r2);
    o["adj_r2"] = format_stat(f->adj_r2);
    o["log_likelihood"] = format_stat(f->log_likelihood);
    return o;
  };
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row["cell"] = r.cell;
    row["n"] = r.n;
    row["status"] = r.status;
    row["models"] = r.models;
    row["excluded_models"] = r.excluded_models;
    row["simple"] = fit_json(r.simple, r.simple_p);
    row["multiple"] = fit_json(r.multiple, r.multiple_p);
    row["control"] = fit_json(r.control, r.control_p);
    if (r.lrt) {
      row["lrt"] = {{"statistic", format_stat(r.lrt->statistic)},
                    {"df", r.lrt->df},
                    {"p", format_stat(r.lrt_p)},
                    {"p_raw", format_stat(r.lrt->p_value)}};
    } else {
      row["lrt"] = nullptr;
    }
    j["rows"].push_back(std::move(row));
  }
  return j.dump(2);
}

}  // namespace synprobe
