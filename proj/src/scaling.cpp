#include "mfscale/scaling.hpp"

#include "mfscale/csv.hpp"
#include "mfscale/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace mfscale {

std::string_view to_string(ErrorField f) { return f == ErrorField::U ? "u" : "tau_w"; }

bool record_less(const RunRecord& a, const RunRecord& b) {
  if (a.budget_db != b.budget_db) return a.budget_db < b.budget_db;
  if (a.composition_dc != b.composition_dc) return a.composition_dc < b.composition_dc;
  if (a.seed != b.seed) return a.seed < b.seed;
  return a.mode < b.mode;
}

namespace {

std::string sanitize(std::string s) {
  for (auto& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ch == ',' ? ';' : ' ';
  return s;
}

}  // namespace

std::string record_csv_line(const RunRecord& r) {
  return join_csv({format_double(r.budget_db), format_double(r.composition_dc), r.mode, std::to_string(r.seed),
                   std::to_string(r.n_low), std::to_string(r.n_high), format_double(r.total_cost),
                   format_double(r.mse_u), format_double(r.mse_tau), std::to_string(r.epochs_run),
                   sanitize(r.status)});
}

RunRecord parse_record(const std::vector<std::string>& f, long line) {
  if (f.size() != 11) throw ParseError("results row needs 11 fields", line);
  RunRecord r;
  r.budget_db = parse_double(f[0], line);
  r.composition_dc = parse_double(f[1], line);
  r.mode = f[2];
  r.seed = static_cast<std::uint64_t>(parse_int(f[3], line));
  r.n_low = static_cast<std::size_t>(parse_int(f[4], line));
  r.n_high = static_cast<std::size_t>(parse_int(f[5], line));
  r.total_cost = parse_double(f[6], line);
  r.mse_u = parse_double(f[7], line);
  r.mse_tau = parse_double(f[8], line);
  r.epochs_run = static_cast<int>(parse_int(f[9], line));
  r.status = f[10];
  return r;
}

std::string results_csv(std::vector<RunRecord> records) {
  std::stable_sort(records.begin(), records.end(), record_less);
  std::string out(kResultsHeader);
  out += '\n';
  for (const auto& r : records) out += record_csv_line(r) + '\n';
  return out;
}

std::vector<RunRecord> parse_results(std::string_view text) {
  auto t = parse_csv(text);
  if (join_csv(t.header) != kResultsHeader) throw ParseError("unexpected results header", 1);
  std::vector<RunRecord> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) out.push_back(parse_record(t.rows[i], t.row_lines[i]));
  return out;
}

std::vector<RunRecord> read_results(const std::filesystem::path& path) { return parse_results(read_file(path)); }

std::vector<AggregateCell> aggregate_runs(std::span<const RunRecord> records) {
  if (records.empty()) throw ContractError("aggregate_runs: no records");
  std::map<std::pair<double, double>, std::vector<const RunRecord*>> groups;
  for (const auto& r : records)
    if (r.ok() && !r.baseline()) groups[{r.budget_db, r.composition_dc}].push_back(&r);
  std::vector<AggregateCell> out;
  for (auto& [key, rs] : groups) {
    // order-independent sums
    std::sort(rs.begin(), rs.end(), [](const RunRecord* a, const RunRecord* b) {
      if (a->mse_u != b->mse_u) return a->mse_u < b->mse_u;
      return a->mse_tau < b->mse_tau;
    });
    AggregateCell c;
    c.budget = key.first;
    c.composition = key.second;
    c.n_seeds = rs.size();
    const double n = static_cast<double>(rs.size());
    for (auto f : kErrorFields) {
      std::vector<double> v;
      for (auto* r : rs) v.push_back(r->error(f));
      std::sort(v.begin(), v.end());
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= n;
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      double sd = std::sqrt(var / n);
      (f == ErrorField::U ? c.mean_u : c.mean_tau) = mean;
      (f == ErrorField::U ? c.std_u : c.std_tau) = sd;
    }
    out.push_back(c);
  }
  return out;
}

std::optional<std::pair<double, double>> baseline_error(std::span<const RunRecord> records, ErrorField f) {
  std::vector<double> v;
  for (const auto& r : records)
    if (r.ok() && r.baseline()) v.push_back(r.error(f));
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::pair(mean, std::sqrt(var / static_cast<double>(v.size())));
}

double ScalingFit::operator()(double d) const { return a * std::pow(d, -alpha) + l_inf; }

namespace {

// Budgets are scaled by their geometric mean and errors by their largest
// magnitude before fitting; parameters are mapped back at the end.
struct Problem {
  Eigen::ArrayXd x;  // scaled budgets
  Eigen::ArrayXd y;  // scaled errors
  Eigen::ArrayXd w;  // 1/|y|
  double x_ref = 1.0;
  double y_ref = 1.0;
};

Problem make_problem(std::span<const std::pair<double, double>> pts) {
  Problem p;
  const auto n = static_cast<Eigen::Index>(pts.size());
  p.x.resize(n);
  p.y.resize(n);
  double logsum = 0.0, ymax = 0.0;
  for (const auto& [d, l] : pts) {
    logsum += std::log(d);
    ymax = std::max(ymax, std::abs(l));
  }
  p.x_ref = std::exp(logsum / static_cast<double>(n));
  p.y_ref = ymax > 0.0 ? ymax : 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    p.x[i] = pts[static_cast<std::size_t>(i)].first / p.x_ref;
    p.y[i] = pts[static_cast<std::size_t>(i)].second / p.y_ref;
  }
  p.w = 1.0 / p.y.abs().max(1e-12);
  return p;
}

struct Params {
  double a, alpha, l;
};

double objective(const Problem& p, const Params& q) {
  return ((q.a * p.x.pow(-q.alpha) + q.l - p.y) * p.w).square().sum();
}

void project(Params& q, bool fit_floor) {
  q.a = std::max(q.a, 0.0);
  q.alpha = std::clamp(q.alpha, kMinAlpha, 20.0);
  q.l = fit_floor ? std::max(q.l, 0.0) : 0.0;
}

// Levenberg-Marquardt with Marquardt diagonal scaling and box projection.
Params levenberg_marquardt(const Problem& p, Params q, bool fit_floor) {
  project(q, fit_floor);
  double cost = objective(p, q);
  double lambda = 1e-3;
  const Eigen::Index n = p.x.size();
  const int np = fit_floor ? 3 : 2;
  for (int it = 0; it < 500; ++it) {
    const Eigen::ArrayXd xa = p.x.pow(-q.alpha);
    const Eigen::VectorXd r = ((q.a * xa + q.l - p.y) * p.w).matrix();
    Eigen::MatrixXd J(n, np);
    J.col(0) = (xa * p.w).matrix();
    J.col(1) = (-q.a * xa * p.x.log() * p.w).matrix();
    if (fit_floor) J.col(2) = p.w.matrix();
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool improved = false;
    for (int k = 0; k < 40; ++k) {
      Eigen::MatrixXd A = JtJ;
      for (int i = 0; i < np; ++i) A(i, i) += lambda * (JtJ(i, i) + 1e-12);
      Eigen::VectorXd step = A.ldlt().solve(-g);
      Params t{q.a + step[0], q.alpha + step[1], fit_floor ? q.l + step[2] : 0.0};
      project(t, fit_floor);
      double c = objective(p, t);
      if (std::isfinite(c) && c < cost) {
        const double rel = (cost - c) / std::max(cost, 1e-300);
        q = t;
        cost = c;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        if (rel < 1e-15 || cost < 1e-30) return q;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e16) break;
    }
    if (!improved) break;
  }
  return q;
}

// Best a (and optionally l) for a fixed alpha: weighted least squares with a, l >= 0.
Params linear_start(const Problem& p, double alpha, double l) {
  const Eigen::ArrayXd xa = p.x.pow(-alpha);
  const Eigen::ArrayXd w2 = p.w.square();
  double a = ((p.y - l) * xa * w2).sum() / (xa * xa * w2).sum();
  if (!(a > 0.0)) a = 1e-6;
  return {a, alpha, l};
}

ScalingFit finish(const Problem& p, const Params& q, double cost) {
  ScalingFit f;
  f.alpha = q.alpha;
  f.a = q.a * p.y_ref * std::pow(p.x_ref, q.alpha);
  f.l_inf = q.l * p.y_ref;
  f.residual = cost;
  f.fit_ok = f.a > 0.0 && f.alpha > 0.0 && f.l_inf >= 0.0;
  if (!f.fit_ok) f.warning = "no decreasing trend";
  return f;
}

std::size_t distinct_budgets(std::span<const std::pair<double, double>> pts) {
  std::vector<double> b;
  for (const auto& pt : pts) b.push_back(pt.first);
  std::sort(b.begin(), b.end());
  return static_cast<std::size_t>(std::unique(b.begin(), b.end()) - b.begin());
}

const double kAlphaGrid[] = {0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
const double kFloorGrid[] = {0.0, 0.25, 0.5, 0.75, 0.95};

std::optional<ScalingFit> precheck(std::span<const std::pair<double, double>> pts) {
  for (const auto& [d, l] : pts)
    if (!(d > 0.0) || !std::isfinite(d) || !std::isfinite(l))
      throw DomainError("fit_power_law: budgets must be positive and errors finite");
  ScalingFit f;
  if (distinct_budgets(pts) < 4) {
    f.residual = std::numeric_limits<double>::quiet_NaN();
    f.warning = "fewer than 4 distinct budgets";
    return f;
  }
  double lo = pts[0].second, hi = pts[0].second;
  for (const auto& pt : pts) {
    lo = std::min(lo, pt.second);
    hi = std::max(hi, pt.second);
  }
  if (hi - lo <= 1e-12 * std::max(std::abs(hi), std::abs(lo))) {
    f.a = 0.0;
    f.alpha = kMinAlpha;
    f.l_inf = std::max(lo, 0.0);
    f.residual = 0.0;
    f.fit_ok = true;
    f.warning = "constant errors; curve is flat";
    return f;
  }
  return std::nullopt;
}

std::pair<Params, double> best_pure(const Problem& p) {
  Params best{0, 1, 0};
  double best_cost = std::numeric_limits<double>::infinity();
  for (double alpha : kAlphaGrid) {
    Params q = levenberg_marquardt(p, linear_start(p, alpha, 0.0), false);
    double c = objective(p, q);
    if (c < best_cost) {
      best_cost = c;
      best = q;
    }
  }
  return {best, best_cost};
}

}  // namespace

ScalingFit fit_pure_power_law(std::span<const std::pair<double, double>> pts) {
  if (auto f = precheck(pts)) return *f;
  const Problem p = make_problem(pts);
  auto [q, c] = best_pure(p);
  return finish(p, q, c);
}

ScalingFit fit_power_law(std::span<const std::pair<double, double>> pts) {
  if (auto f = precheck(pts)) return *f;
  const Problem p = make_problem(pts);
  const double ymin = p.y.minCoeff();
  // the pure power law is a feasible point, so start the comparison there
  auto [best, best_cost] = best_pure(p);
  for (double alpha : kAlphaGrid) {
    for (double frac : kFloorGrid) {
      const double l = std::max(0.0, frac * ymin);
      Params q = levenberg_marquardt(p, linear_start(p, alpha, l), true);
      double c = objective(p, q);
      if (c < best_cost) {
        best_cost = c;
        best = q;
      }
    }
  }
  return finish(p, best, best_cost);
}

OptimalComposition optimal_composition(std::span<const AggregateCell> cells, double budget, ErrorField f) {
  std::vector<const AggregateCell*> row;
  for (const auto& c : cells)
    if (c.budget == budget) row.push_back(&c);
  if (row.empty()) throw ContractError("optimal_composition: no cells at budget " + format_double(budget));
  std::sort(row.begin(), row.end(),
            [](const AggregateCell* a, const AggregateCell* b) { return a->composition < b->composition; });
  const AggregateCell* best = row.front();
  for (auto* c : row)
    if (c->mean(f) < best->mean(f)) best = c;
  return {best->composition, best->mean(f)};
}

bool detect_positive_transfer(std::span<const AggregateCell> cells, ErrorField f, double budget) {
  const AggregateCell* base = nullptr;
  for (const auto& c : cells)
    if (c.budget == budget && c.composition == 1.0) base = &c;
  if (!base) throw ContractError("detect_positive_transfer: no dc=1.0 cell at budget " + format_double(budget));
  const double se = base->std(f) / std::sqrt(static_cast<double>(std::max<std::size_t>(base->n_seeds, 1)));
  const double threshold = base->mean(f) - se;
  for (const auto& c : cells)
    if (c.budget == budget && c.composition < 1.0 && c.mean(f) < threshold) return true;
  return false;
}

std::vector<double> budgets_of(std::span<const AggregateCell> cells) {
  std::vector<double> b;
  for (const auto& c : cells) b.push_back(c.budget);
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  return b;
}

std::vector<TransferVerdict> transfer_verdicts(std::span<const AggregateCell> cells) {
  std::vector<TransferVerdict> out;
  for (auto f : kErrorFields) {
    for (double b : budgets_of(cells)) {
      TransferVerdict v;
      v.field = f;
      v.budget = b;
      v.best_dc = optimal_composition(cells, b, f).best_dc;
      bool has_base = std::any_of(cells.begin(), cells.end(),
                                  [&](const AggregateCell& c) { return c.budget == b && c.composition == 1.0; });
      v.positive_transfer = has_base && detect_positive_transfer(cells, f, b);
      out.push_back(v);
    }
  }
  return out;
}

AnalysisOutput analyze(std::span<const RunRecord> records) {
  AnalysisOutput out;
  out.cells = aggregate_runs(records);
  std::vector<double> comps;
  for (const auto& c : out.cells) comps.push_back(c.composition);
  std::sort(comps.begin(), comps.end());
  comps.erase(std::unique(comps.begin(), comps.end()), comps.end());
  for (auto f : kErrorFields) {
    for (double dc : comps) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& c : out.cells)
        if (c.composition == dc) pts.emplace_back(c.budget, c.mean(f));
      out.fits.push_back({f, dc, fit_power_law(pts)});
    }
  }
  out.verdicts = transfer_verdicts(out.cells);
  return out;
}

std::string cells_csv(std::span<const AggregateCell> cells) {
  std::string out = "budget,composition,field,mean,std,n_seeds\n";
  for (auto f : kErrorFields)
    for (const auto& c : cells)
      out += join_csv({format_double(c.budget), format_double(c.composition), std::string(to_string(f)),
                       format_double(c.mean(f)), format_double(c.std(f)), std::to_string(c.n_seeds)}) +
             '\n';
  return out;
}

std::string fits_csv(const AnalysisOutput& a) {
  std::string out = "field,composition,a,alpha,l_inf,residual,fit_ok,warning\n";
  for (const auto& r : a.fits)
    out += join_csv({std::string(to_string(r.field)), format_double(r.composition), format_double(r.fit.a),
                     format_double(r.fit.alpha), format_double(r.fit.l_inf), format_double(r.fit.residual),
                     r.fit.fit_ok ? "1" : "0", sanitize(r.fit.warning)}) +
           '\n';
  return out;
}

std::string verdicts_csv(std::span<const TransferVerdict> v) {
  std::string out = "field,budget,positive_transfer,best_dc\n";
  for (const auto& t : v)
    out += join_csv({std::string(to_string(t.field)), format_double(t.budget), t.positive_transfer ? "1" : "0",
                     format_double(t.best_dc)}) +
           '\n';
  return out;
}

std::string summary_text(const AnalysisOutput& a, std::span<const RunRecord> records) {
  std::ostringstream os;
  std::size_t failed = 0;
  for (const auto& r : records) failed += !r.ok();
  os << "runs: " << records.size() << " (" << failed << " failed)\n";
  os << "cells: " << a.cells.size() << "\n\n";
  for (auto f : kErrorFields) {
    os << "field " << to_string(f) << "\n";
    if (auto b = baseline_error(records, f))
      os << "  full high-fidelity baseline: " << format_double(b->first, 6) << "\n";
    for (const auto& v : a.verdicts) {
      if (v.field != f) continue;
      os << "  budget " << format_double(v.budget, 8) << ": best dc " << format_double(v.best_dc, 4)
         << ", positive transfer " << (v.positive_transfer ? "yes" : "no") << "\n";
    }
    for (const auto& r : a.fits) {
      if (r.field != f) continue;
      os << "  dc " << format_double(r.composition, 4) << ": ";
      if (r.fit.fit_ok)
        os << "L = " << format_double(r.fit.a, 6) << " D^-" << format_double(r.fit.alpha, 4) << " + "
           << format_double(r.fit.l_inf, 6);
      else
        os << "no fit";
      if (!r.fit.warning.empty()) os << " (" << r.fit.warning << ")";
      os << "\n";
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace mfscale
