#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mfscale {

enum class ErrorField { U, Tau };

inline constexpr ErrorField kErrorFields[] = {ErrorField::U, ErrorField::Tau};

std::string_view to_string(ErrorField f);

inline constexpr std::string_view kBaselineMode = "baseline";
inline constexpr std::string_view kResultsHeader =
    "budget_db,composition_dc,mode,seed,n_low,n_high,total_cost,mse_u,mse_tau,epochs_run,status";

struct RunRecord {
  double budget_db = 0.0;
  double composition_dc = 0.0;
  std::string mode = "budget_share";
  std::uint64_t seed = 0;
  std::size_t n_low = 0;
  std::size_t n_high = 0;
  double total_cost = 0.0;
  double mse_u = 0.0;
  double mse_tau = 0.0;
  int epochs_run = 0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
  bool baseline() const { return mode == kBaselineMode; }
  double error(ErrorField f) const { return f == ErrorField::U ? mse_u : mse_tau; }
};

// Sort order of the results file: (budget, composition, seed, mode).
bool record_less(const RunRecord& a, const RunRecord& b);

std::string record_csv_line(const RunRecord& r);
RunRecord parse_record(const std::vector<std::string>& fields, long line);
std::string results_csv(std::vector<RunRecord> records);
std::vector<RunRecord> parse_results(std::string_view text);
std::vector<RunRecord> read_results(const std::filesystem::path& path);

struct AggregateCell {
  double budget = 0.0;
  double composition = 0.0;
  double mean_u = 0.0, std_u = 0.0;
  double mean_tau = 0.0, std_tau = 0.0;
  std::size_t n_seeds = 0;

  double mean(ErrorField f) const { return f == ErrorField::U ? mean_u : mean_tau; }
  double std(ErrorField f) const { return f == ErrorField::U ? std_u : std_tau; }
};

// Groups successful non-baseline records by (budget, composition); population std.
std::vector<AggregateCell> aggregate_runs(std::span<const RunRecord> records);

// Mean and population std of the successful baseline rows, if any.
std::optional<std::pair<double, double>> baseline_error(std::span<const RunRecord> records, ErrorField f);

struct ScalingFit {
  double a = 0.0;
  double alpha = 0.0;
  double l_inf = 0.0;
  // sum of squared relative errors (pred - L)/L
  double residual = 0.0;
  bool fit_ok = false;
  std::string warning;

  double operator()(double budget) const;
};

inline constexpr double kMinAlpha = 1e-6;

// L(D) = a D^-alpha + l_inf by damped Gauss-Newton from a grid of starts.
ScalingFit fit_power_law(std::span<const std::pair<double, double>> points);
// Same with l_inf held at 0.
ScalingFit fit_pure_power_law(std::span<const std::pair<double, double>> points);

struct OptimalComposition {
  double best_dc = 0.0;
  double best_mean = 0.0;
};

OptimalComposition optimal_composition(std::span<const AggregateCell> cells, double budget, ErrorField f);

// True iff some dc < 1 beats the dc = 1 mean by more than one standard
// error (std/sqrt(n)) of the dc = 1 cell.
bool detect_positive_transfer(std::span<const AggregateCell> cells, ErrorField f, double budget);

struct TransferVerdict {
  ErrorField field = ErrorField::U;
  double budget = 0.0;
  bool positive_transfer = false;
  double best_dc = 0.0;
};

std::vector<double> budgets_of(std::span<const AggregateCell> cells);
std::vector<TransferVerdict> transfer_verdicts(std::span<const AggregateCell> cells);

struct AnalysisOutput {
  std::vector<AggregateCell> cells;
  // per field, per composition: fit of mean error over budgets
  struct FitRow {
    ErrorField field;
    double composition;
    ScalingFit fit;
  };
  std::vector<FitRow> fits;
  std::vector<TransferVerdict> verdicts;
};

AnalysisOutput analyze(std::span<const RunRecord> records);

// budget,composition,field,mean,std,n_seeds
std::string cells_csv(std::span<const AggregateCell> cells);
// field,composition,a,alpha,l_inf,residual,fit_ok,warning
std::string fits_csv(const AnalysisOutput& a);
// field,budget,positive_transfer,best_dc
std::string verdicts_csv(std::span<const TransferVerdict> v);
std::string summary_text(const AnalysisOutput& a, std::span<const RunRecord> records);

}  // namespace mfscale
