#include "mfscale/csv.hpp"
#include "mfscale/errors.hpp"
#include "mfscale/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mfscale {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;
const char* kColors[] = {"#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#8d6a9f", "#30343f"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

struct Axes {
  double lo_exp, hi_exp;  // log10 bounds of the y axis

  double x(double composition) const { return kLeft + composition * (kWidth - kLeft - kRight); }
  double y(double value) const {
    double t = (std::log10(value) - lo_exp) / (hi_exp - lo_exp);
    return kHeight - kBottom - t * (kHeight - kTop - kBottom);
  }
};

}  // namespace

std::string plot_svg(std::span<const RunRecord> records, ErrorField f) {
  const auto cells = aggregate_runs(records);
  if (cells.empty()) throw ContractError("plot: no successful sweep cells");
  const auto base = baseline_error(records, f);

  double lo = INFINITY, hi = 0.0;
  auto include = [&](double v) {
    if (v > 0.0 && std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (const auto& c : cells) {
    include(c.mean(f));
    include(c.mean(f) + c.std(f));
    include(c.mean(f) - c.std(f));
  }
  if (base) include(base->first);
  if (!(hi > 0.0)) {
    lo = 1e-3;
    hi = 1.0;
  }
  Axes ax{std::floor(std::log10(lo)), std::ceil(std::log10(hi))};
  if (ax.hi_exp <= ax.lo_exp) ax.hi_exp = ax.lo_exp + 1;
  const double floor_value = std::pow(10.0, ax.lo_exp);
  auto yv = [&](double v) { return ax.y(std::max(v, floor_value)); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<!-- data\nfield,budget,composition,mean,std,n_seeds\n";
  for (const auto& c : cells)
    s += std::string(to_string(f)) + "," + format_double(c.budget) + "," + format_double(c.composition) + "," +
         format_double(c.mean(f)) + "," + format_double(c.std(f)) + "," + std::to_string(c.n_seeds) + "\n";
  if (base) s += "baseline,,1," + format_double(base->first) + "," + format_double(base->second) + ",\n";
  s += "-->\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kLeft) + "\" y=\"22\" font-size=\"14\">Test MSE of normalized " +
       std::string(to_string(f)) + "</text>\n";

  // axes and decade grid
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) +
       "\" stroke=\"black\"/>\n";
  for (double e = ax.lo_exp; e <= ax.hi_exp + 0.5; e += 1.0) {
    double y = ax.y(std::pow(10.0, e));
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y) +
         "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + num(x0 - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">1e" +
         std::to_string(static_cast<int>(e)) + "</text>\n";
  }
  for (int p = 0; p <= 100; p += 25) {
    double x = ax.x(p / 100.0);
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x) + "\" y2=\"" + num(y0 + 5) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(x) + "\" y=\"" + num(y0 + 18) + "\" text-anchor=\"middle\">" + std::to_string(p) +
         "</text>\n";
  }
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 12) +
       "\" text-anchor=\"middle\">high-fidelity composition (%)</text>\n";
  s += "<text transform=\"translate(16 " + num((y0 + y1) / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">mean normalized MSE</text>\n";

  const auto budgets = budgets_of(cells);
  for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
    const char* color = kColors[bi % std::size(kColors)];
    std::string pts;
    for (const auto& c : cells) {
      if (c.budget != budgets[bi]) continue;
      const double x = ax.x(c.composition);
      const double m = c.mean(f), sd = c.std(f);
      pts += num(x) + "," + num(yv(m)) + " ";
      s += "<line x1=\"" + num(x) + "\" y1=\"" + num(yv(m - sd)) + "\" x2=\"" + num(x) + "\" y2=\"" +
           num(yv(m + sd)) + "\" stroke=\"" + color + "\"/>\n";
      s += "<circle cx=\"" + num(x) + "\" cy=\"" + num(yv(m)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    if (!pts.empty()) pts.pop_back();
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(bi);
    s += "<line x1=\"" + num(x1 + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(x1 + 32) + "\" y2=\"" +
         num(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    s += "<text x=\"" + num(x1 + 38) + "\" y=\"" + num(ly) + "\">D_b " + format_double(budgets[bi], 4) +
         "</text>\n";
  }
  if (base) {
    const double y = yv(base->first);
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y) +
         "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(budgets.size());
    s += "<line x1=\"" + num(x1 + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(x1 + 32) + "\" y2=\"" +
         num(ly - 4) + "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
    s += "<text x=\"" + num(x1 + 38) + "\" y=\"" + num(ly) + "\">full high-fi</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& results_file,
                                              const std::filesystem::path& out_dir) {
  const auto records = read_results(results_file);
  if (records.empty()) throw ContractError("emit_plots: results file has no rows");
  // render everything before touching the disk
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  for (auto f : kErrorFields)
    files.emplace_back(out_dir / ("mse_" + std::string(to_string(f)) + ".svg"), plot_svg(records, f));
  std::vector<std::filesystem::path> out;
  for (auto& [path, text] : files) {
    write_file_atomic(path, text);
    out.push_back(path);
  }
  return out;
}

std::vector<AggregateCell> parse_plot_data(std::string_view svg, ErrorField f) {
  auto start = svg.find("<!-- data\n");
  auto end = svg.find("-->", start);
  if (start == std::string_view::npos || end == std::string_view::npos)
    throw ParseError("svg has no data block", 1);
  auto t = parse_csv(svg.substr(start + 10, end - start - 10));
  std::vector<AggregateCell> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    if (r[0] != to_string(f)) continue;
    AggregateCell c;
    c.budget = parse_double(r[1], t.row_lines[i]);
    c.composition = parse_double(r[2], t.row_lines[i]);
    double m = parse_double(r[3], t.row_lines[i]), sd = parse_double(r[4], t.row_lines[i]);
    (f == ErrorField::U ? c.mean_u : c.mean_tau) = m;
    (f == ErrorField::U ? c.std_u : c.std_tau) = sd;
    c.n_seeds = static_cast<std::size_t>(parse_int(r[5], t.row_lines[i]));
    out.push_back(c);
  }
  return out;
}

}  // namespace mfscale
