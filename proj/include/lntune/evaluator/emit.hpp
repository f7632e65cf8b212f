#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "lntune/evaluator/benchmark.hpp"
#include "lntune/evaluator/experiments.hpp"

namespace lntune {

/// AUROC as a percentage with one decimal, as shown in tables.
inline std::string display_pct(double auroc) {
  if (!std::isfinite(auroc)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * auroc);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
  return out + "\n";
}

inline std::string benchmark_csv(const BenchmarkResult& b) {
  std::string out = join_csv({"dataset", "n_real", "n_fake", "auroc"});
  for (const auto& r : b.reports)
    out += join_csv({r.dataset, std::to_string(r.n_real), std::to_string(r.n_fake), display_pct(r.auroc)});
  out += join_csv({"mean", "", "", display_pct(b.mean_auroc)});
  return out;
}

inline std::string ablation_csv(const AblationTable& t) {
  std::vector<std::string> head{"setup", "components"};
  head.insert(head.end(), t.datasets.begin(), t.datasets.end());
  head.push_back("mean");
  std::string out = join_csv(head);
  for (const auto& r : t.rows) {
    std::vector<std::string> cells{std::to_string(r.setup), r.label};
    for (std::size_t d = 0; d < t.datasets.size(); ++d)
      cells.push_back(r.error.empty() ? display_pct(r.auroc[d]) : "failed");
    cells.push_back(r.error.empty() ? display_pct(r.mean) : "failed");
    out += join_csv(cells);
  }
  return out;
}

/// Per-epoch mean and spread of both conditions.
inline std::string pairing_curves_csv(const PairingResult& r) {
  std::string out = join_csv({"epoch", "condition", "train_mean", "train_spread", "val_mean", "val_spread"});
  for (const auto* c : {&r.paired, &r.unpaired}) {
    const auto tr = c->curve(true), va = c->curve(false);
    for (std::size_t e = 0; e < tr.size(); ++e)
      out += join_csv({std::to_string(e), c == &r.paired ? "paired" : "unpaired", display_pct(tr[e].mean),
                       display_pct(tr[e].spread), display_pct(va[e].mean), display_pct(va[e].spread)});
  }
  return out;
}

inline std::string pairing_summary_csv(const PairingResult& r) {
  std::string out = join_csv({"condition", "best_val_mean", "best_val_spread", "train_minus_val_at_best"});
  out += join_csv({"paired", display_pct(r.paired.best_val_stats().mean), display_pct(r.paired.best_val_stats().spread),
                   display_pct(r.paired.gap_stats().mean)});
  out += join_csv({"unpaired", display_pct(r.unpaired.best_val_stats().mean),
                   display_pct(r.unpaired.best_val_stats().spread), display_pct(r.unpaired.gap_stats().mean)});
  out += join_csv({"paired_minus_unpaired", display_pct(r.best_val_gap()), "", ""});
  return out;
}

/// In-dataset cells carry a trailing '*'.
inline std::string years_csv(const YearsResult& r) {
  std::vector<std::string> head{"model"};
  for (std::size_t k = 0; k < r.test_names.size(); ++k)
    head.push_back(r.test_names[k] + " (" + std::to_string(r.test_years[k]) + ")");
  std::string out = join_csv(head);
  for (std::size_t m = 0; m < r.auroc.size(); ++m) {
    std::vector<std::string> cells{r.train_names[m]};
    for (std::size_t k = 0; k < r.auroc[m].size(); ++k)
      cells.push_back(display_pct(r.auroc[m][k]) + (r.in_dataset[m] == static_cast<int>(k) ? "*" : ""));
    out += join_csv(cells);
  }
  return out;
}

// ---- SVG line plots ----

struct PlotSeries {
  std::string name;
  std::vector<double> y;
  std::vector<double> band;  // optional +/- spread
  std::vector<int> highlight;
};

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

/// Lines over integer x positions, y in AUROC percent.
inline std::string line_plot_svg(const std::string& title, const std::vector<std::string>& x_labels,
                                 const std::vector<PlotSeries>& series, const std::string& y_label = "AUROC (%)") {
  const double W = 640, H = 400, L = 60, R = 160, T = 40, B = 60;
  double lo = 100, hi = 0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      const double b = s.band.empty() ? 0.0 : s.band[i];
      lo = std::min(lo, 100 * (s.y[i] - b));
      hi = std::max(hi, 100 * (s.y[i] + b));
    }
  lo = std::max(0.0, std::floor(lo / 10) * 10);
  hi = std::min(100.0, std::ceil(hi / 10) * 10);
  if (hi <= lo) hi = lo + 10;
  const std::size_t n = std::max<std::size_t>(x_labels.size(), 2);
  auto px = [&](std::size_t i) { return L + (W - L - R) * static_cast<double>(i) / static_cast<double>(n - 1); };
  auto py = [&](double v) { return T + (H - T - B) * (1.0 - (100 * v - lo) / (hi - lo)); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << svg_escape(title) << "</text>\n";
  for (double v = lo; v <= hi + 1e-9; v += 10) {
    o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(v / 100) << "\" y2=\"" << py(v / 100)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(v / 100) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  for (std::size_t i = 0; i < x_labels.size(); ++i)
    o << "<text x=\"" << px(i) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << svg_escape(x_labels[i])
      << "</text>\n";
  o << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2 << ")\" text-anchor=\"middle\">"
    << svg_escape(y_label) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const char* col = colors[s % 8];
    if (!ser.band.empty()) {
      o << "<polygon fill=\"" << col << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < ser.y.size(); ++i) o << px(i) << "," << py(ser.y[i] + ser.band[i]) << " ";
      for (std::size_t i = ser.y.size(); i-- > 0;) o << px(i) << "," << py(ser.y[i] - ser.band[i]) << " ";
      o << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ser.y.size(); ++i) o << px(i) << "," << py(ser.y[i]) << " ";
    o << "\"/>\n";
    for (int h : ser.highlight)
      if (h >= 0 && static_cast<std::size_t>(h) < ser.y.size())
        o << "<circle cx=\"" << px(static_cast<std::size_t>(h)) << "\" cy=\"" << py(ser.y[static_cast<std::size_t>(h)])
          << "\" r=\"7\" fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    o << "<line x1=\"" << W - R + 15 << "\" x2=\"" << W - R + 35 << "\" y1=\"" << T + 20 * s + 10 << "\" y2=\""
      << T + 20 * s + 10 << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 40 << "\" y=\"" << T + 20 * s + 14 << "\">" << svg_escape(ser.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline std::string pairing_svg(const PairingResult& r) {
  std::vector<PlotSeries> series;
  for (const auto* c : {&r.paired, &r.unpaired}) {
    const std::string name = c == &r.paired ? "paired" : "unpaired";
    for (bool train : {true, false}) {
      PlotSeries s;
      s.name = name + (train ? " train" : " val");
      for (const auto& m : c->curve(train)) {
        s.y.push_back(m.mean);
        s.band.push_back(m.spread);
      }
      series.push_back(std::move(s));
    }
  }
  std::vector<std::string> xs;
  if (!series.empty())
    for (std::size_t e = 0; e < series.front().y.size(); ++e) xs.push_back(std::to_string(e + 1));
  return line_plot_svg("Paired vs unpaired training (mean over " + std::to_string(r.trials) + " trials)", xs, series);
}

inline std::string years_svg(const YearsResult& r) {
  std::vector<PlotSeries> series;
  for (std::size_t m = 0; m < r.auroc.size(); ++m)
    series.push_back({r.train_names[m], r.auroc[m], {}, {r.in_dataset[m]}});
  std::vector<std::string> xs;
  for (std::size_t k = 0; k < r.test_names.size(); ++k) xs.push_back(r.test_names[k] + " " + std::to_string(r.test_years[k]));
  return line_plot_svg("AUROC by test set year (circles: in-dataset)", xs, series);
}

/// Display table for any machine-readable artifact written by the toolkit.
inline std::string render_report(const Json& j) {
  const std::string kind = j.value("kind", std::string());
  if (kind == "benchmark") return benchmark_csv(benchmark_from_json(j));
  if (kind == "eval_report") {
    BenchmarkResult b;
    b.reports.push_back(report_from_json(j));
    b.mean_auroc = b.reports.front().auroc;
    return benchmark_csv(b);
  }
  if (kind == "ablation") {
    AblationTable t;
    t.datasets = j.at("datasets").get<std::vector<std::string>>();
    for (const auto& x : j.at("rows")) {
      AblationRow r;
      r.setup = x.at("setup").get<int>();
      r.label = x.at("label").get<std::string>();
      r.auroc = x.at("auroc").get<std::vector<double>>();
      if (!x.at("error").is_null()) r.error = x["error"].get<std::string>();
      if (!x.at("mean").is_null()) r.mean = x["mean"].get<double>();
      t.rows.push_back(std::move(r));
    }
    return ablation_csv(t);
  }
  if (kind == "pairing") {
    PairingResult r;
    r.trials = j.at("trials").get<int>();
    for (auto [key, c] : {std::pair{"paired", &r.paired}, std::pair{"unpaired", &r.unpaired}}) {
      const auto& x = j.at(key);
      c->train_auroc = x.at("train_auroc").get<std::vector<std::vector<double>>>();
      c->val_auroc = x.at("val_auroc").get<std::vector<std::vector<double>>>();
      c->best_val = x.at("best_val").get<std::vector<double>>();
      c->best_epoch = x.at("best_epoch").get<std::vector<int>>();
      c->gap_at_best = x.at("gap_at_best").get<std::vector<double>>();
    }
    return pairing_summary_csv(r);
  }
  if (kind == "years") {
    YearsResult r;
    r.train_names = j.at("train").get<std::vector<std::string>>();
    r.train_years = j.at("train_years").get<std::vector<int>>();
    r.test_names = j.at("test").get<std::vector<std::string>>();
    r.test_years = j.at("test_years").get<std::vector<int>>();
    r.auroc = j.at("auroc").get<std::vector<std::vector<double>>>();
    r.in_dataset = j.at("in_dataset").get<std::vector<int>>();
    return years_csv(r);
  }
  throw ConfigError("report: unrecognized artifact kind '" + kind + "'");
}

}  // namespace lntune
