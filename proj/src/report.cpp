#include "muwarm/experiments.hpp"
#include "muwarm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <cctype>
#include <map>
#include <sstream>

namespace muwarm {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

// Panels laid out in one row; axes span the finite data range.
std::string render(const std::vector<Panel>& panels) {
  const double w = 420, h = 300, left = 60, right = 15, top = 30, bottom = 45;
  const double legend_h = 14;
  std::size_t max_series = 0;
  for (const auto& p : panels) max_series = std::max(max_series, p.series.size());
  const double total_w = w * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  const double total_h = h + legend_h * static_cast<double>(max_series) + 10;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", total_w) << "\" height=\""
      << fmt("%.0f", total_h) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const Panel& p = panels[pi];
    const double ox = w * static_cast<double>(pi);
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : p.series)
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, s.y[i]);
        y1 = std::max(y1, s.y[i]);
      }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pw = w - left - right, ph = h - top - bottom;
    auto px = [&](double x) { return ox + left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    svg << "<text x=\"" << fmt("%.1f", ox + w / 2) << "\" y=\"18\" text-anchor=\"middle\">" << escape(p.title) << "</text>\n";
    svg << "<rect x=\"" << fmt("%.1f", ox + left) << "\" y=\"" << fmt("%.1f", top) << "\" width=\"" << fmt("%.1f", pw)
        << "\" height=\"" << fmt("%.1f", ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double fx = x0 + (x1 - x0) * t / 4.0, fy = y0 + (y1 - y0) * t / 4.0;
      svg << "<text x=\"" << fmt("%.1f", px(fx)) << "\" y=\"" << fmt("%.1f", top + ph + 14)
          << "\" text-anchor=\"middle\">" << fmt("%.3g", fx) << "</text>\n";
      svg << "<text x=\"" << fmt("%.1f", ox + left - 4) << "\" y=\"" << fmt("%.1f", py(fy) + 4)
          << "\" text-anchor=\"end\">" << fmt("%.3g", fy) << "</text>\n";
    }
    svg << "<text x=\"" << fmt("%.1f", ox + left + pw / 2) << "\" y=\"" << fmt("%.1f", top + ph + 32)
        << "\" text-anchor=\"middle\">" << escape(p.x_label) << "</text>\n";
    svg << "<text transform=\"translate(" << fmt("%.1f", ox + 14) << "," << fmt("%.1f", top + ph / 2)
        << ") rotate(-90)\" text-anchor=\"middle\">" << escape(p.y_label) << "</text>\n";
    for (std::size_t si = 0; si < p.series.size(); ++si) {
      const Series& s = p.series[si];
      const char* color = kPalette[si % std::size(kPalette)];
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      bool first = true;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        svg << (first ? "" : " ") << fmt("%.2f", px(s.x[i])) << "," << fmt("%.2f", py(s.y[i]));
        first = false;
      }
      svg << "\"/>\n";
      const double ly = h + legend_h * static_cast<double>(si);
      svg << "<rect x=\"" << fmt("%.1f", ox + left) << "\" y=\"" << fmt("%.1f", ly) << "\" width=\"10\" height=\"3\" fill=\""
          << color << "\"/>\n";
      svg << "<text x=\"" << fmt("%.1f", ox + left + 14) << "\" y=\"" << fmt("%.1f", ly + 5) << "\">" << escape(s.name)
          << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string describe(const RunOutcome& run) {
  const auto& s = run.spec;
  std::string out = std::string(to_string(s.scheme.name)) + " w" + std::to_string(s.model.d_model) + " lr" +
                    fmt("%g", s.train.learning_rate) + " s" + std::to_string(s.train.seed);
  if (s.warmstart) out += " ws" + fmt("%g", s.warmstart->lambda_shrink);
  return out;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out.empty() ? "unlabeled" : out;
}

}  // namespace

void write_report(const fs::path& lab_dir, const fs::path& report_dir) {
  fs::create_directories(report_dir);
  std::vector<RunOutcome> runs;
  std::vector<std::string> absent;
  std::vector<fs::path> run_dirs;
  if (fs::exists(lab_dir / "runs"))
    for (const auto& entry : fs::directory_iterator(lab_dir / "runs"))
      if (entry.is_directory()) run_dirs.push_back(entry.path());
  std::sort(run_dirs.begin(), run_dirs.end());
  for (const auto& dir : run_dirs) {
    const std::string id = dir.filename().string();
    if (!fs::exists(dir / "result.json")) {
      absent.push_back(id);
      continue;
    }
    RunOutcome run = load_run(dir);
    runs.push_back(std::move(run));
  }

  std::ostringstream md;
  md << "# Run summary\n\n";
  md << "| id | label | config | parent | initial val | final val (smoothed) | tokens | FLOPs | status |\n";
  md << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& run : runs) {
    md << "| " << run.id << " | " << run.spec.label << " | " << describe(run) << " | "
       << (run.spec.parent.empty() ? "-" : run.spec.parent) << " | " << fmt("%.4f", run.initial_val_loss()) << " | "
       << fmt("%.4f", run.final_smoothed_val_loss()) << " | " << run.ledger.tokens << " | " << run.ledger.flops << " | "
       << (run.diverged ? "diverged" : "ok") << " |\n";
  }
  if (!absent.empty()) {
    md << "\nAbsent (incomplete) runs:\n\n";
    for (const auto& id : absent) md << "- " << id << "\n";
  }

  // Loss curves, one figure pair per label.
  std::map<std::string, std::vector<const RunOutcome*>> by_label;
  for (const auto& run : runs) by_label[run.spec.label].push_back(&run);
  if (!by_label.empty()) md << "\n## Loss curves\n\n";
  for (const auto& [label, group] : by_label) {
    Panel flops_panel{label + ": val loss vs FLOPs", "log10 FLOPs", "val loss (smoothed)", {}};
    Panel tokens_panel{label + ": val loss vs tokens", "tokens", "val loss (smoothed)", {}};
    for (const RunOutcome* run : group) {
      std::vector<double> steps, values;
      for (const auto& r : run->records) {
        steps.push_back(static_cast<double>(r.step));
        values.push_back(r.val_loss);
      }
      const auto smooth = gaussian_smooth(steps, values, default_smoothing_sigma(values.size())).smoothed;
      Series sf{describe(*run), {}, smooth}, st{describe(*run), {}, smooth};
      for (const auto& r : run->records) {
        sf.x.push_back(r.flops > 0 ? std::log10(static_cast<double>(r.flops)) : NAN);
        st.x.push_back(static_cast<double>(r.tokens));
      }
      flops_panel.series.push_back(std::move(sf));
      tokens_panel.series.push_back(std::move(st));
    }
    const std::string name = safe_name(label);
    write_file(report_dir / ("loss_" + name + ".svg"), render({flops_panel, tokens_panel}));
    md << "- " << label << ": loss_" << name << ".svg\n";
  }

  // Coordinate checks: one panel per step, log norm against log width per layer.
  std::vector<fs::path> checks;
  if (fs::exists(lab_dir / "coordcheck"))
    for (const auto& entry : fs::directory_iterator(lab_dir / "coordcheck"))
      if (entry.path().extension() == ".json") checks.push_back(entry.path());
  std::sort(checks.begin(), checks.end());
  if (!checks.empty()) md << "\n## Coordinate checks\n\n| check | max abs slope (steps >= 1) | failures |\n|---|---|---|\n";
  for (const auto& path : checks) {
    std::ifstream in(path);
    const auto cc = Json::parse(in).get<CoordCheckResult>();
    std::vector<Panel> panels;
    for (int t = 0; t <= cc.steps; ++t) {
      Panel p{"t = " + std::to_string(t), "log2 width", "log mean |activation|", {}};
      for (const auto& layer : cc.layers) {
        Series s{layer, {}, {}};
        for (std::size_t wi = 0; wi < cc.widths.size(); ++wi) {
          const double v = cc.norms.at(layer).at(static_cast<std::size_t>(t)).at(wi);
          s.x.push_back(std::log2(static_cast<double>(cc.widths[wi])));
          s.y.push_back(v > 0 ? std::log(v) : NAN);
        }
        p.series.push_back(std::move(s));
      }
      panels.push_back(std::move(p));
    }
    const std::string name = "coord_" + path.stem().string() + ".svg";
    write_file(report_dir / name, render(panels));
    md << "| " << path.stem().string() << " (" << name << ") | " << fmt("%.4f", cc.max_abs_slope(1)) << " | "
       << cc.failures.size() << " |\n";
  }
  write_file(report_dir / "summary.md", md.str());
}

}  // namespace muwarm
