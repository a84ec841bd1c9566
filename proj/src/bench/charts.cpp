#include "diffpush/bench/charts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace diffpush::bench {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 50, kBottom = 60;
constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* color(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

void header(std::ostringstream& o, const std::string& title, std::uint64_t hash) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\""
    << num(kHeight) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<metadata>config_hash=" << hex_hash(hash) << "</metadata>\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
}

void y_axis(std::ostringstream& o, double lo, double hi, const std::string& label) {
  const double plot_h = kHeight - kTop - kBottom;
  o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft)
    << "\" y2=\"" << num(kHeight - kBottom) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = lo + (hi - lo) * i / 5.0;
    const double y = kHeight - kBottom - plot_h * i / 5.0;
    o << "<line x1=\"" << num(kLeft - 4) << "\" y1=\"" << num(y) << "\" x2=\""
      << num(kWidth - kRight) << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4)
      << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  o << "<text transform=\"translate(18," << num(kTop + plot_h / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(label) << "</text>\n";
}

void legend(std::ostringstream& o, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kTop + 18.0 * static_cast<double>(i);
    o << "<rect x=\"" << num(kWidth - kRight + 12) << "\" y=\"" << num(y) << "\" width=\"12\""
      << " height=\"12\" fill=\"" << color(i) << "\"/>\n";
    o << "<text x=\"" << num(kWidth - kRight + 30) << "\" y=\"" << num(y + 10) << "\">"
      << escape(labels[i]) << "</text>\n";
  }
}

}  // namespace

std::string bar_chart_svg(const ResultTable& table, const std::string& title,
                          std::uint64_t config_hash) {
  std::vector<std::string> methods;
  std::vector<double> ps;
  for (const auto& r : table.rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    if (std::find(ps.begin(), ps.end(), r.p) == ps.end()) {
      ps.push_back(r.p);
    }
  }
  std::ostringstream o;
  header(o, title, config_hash);
  y_axis(o, 0.0, 1.0, "coverage");
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double group_w = ps.empty() ? plot_w : plot_w / static_cast<double>(ps.size());
  const double bar_w = methods.empty() ? 0.0 : group_w * 0.8 / static_cast<double>(methods.size());
  for (std::size_t g = 0; g < ps.size(); ++g) {
    const double gx = kLeft + group_w * static_cast<double>(g);
    o << "<text x=\"" << num(gx + group_w / 2) << "\" y=\"" << num(kHeight - kBottom + 20)
      << "\" text-anchor=\"middle\">P=" << num(ps[g]) << "</text>\n";
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const ResultRow* row = nullptr;
      for (const auto& r : table.rows) {
        if (r.method == methods[m] && r.p == ps[g]) {
          row = &r;
        }
      }
      if (!row) {
        continue;
      }
      const double v = std::clamp(row->coverage_mean, 0.0, 1.0);
      const double x = gx + group_w * 0.1 + bar_w * static_cast<double>(m);
      const double y = kHeight - kBottom - plot_h * v;
      o << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar_w * 0.9)
        << "\" height=\"" << num(plot_h * v) << "\" fill=\"" << color(m) << "\"><title>"
        << escape(row->method) << " " << num(row->coverage_mean) << " ± "
        << num(row->coverage_std) << "</title></rect>\n";
      const double lo = std::clamp(row->coverage_mean - row->coverage_std, 0.0, 1.0);
      const double hi = std::clamp(row->coverage_mean + row->coverage_std, 0.0, 1.0);
      const double cx = x + bar_w * 0.45;
      o << "<line x1=\"" << num(cx) << "\" y1=\"" << num(kHeight - kBottom - plot_h * lo)
        << "\" x2=\"" << num(cx) << "\" y2=\"" << num(kHeight - kBottom - plot_h * hi)
        << "\" stroke=\"black\"/>\n";
    }
  }
  legend(o, methods);
  o << "</svg>\n";
  return o.str();
}

std::string line_chart_svg(const std::vector<Series>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label,
                           std::uint64_t config_hash) {
  double x_lo = INFINITY, x_hi = -INFINITY;
  for (const auto& s : series) {
    for (double x : s.x) {
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
    }
  }
  if (!(x_lo < x_hi)) {
    x_lo = std::isfinite(x_lo) ? x_lo - 1.0 : 0.0;
    x_hi = x_lo + 2.0;
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + plot_w * (x - x_lo) / (x_hi - x_lo); };
  auto py = [&](double y) { return kHeight - kBottom - plot_h * std::clamp(y, 0.0, 1.0); };

  std::ostringstream o;
  header(o, title, config_hash);
  y_axis(o, 0.0, 1.0, y_label);
  o << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kHeight - kBottom) << "\" x2=\""
    << num(kWidth - kRight) << "\" y2=\"" << num(kHeight - kBottom) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = x_lo + (x_hi - x_lo) * i / 5.0;
    o << "<text x=\"" << num(px(v)) << "\" y=\"" << num(kHeight - kBottom + 18)
      << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
  }
  o << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 14)
    << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    labels.push_back(s.label);
    std::string band, line;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      line += (k ? " " : "") + num(px(s.x[k])) + "," + num(py(s.mean[k]));
    }
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      band += num(px(s.x[k])) + "," + num(py(s.mean[k] + s.std[k])) + " ";
    }
    for (std::size_t k = s.x.size(); k-- > 0;) {
      band += num(px(s.x[k])) + "," + num(py(s.mean[k] - s.std[k])) + " ";
    }
    o << "<polygon points=\"" << band << "\" fill=\"" << color(i)
      << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    o << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color(i)
      << "\" stroke-width=\"2\"/>\n";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      o << "<circle cx=\"" << num(px(s.x[k])) << "\" cy=\"" << num(py(s.mean[k]))
        << "\" r=\"3\" fill=\"" << color(i) << "\"/>\n";
    }
  }
  legend(o, labels);
  o << "</svg>\n";
  return o.str();
}

}  // namespace diffpush::bench
