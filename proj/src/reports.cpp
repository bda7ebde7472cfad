#include "reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace influence_gate::reports {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), width_(header.size()) {
  if (!out_) throw Error("cannot write " + path);
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw Error("csv row width mismatch");
  for (size_t j = 0; j < cells.size(); ++j) {
    if (j) out_ << ',';
    const std::string& c = cells[j];
    if (c.find_first_of(",\"\n") != std::string::npos) {
      out_ << '"';
      for (char ch : c) out_ << (ch == '"' ? "\"\"" : std::string(1, ch));
      out_ << '"';
    } else {
      out_ << c;
    }
  }
  out_ << '\n';
}

void write_json(const std::string& path, nlohmann::json doc, const std::string& kind) {
  doc["schema_version"] = kSchemaVersion;
  doc["report"] = kind;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

nlohmann::json report_json(const MomentIndexReport& rep) {
  return {{"r_a", jnum(rep.r_a)},         {"r_b", jnum(rep.r_b)},
          {"r_c", jnum(rep.r_c)},         {"r_star", jnum(rep.r_star)},
          {"binding", to_string(rep.binding)}, {"capped", rep.capped},
          {"note", rep.note}};
}

namespace {

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<Series>& series) {
  const double W = 640, H = 440, L = 70, R = 20, T = 40, B = 60;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) { x0 -= 1; x1 += 1; }
  if (!(y1 > y0)) { y0 -= 1; y1 += 1; }
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << esc(title) << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    double xv = x0 + t * (x1 - x0) / 4, yv = y0 + t * (y1 - y0) / 4;
    char bx[32], by[32];
    std::snprintf(bx, sizeof bx, "%.3g", xv);
    std::snprintf(by, sizeof by, "%.3g", yv);
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << bx
        << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << by
        << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">"
      << esc(xlabel) << "</text>\n";
  out << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << esc(ylabel) << "</text>\n";

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  for (size_t s = 0; s < series.size(); ++s) {
    const char* col = colors[s % 6];
    const auto& sr = series[s];
    if (sr.points) {
      for (size_t i = 0; i < sr.x.size(); ++i)
        if (std::isfinite(sr.x[i]) && std::isfinite(sr.y[i]))
          out << "<circle cx=\"" << px(sr.x[i]) << "\" cy=\"" << py(sr.y[i]) << "\" r=\"3\" fill=\""
              << col << "\"/>\n";
    } else {
      out << "<polyline fill=\"none\" stroke=\"" << col << "\" points=\"";
      for (size_t i = 0; i < sr.x.size(); ++i)
        if (std::isfinite(sr.x[i]) && std::isfinite(sr.y[i]))
          out << px(sr.x[i]) << ',' << py(sr.y[i]) << ' ';
      out << "\"/>\n";
    }
    out << "<text x=\"" << W - R - 150 << "\" y=\"" << T + 14 * (s + 1) << "\" fill=\"" << col
        << "\">" << esc(sr.label) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace influence_gate::reports
