#pragma once

#include "influence_gate/core_model.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace influence_gate::reports {

inline constexpr int kSchemaVersion = 1;

// %.17g, with inf / -inf / nan spelled out.
std::string num(double v);

// JSON has no infinity: non-finite values become strings.
nlohmann::json jnum(double v);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  size_t width_;
};

void write_json(const std::string& path, nlohmann::json doc, const std::string& kind);
nlohmann::json report_json(const MomentIndexReport& rep);

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool points = false;  // markers instead of a polyline
};

// Minimal axes + polylines, coordinates already on the plotted scale.
void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<Series>& series);

}  // namespace influence_gate::reports
