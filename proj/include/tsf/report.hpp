#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tsf/eval.hpp"

namespace tsf {

// epoch,loss rows after a one-line header
void write_loss_curve_csv(const std::string& path,
                          const std::vector<std::pair<int, double>>& curve);

// t,truth,prediction rows over the forecast horizon (absolute sample index)
void write_trace_csv(const std::string& path, const SequencePair& item,
                     const std::vector<double>& forecast);

// single line: "test_err <value> sequences <count>"
void write_summary(const std::string& path, const RunReport& report);
std::string summary_line(const RunReport& report);

// Minimal hand-written SVG line chart: one panel per sequence (at most
// `max_panels`), truth over all 31 samples with the forecast overlaid on the
// horizon.
void write_forecast_svg(const std::string& path, const std::vector<SequencePair>& items,
                        const RunReport& report, int max_panels = 4);

}  // namespace tsf
