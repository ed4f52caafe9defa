#include "tsf/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tsf {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    return out;
}

}  // namespace

void write_loss_curve_csv(const std::string& path,
                          const std::vector<std::pair<int, double>>& curve) {
    std::ofstream out = open_out(path);
    out << "epoch,loss\n";
    for (const auto& [epoch, loss] : curve) {
        out << epoch << "," << format_double(loss) << "\n";
    }
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

void write_trace_csv(const std::string& path, const SequencePair& item,
                     const std::vector<double>& forecast) {
    if (forecast.size() != item.tgt.size()) {
        throw DimensionError("trace: forecast of " + std::to_string(forecast.size()) +
                             " steps against " + std::to_string(item.tgt.size()) + " targets");
    }
    std::ofstream out = open_out(path);
    out << "t,truth,prediction\n";
    for (std::size_t t = 0; t < forecast.size(); ++t) {
        out << (kSrcLen + t) << "," << format_double(item.tgt[t]) << ","
            << format_double(forecast[t]) << "\n";
    }
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

std::string summary_line(const RunReport& report) {
    return "test_err " + format_double(report.test_err) + " sequences " +
           std::to_string(report.per_sequence.size());
}

void write_summary(const std::string& path, const RunReport& report) {
    std::ofstream out = open_out(path);
    out << summary_line(report) << "\n";
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

void write_forecast_svg(const std::string& path, const std::vector<SequencePair>& items,
                        const RunReport& report, int max_panels) {
    const int panels = std::min({max_panels, static_cast<int>(items.size()),
                                 static_cast<int>(report.per_sequence.size())});
    if (panels < 1) {
        throw ContractError("svg: nothing to plot");
    }
    const double pw = 260.0, ph = 200.0, margin = 24.0;
    const double width = panels * (pw + margin) + margin;
    const double height = ph + 2 * margin + 16.0;

    auto px = [&](int panel, double t) {
        return margin + panel * (pw + margin) + t / (kSeqLen - 1) * pw;
    };
    auto py = [&](double y) {
        const double clamped = std::clamp(y, -1.6, 1.6);
        return margin + (1.6 - clamped) / 3.2 * ph;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (int p = 0; p < panels; ++p) {
        const SequencePair& item = items[static_cast<std::size_t>(p)];
        const SequenceEval& ev = report.per_sequence[static_cast<std::size_t>(p)];
        svg << "<rect x=\"" << px(p, 0) << "\" y=\"" << margin << "\" width=\"" << pw
            << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#999\"/>\n";
        // zero axis and the source/target split
        svg << "<line x1=\"" << px(p, 0) << "\" y1=\"" << py(0.0) << "\" x2=\"" << px(p, 30)
            << "\" y2=\"" << py(0.0) << "\" stroke=\"#ddd\"/>\n";
        svg << "<line x1=\"" << px(p, 18.5) << "\" y1=\"" << margin << "\" x2=\"" << px(p, 18.5)
            << "\" y2=\"" << margin + ph << "\" stroke=\"#ccc\" stroke-dasharray=\"4 3\"/>\n";

        svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
        for (int t = 0; t < kSeqLen; ++t) {
            const double y = t < kSrcLen ? item.src[static_cast<std::size_t>(t)]
                                         : item.tgt[static_cast<std::size_t>(t - kSrcLen)];
            svg << px(p, t) << "," << py(y) << " ";
        }
        svg << "\"/>\n";

        svg << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
        for (std::size_t t = 0; t < ev.forecast.size(); ++t) {
            svg << px(p, static_cast<double>(kSrcLen + t)) << "," << py(ev.forecast[t]) << " ";
        }
        svg << "\"/>\n";

        svg << "<text x=\"" << px(p, 0) << "\" y=\"" << margin + ph + 14.0
            << "\" font-family=\"sans-serif\" font-size=\"11\">w=" << format_double(item.freq)
            << " sse=" << format_double(ev.sse) << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out = open_out(path);
    out << svg.str();
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

}  // namespace tsf
