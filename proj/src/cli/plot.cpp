#include "stabcert/cli/plot.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <vector>

#include "stabcert/errors.hpp"
#include "stabcert/format.hpp"

namespace stabcert::cli {

namespace {

constexpr double kWidth = 800.0, kHeight = 500.0;
constexpr double kLeft = 80.0, kRight = 30.0, kTop = 30.0, kBottom = 60.0;

struct Series {
    std::string label;
    std::string color;
    std::vector<double> t;
    std::vector<double> y;
};

std::vector<std::vector<double>> read_table(std::string_view csv, std::string_view header) {
    std::istringstream in{std::string(csv)};
    std::string line;
    if (!std::getline(in, line)) throw ParameterError("plot input is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) {
        throw ParameterError("plot input header is '" + line + "', expected '" + std::string(header) + "'");
    }
    const auto columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParameterError("plot input has a non-numeric cell '" + cell + "'");
            }
        }
        if (row.size() != columns) throw ParameterError("plot input row has the wrong number of columns");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParameterError("plot input has no data rows");
    return rows;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", x);
    return buf;
}

std::string render(const std::vector<Series>& series, const std::string& title, const std::string& y_label,
                   bool timestamp) {
    double t_lo = std::numeric_limits<double>::infinity(), t_hi = -t_lo;
    double y_lo = t_lo, y_hi = -t_lo;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.t.size(); ++i) {
            t_lo = std::min(t_lo, s.t[i]);
            t_hi = std::max(t_hi, s.t[i]);
            if (s.y[i] > 0.0 && std::isfinite(s.y[i])) {
                y_lo = std::min(y_lo, s.y[i]);
                y_hi = std::max(y_hi, s.y[i]);
            }
        }
    }
    if (!(y_hi > 0.0)) throw ParameterError("nothing positive to draw on a logarithmic axis");
    if (t_hi <= t_lo) t_hi = t_lo + 1.0;
    double ly_lo = std::floor(std::log10(y_lo));
    double ly_hi = std::ceil(std::log10(y_hi));
    if (ly_hi <= ly_lo) ly_hi = ly_lo + 1.0;

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double t) { return kLeft + pw * (t - t_lo) / (t_hi - t_lo); };
    auto py = [&](double y) { return kTop + ph * (ly_hi - std::log10(y)) / (ly_hi - ly_lo); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
    if (timestamp) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[64];
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        out += "<!-- generated " + std::string(buf) + " -->\n";
    }
    out += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
    out += "<text x=\"400\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + title +
           "</text>\n";
    out += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";

    const int decades = static_cast<int>(ly_hi - ly_lo);
    const int stride = std::max(1, decades / 10);
    for (int k = 0; k <= decades; k += stride) {
        const double ly = ly_lo + k;
        const double y = py(std::pow(10.0, ly));
        out += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(kLeft + pw) + "\" y2=\"" + fmt(y) +
               "\" stroke=\"#dddddd\"/>\n";
        out += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(y + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" +
               std::to_string(static_cast<int>(ly)) + "</text>\n";
    }
    for (int k = 0; k <= 5; ++k) {
        const double t = t_lo + (t_hi - t_lo) * k / 5.0;
        const double x = px(t);
        out += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(kTop + ph + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + shortest(t) + "</text>\n";
    }
    out += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 15) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">t</text>\n";
    out += "<text x=\"18\" y=\"" + fmt(kTop + ph / 2) + "\" transform=\"rotate(-90 18 " + fmt(kTop + ph / 2) +
           ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + y_label + "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        std::string points;
        auto flush = [&] {
            if (!points.empty()) {
                out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" + points +
                       "\"/>\n";
                points.clear();
            }
        };
        for (std::size_t i = 0; i < s.t.size(); ++i) {
            if (!(s.y[i] > 0.0) || !std::isfinite(s.y[i])) {
                flush();
                continue;
            }
            if (!points.empty()) points += ' ';
            points += fmt(px(s.t[i])) + ',' + fmt(py(s.y[i]));
        }
        flush();
        const double ly = kTop + 16.0 + 16.0 * static_cast<double>(si);
        out += "<line x1=\"" + fmt(kLeft + pw - 150) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" + fmt(kLeft + pw - 125) +
               "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"/>\n";
        out += "<text x=\"" + fmt(kLeft + pw - 120) + "\" y=\"" + fmt(ly) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + s.label + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace

PlotKind plot_kind_from_string(std::string_view s) {
    if (s == "norm" || s == "NormVsEnvelope") return PlotKind::NormVsEnvelope;
    if (s == "matching" || s == "MatchingError") return PlotKind::MatchingError;
    throw ParameterError("unknown plot kind '" + std::string(s) + "' (expected norm or matching)");
}

std::string render_plot(std::string_view csv, PlotKind kind, const PlotOptions& options) {
    if (kind == PlotKind::NormVsEnvelope) {
        if (!options.certificate) throw ParameterError("a norm plot needs the certificate for the envelope");
        const auto rows = read_table(csv, "t,norm");
        Series norm{"|u(t)|", "#1f77b4", {}, {}};
        Series env{"1/mu(t)", "#d62728", {}, {}};
        for (const auto& r : rows) {
            norm.t.push_back(r[0]);
            norm.y.push_back(r[1]);
            env.t.push_back(r[0]);
            env.y.push_back(envelope_eval(*options.certificate, r[0]).value);
        }
        return render({norm, env}, "solution norm and certified envelope", "norm", options.timestamp);
    }
    const auto rows = read_table(csv, "t,error,bound,ratio");
    Series err{"|v(t) - u(t)|", "#1f77b4", {}, {}};
    Series bound{"C int_t^inf |B|", "#d62728", {}, {}};
    for (const auto& r : rows) {
        err.t.push_back(r[0]);
        err.y.push_back(r[1]);
        bound.t.push_back(r[0]);
        bound.y.push_back(r[2]);
    }
    return render({err, bound}, "matching error and tail bound", "error", options.timestamp);
}

void emit_plot(const std::string& csv_path, PlotKind kind, const std::string& svg_path, const PlotOptions& options) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw ParameterError("cannot read '" + csv_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    write_text_file(svg_path, render_plot(buf.str(), kind, options));
}

}  // namespace stabcert::cli
