#pragma once

// Static SVG plots with a logarithmic y axis, written as plain text.

#include <optional>
#include <string>
#include <string_view>

#include "stabcert/core.hpp"

namespace stabcert::cli {

enum class PlotKind {
    NormVsEnvelope,  // CSV `t,norm` against 1/mu(t) from a certificate
    MatchingError,   // CSV `t,error,bound,ratio`
};

[[nodiscard]] PlotKind plot_kind_from_string(std::string_view s);

struct PlotOptions {
    /// Emits a `<!-- generated ... -->` comment; the only nondeterministic byte range.
    bool timestamp = true;
    /// Required for NormVsEnvelope.
    std::optional<Certificate> certificate;
};

/// Throws ParameterError on a header mismatch, an empty table or a missing
/// certificate.
[[nodiscard]] std::string render_plot(std::string_view csv, PlotKind kind, const PlotOptions& options);
void emit_plot(const std::string& csv_path, PlotKind kind, const std::string& svg_path, const PlotOptions& options);

}  // namespace stabcert::cli
