#pragma once

// Static SVG line charts of RMSE curves: one panel per target, one line per
// configuration label, log-scaled RMSE axis.

#include <iosfwd>
#include <span>
#include <string>

#include "crashsamp/evaluate.hpp"

namespace crashsamp {

struct PlotOptions {
    std::string title;
    int panel_width = 420;
    int panel_height = 300;
    bool log_y = true;
};

/// Throws ConfigError if `rows` is empty.
void write_rmse_svg(std::ostream& out, std::span<const RmseRow> rows, const PlotOptions& opt = {});

}  // namespace crashsamp
