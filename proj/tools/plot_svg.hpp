#pragma once

#include <string>

namespace ugss::cli {

/// Renders the JSON produced by eval::imputation_plot_data as an SVG with
/// one panel per variable.
std::string render_plot_svg(const std::string& plot_json);

}  // namespace ugss::cli
