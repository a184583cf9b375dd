#include "plot_svg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ugss::cli {

namespace {

constexpr double kWidth = 640.0;
constexpr double kPanel = 120.0;
constexpr double kMarginX = 90.0;
constexpr double kMarginY = 20.0;

struct Scale {
  double t0, t1, v0, v1, top;
  double x(double t) const { return kMarginX + (t - t0) / std::max(t1 - t0, 1e-9) * (kWidth - kMarginX - 20.0); }
  double y(double v) const { return top + kPanel - 10.0 - (v - v0) / std::max(v1 - v0, 1e-9) * (kPanel - 30.0); }
};

}  // namespace

std::string render_plot_svg(const std::string& plot_json) {
  const auto doc = nlohmann::json::parse(plot_json);
  const auto& vars = doc.at("variables");
  const auto stamps = doc.at("timestamps").get<std::vector<double>>();
  const double t0 = stamps.empty() ? 0.0 : stamps.front();
  const double t1 = stamps.empty() ? 1.0 : stamps.back();
  const double height = 2.0 * kMarginY + kPanel * static_cast<double>(vars.size());

  std::ostringstream os;
  os.precision(5);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<text x=\"8\" y=\"14\">record " << doc.value("record_id", 0) << ", label " << doc.value("label", 0)
     << ", p = " << doc.value("probability", 0.0) << "</text>\n";
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto& v = vars[i];
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    auto widen = [&](double a) {
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    };
    for (const auto& p : v.at("imputed")) widen(p[1].get<double>());
    for (const auto& p : v.at("band")) {
      widen(p[1].get<double>());
      widen(p[2].get<double>());
    }
    for (const auto& p : v.at("held_out")) widen(p[1].get<double>());
    if (!std::isfinite(lo)) lo = -1.0, hi = 1.0;
    const Scale s{t0, t1, lo, hi, kMarginY + kPanel * static_cast<double>(i)};

    os << "<g>\n<text x=\"8\" y=\"" << s.top + kPanel / 2 << "\">" << v.at("name").get<std::string>() << "</text>\n";
    if (!v.at("mae").is_null()) {
      os << "<text x=\"8\" y=\"" << s.top + kPanel / 2 + 14 << "\" fill=\"#a00\">MAE " << v.at("mae").get<double>()
         << "</text>\n";
    }
    os << "<rect x=\"" << kMarginX << "\" y=\"" << s.top + 10 << "\" width=\"" << kWidth - kMarginX - 20
       << "\" height=\"" << kPanel - 20 << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
    for (const auto& p : v.at("band")) {
      const double t = p[0].get<double>();
      os << "<line x1=\"" << s.x(t) << "\" x2=\"" << s.x(t) << "\" y1=\"" << s.y(p[1].get<double>()) << "\" y2=\""
         << s.y(p[2].get<double>()) << "\" stroke=\"#f4a460\" stroke-width=\"4\" opacity=\"0.5\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"#e67e22\" points=\"";
    for (const auto& p : v.at("imputed")) os << s.x(p[0].get<double>()) << "," << s.y(p[1].get<double>()) << " ";
    os << "\"/>\n";
    for (const auto& p : v.at("observed")) {
      os << "<circle cx=\"" << s.x(p[0].get<double>()) << "\" cy=\"" << s.y(p[1].get<double>())
         << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    }
    for (const auto& p : v.at("held_out")) {
      const double x = s.x(p[0].get<double>()), y = s.y(p[1].get<double>());
      os << "<path d=\"M" << x - 3 << "," << y - 3 << " L" << x + 3 << "," << y + 3 << " M" << x - 3 << "," << y + 3
         << " L" << x + 3 << "," << y - 3 << "\" stroke=\"#c00\" stroke-width=\"1.5\"/>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ugss::cli
