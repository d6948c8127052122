#include "pacsac/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace pacsac::harness {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

void plot_learning_curves(const std::filesystem::path& csv, const std::filesystem::path& svg, const std::string& title) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  std::string line;
  std::getline(in, line);
  const auto header = split(line);
  auto column = [&](const std::string& name) -> long {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<long>(it - header.begin());
  };
  const long c_step = column("env_step");
  const long c_reward = column("reward");
  const long c_group = column("group");
  const long c_seed = column("seed");
  if (c_step < 0 || c_reward < 0) throw std::runtime_error(csv.string() + ": needs env_step and reward columns");

  // (group, seed) -> points in file order
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> lines;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    const std::string group = c_group >= 0 ? cells.at(c_group) : "";
    const std::string seed = c_seed >= 0 ? cells.at(c_seed) : "";
    lines[{group, seed}].emplace_back(std::stod(cells.at(c_step)), std::stod(cells.at(c_reward)));
  }
  if (lines.empty()) throw std::runtime_error(csv.string() + ": no rows to plot");

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> smooth;
  for (auto& [key, pts] : lines) {
    std::vector<double> r;
    for (auto& p : pts) r.push_back(p.second);
    const auto s = trailing_mean(r);
    auto& out = smooth[key];
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out.emplace_back(pts[i].first, s[i]);
      x0 = std::min(x0, pts[i].first);
      x1 = std::max(x1, pts[i].first);
      y0 = std::min(y0, s[i]);
      y1 = std::max(y1, s[i]);
    }
  }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;

  constexpr double W = 720, H = 440, L = 70, R = 160, T = 40, B = 50;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::map<std::string, std::size_t> colour;
  for (auto& [key, pts] : smooth) colour.emplace(key.first.empty() ? key.second : key.first, colour.size());

  std::ofstream out(svg);
  if (!out) throw std::runtime_error("cannot write " + svg.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    out << "<text x=\"" << sx(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << std::lround(xv) << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << std::lround(yv) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">environment step</text>\n";
  out << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">episode reward (trailing mean of 10)</text>\n";
  for (auto& [key, pts] : smooth) {
    const auto& name = key.first.empty() ? key.second : key.first;
    out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[colour[name] % 8] << "\" points=\"";
    for (auto& p : pts) out << sx(p.first) << ',' << sy(p.second) << ' ';
    out << "\"/>\n";
  }
  double ly = T + 10;
  for (auto& [name, idx] : colour) {
    out << "<rect x=\"" << W - R + 14 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[idx % 8] << "\"/>";
    out << "<text x=\"" << W - R + 32 << "\" y=\"" << ly + 1 << "\">" << name << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
}

}  // namespace pacsac::harness
