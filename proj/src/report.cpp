#include "keytap/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "keytap/errors.hpp"
#include "keytap/io.hpp"

namespace keytap {

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("KEYTAP_SEED");
  if (!v) return std::nullopt;
  const std::string s(v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ContractError("KEYTAP_SEED must be an unsigned integer, got '" + s + "'");
  }
  return out;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed) {
  if (flag) return *flag;
  if (auto e = env_seed()) return *e;
  return config_seed;
}

nlohmann::json provenance(const std::string& command, const nlohmann::json& config,
                          std::optional<std::uint64_t> seed) {
  nlohmann::json p = {{"tool", kToolName}, {"version", kToolVersion}, {"command", command}, {"config", config}};
  if (seed) p["seed"] = *seed;
  return p;
}

nlohmann::json make_report(const std::string& command, const nlohmann::json& config,
                           std::optional<std::uint64_t> seed, nlohmann::json body) {
  if (!body.is_object()) body = {{"result", std::move(body)}};
  body["provenance"] = provenance(command, config, seed);
  return body;
}

std::string render_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_atomic(path, render_json(j));
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw ContractError("table row width differs from the header");
  rows.push_back(std::move(row));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Round step (1, 2 or 5 times a power of ten) giving about `target` ticks.
double nice_step(double span, int target) {
  if (span <= 0.0) return 1.0;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string render_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + csv_field(t.columns[i]);
  out += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_field(r[i]);
    out += "\n";
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Table& t) { write_file_atomic(path, render_csv(t)); }

std::string render_svg(const Plot& p) {
  constexpr double W = 640, H = 420, left = 70, right = 160, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series) {
    if (s.x.size() != s.y.size()) throw ContractError("plot series '" + s.name + "': x and y differ in length");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (p.y_min) y0 = *p.y_min;
  if (p.y_max) y1 = *p.y_max;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;

  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(W / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + xml_escape(p.title) + "</text>\n";

  const double xs = nice_step(x1 - x0, 8), ys = nice_step(y1 - y0, 6);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs) {
    out += "<line x1=\"" + num(sx(t)) + "\" y1=\"" + num(top) + "\" x2=\"" + num(sx(t)) + "\" y2=\"" + num(top + ph) +
           "\" stroke=\"#e0e0e0\"/>\n";
    out += "<text x=\"" + num(sx(t)) + "\" y=\"" + num(top + ph + 16) + "\" text-anchor=\"middle\">" +
           format_number(std::abs(t) < 1e-12 ? 0.0 : t) + "</text>\n";
  }
  for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys) {
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(sy(t)) + "\" x2=\"" + num(left + pw) + "\" y2=\"" + num(sy(t)) +
           "\" stroke=\"#e0e0e0\"/>\n";
    out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(sy(t) + 4) + "\" text-anchor=\"end\">" +
           format_number(std::abs(t) < 1e-12 ? 0.0 : t) + "</text>\n";
  }
  out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  out += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(H - 18) + "\" text-anchor=\"middle\">" +
         xml_escape(p.x_label) + "</text>\n";
  out += "<text transform=\"translate(18," + num(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         xml_escape(p.y_label) + "</text>\n";

  for (std::size_t k = 0; k < p.series.size(); ++k) {
    const auto& s = p.series[k];
    const std::string colour = palette[k % (sizeof palette / sizeof *palette)];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      pts += (pts.empty() ? "" : " ") + num(sx(s.x[i])) + "," + num(sy(s.y[i]));
      out += "<circle cx=\"" + num(sx(s.x[i])) + "\" cy=\"" + num(sy(s.y[i])) + "\" r=\"2.5\" fill=\"" + colour + "\"/>\n";
    }
    out += "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = top + 14 + 18 * static_cast<double>(k);
    out += "<line x1=\"" + num(left + pw + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(left + pw + 32) +
           "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(left + pw + 38) + "\" y=\"" + num(ly) + "\">" + xml_escape(s.name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

void write_svg(const std::filesystem::path& path, const Plot& p) { write_file_atomic(path, render_svg(p)); }

nlohmann::json reference_targets(const std::string& scenario) {
  using nlohmann::json;
  const std::string note = "accuracies measured on human recordings; synthetic corpora are not expected to match";
  if (scenario == "complete-profiling") {
    return {{"note", note},
            {"macbook_touch_voip", {{"top1", 0.8323}, {"top5", 0.971}}},
            {"lenovo_touch_voip", {{"top1", 0.598}, {"top5", 0.835}}}};
  }
  if (scenario == "user-profiling") {
    return {{"note", note}, {"top5", {{"lenovo", 0.419}, {"macbook", 0.54}, {"toshiba", 0.456}}}};
  }
  if (scenario == "model-profiling" || scenario == "model-profiling-crowd") {
    return {{"note", note},
            {"single_donor_top1_gain_over_baseline", json::array({1.78, 3.12})},
            {"crowd_gain", json::array({0.06, 0.10})},
            {"device_accuracy", 0.93},
            {"known_vs_unknown_confidence", json::array({0.45, 0.21})}};
  }
  if (scenario == "words") {
    return {{"note", note},
            {"complete_profiling", {{"char_error", 0.0926}, {"corrected_error", 0.0265}}},
            {"model_profiling", {{"char_error", 0.6079}, {"corrected_error", 0.5776}}}};
  }
  if (scenario == "crack-estimate") {
    return {{"note", "published estimator figures"},
            {"phase0_guesses", 9.76e6},
            {"speedup", 1e7},
            {"model_profiling_guesses", 7.79e12},
            {"brute_force_half_space_printed", 8.39e13}};
  }
  return json::object();
}

}  // namespace keytap
