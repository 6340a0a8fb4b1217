#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cmot/eval/evaluate.hpp"

namespace cmot::eval {

inline constexpr const char* kReportSchema = "cmot.eval_report";
inline constexpr int kReportVersion = 1;

inline void to_json(nlohmann::json& j, const Scores& s) {
  j = {{"pr", s.pr}, {"npr", s.npr}, {"sr1", s.sr1}, {"sr2", s.sr2}, {"frames", s.frames}};
}
inline void from_json(const nlohmann::json& j, Scores& s) {
  j.at("pr").get_to(s.pr);
  j.at("npr").get_to(s.npr);
  j.at("sr1").get_to(s.sr1);
  j.at("sr2").get_to(s.sr2);
  j.at("frames").get_to(s.frames);
}

inline void to_json(nlohmann::json& j, const Curves& c) {
  j = {{"distance_thresholds", c.distance_thresholds}, {"precision", c.precision},
       {"norm_thresholds", c.norm_thresholds},         {"norm_precision", c.norm_precision},
       {"overlap_thresholds", c.overlap_thresholds},   {"success", c.success}};
}
inline void from_json(const nlohmann::json& j, Curves& c) {
  j.at("distance_thresholds").get_to(c.distance_thresholds);
  j.at("precision").get_to(c.precision);
  j.at("norm_thresholds").get_to(c.norm_thresholds);
  j.at("norm_precision").get_to(c.norm_precision);
  j.at("overlap_thresholds").get_to(c.overlap_thresholds);
  j.at("success").get_to(c.success);
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  return {{"schema", kReportSchema},         {"version", kReportVersion},
          {"tracker", r.tracker},            {"sequences", r.sequences},
          {"overall", r.overall},            {"curves", r.curves},
          {"per_attribute", r.per_attribute}, {"per_switch_bin", r.per_switch_bin}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kReportSchema)
      throw ParseError("not an evaluation report: schema '" + j.at("schema").get<std::string>() + "'");
    if (j.at("version").get<int>() != kReportVersion)
      throw ParseError("unsupported report version " + std::to_string(j.at("version").get<int>()));
    EvalReport r;
    j.at("tracker").get_to(r.tracker);
    j.at("sequences").get_to(r.sequences);
    j.at("overall").get_to(r.overall);
    j.at("curves").get_to(r.curves);
    j.at("per_attribute").get_to(r.per_attribute);
    j.at("per_switch_bin").get_to(r.per_switch_bin);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write '" + p.string() + "'");
  os << text;
  if (!os) throw IoError("write failed for '" + p.string() + "'");
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read '" + p.string() + "'");
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void save_report(const std::filesystem::path& p, const EvalReport& r) {
  write_text(p, report_to_json(r).dump(2) + "\n");
}

inline EvalReport load_report(const std::filesystem::path& p) {
  const std::string text = read_text(p);
  try {
    return report_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + p.string() + "': " + e.what());
  }
}

inline std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

enum class PlotKind { Precision, NormPrecision, Success };

/// "name [PR]", "name [NPR]" or "name [SR-I/SR-II]".
inline std::string legend_label(const EvalReport& r, PlotKind kind) {
  if (kind == PlotKind::Precision) return r.tracker + " [" + fixed3(r.overall.pr) + "]";
  if (kind == PlotKind::NormPrecision) return r.tracker + " [" + fixed3(r.overall.npr) + "]";
  return r.tracker + " [" + fixed3(r.overall.sr1) + "/" + fixed3(r.overall.sr2) + "]";
}

/// Line plot of one curve kind for several trackers; legend entries carry the
/// representative score (SR-I/SR-II for success), best first.
inline cv::Mat render_plot(const std::vector<EvalReport>& reports, PlotKind kind) {
  const int W = 640, H = 480, L = 70, R = 20, T = 40, B = 60;
  cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  const cv::Scalar black(0, 0, 0), grey(220, 220, 220);
  const std::string title = kind == PlotKind::Precision       ? "Precision plot"
                            : kind == PlotKind::NormPrecision ? "Normalized precision plot"
                                                              : "Success plot";
  const std::string xlabel = kind == PlotKind::Precision       ? "Location error threshold (pixels)"
                             : kind == PlotKind::NormPrecision ? "Normalized location error threshold"
                                                               : "Overlap threshold";
  double xmax = 1.0;
  if (!reports.empty()) {
    const auto& c = reports.front().curves;
    const auto& g = kind == PlotKind::Precision       ? c.distance_thresholds
                    : kind == PlotKind::NormPrecision ? c.norm_thresholds
                                                      : c.overlap_thresholds;
    if (!g.empty() && g.back() > 0) xmax = g.back();
  }
  auto px = [&](double x, double y) {
    return cv::Point(L + static_cast<int>(std::lround(x / xmax * (W - L - R))),
                     H - B - static_cast<int>(std::lround(y * (H - T - B))));
  };
  for (int i = 0; i <= 10; ++i) {
    const double f = i / 10.0;
    cv::line(img, px(0, f), px(xmax, f), grey, 1);
    cv::line(img, px(f * xmax, 0), px(f * xmax, 1), grey, 1);
    cv::putText(img, fixed3(f).substr(0, 3), px(0, f) + cv::Point(-40, 5), font, 0.4, black, 1, cv::LINE_AA);
    const double xv = f * xmax;
    const std::string xs = xmax >= 10 ? std::to_string(static_cast<int>(std::lround(xv))) : fixed3(xv).substr(0, 4);
    cv::putText(img, xs, px(xv, 0) + cv::Point(-10, 18), font, 0.4, black, 1, cv::LINE_AA);
  }
  cv::rectangle(img, px(0, 1), px(xmax, 0), black, 1);
  cv::putText(img, title, cv::Point(L, 25), font, 0.6, black, 1, cv::LINE_AA);
  cv::putText(img, xlabel, cv::Point(L + 120, H - 15), font, 0.5, black, 1, cv::LINE_AA);

  struct Entry {
    const EvalReport* r;
    double key;
    std::string label;
  };
  std::vector<Entry> entries;
  for (const auto& r : reports) {
    const double key = kind == PlotKind::Precision       ? r.overall.pr
                       : kind == PlotKind::NormPrecision ? r.overall.npr
                                                         : r.overall.sr1;
    entries.push_back({&r, key, legend_label(r, kind)});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.key != b.key ? a.key > b.key : a.r->tracker < b.r->tracker;
  });
  static const cv::Scalar palette[] = {{200, 60, 30},  {30, 30, 200},  {40, 150, 40},  {0, 140, 255},
                                       {160, 40, 160}, {120, 120, 0},  {80, 80, 80},   {0, 200, 200}};
  const int legend_x = kind == PlotKind::Success ? W - R - 230 : L + (W - L - R) - 230;
  const int legend_y = kind == PlotKind::Success ? T + 15 : H - B - 20 * static_cast<int>(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& c = entries[k].r->curves;
    const auto& xs = kind == PlotKind::Precision       ? c.distance_thresholds
                     : kind == PlotKind::NormPrecision ? c.norm_thresholds
                                                       : c.overlap_thresholds;
    const auto& ys = kind == PlotKind::Precision       ? c.precision
                     : kind == PlotKind::NormPrecision ? c.norm_precision
                                                       : c.success;
    const cv::Scalar col = palette[k % 8];
    for (std::size_t i = 1; i < std::min(xs.size(), ys.size()); ++i)
      cv::line(img, px(xs[i - 1], ys[i - 1]), px(xs[i], ys[i]), col, 2, cv::LINE_AA);
    const int y = legend_y + 20 * static_cast<int>(k);
    cv::line(img, cv::Point(legend_x, y - 4), cv::Point(legend_x + 25, y - 4), col, 2, cv::LINE_AA);
    cv::putText(img, entries[k].label, cv::Point(legend_x + 32, y), font, 0.45, black, 1, cv::LINE_AA);
  }
  return img;
}

inline void write_plot(const std::filesystem::path& p, const std::vector<EvalReport>& reports, PlotKind kind) {
  const cv::Mat img = render_plot(reports, kind);
  std::vector<unsigned char> buf;
  if (!cv::imencode(".png", img, buf)) throw IoError("PNG encoding failed for '" + p.string() + "'");
  write_text(p, std::string(buf.begin(), buf.end()));
}

/// Long-format table: one row per tracker and attribute or switch bin.
inline std::string attribute_table(const std::vector<EvalReport>& reports) {
  std::string out = "tracker,group,key,frames,pr,npr,sr1,sr2\n";
  auto row = [&](const std::string& t, const std::string& g, const std::string& k, const Scores& s) {
    out += t + "," + g + "," + k + "," + std::to_string(s.frames) + "," + fixed6(s.pr) + "," + fixed6(s.npr) +
           "," + fixed6(s.sr1) + "," + fixed6(s.sr2) + "\n";
  };
  for (const auto& r : reports) {
    row(r.tracker, "overall", "all", r.overall);
    for (const auto& [k, s] : r.per_attribute) row(r.tracker, "attribute", k, s);
    for (const auto& [k, s] : r.per_switch_bin) row(r.tracker, "switches", k, s);
  }
  return out;
}

/// Trackers sorted by SR-I (descending), ties by name.
inline std::vector<EvalReport> rank_by_sr1(std::vector<EvalReport> reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
    return a.overall.sr1 != b.overall.sr1 ? a.overall.sr1 > b.overall.sr1 : a.tracker < b.tracker;
  });
  return reports;
}

inline std::string comparison_table(const std::vector<EvalReport>& reports) {
  std::string out = "rank,tracker,frames,pr,npr,sr1,sr2\n";
  const auto ranked = rank_by_sr1(reports);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& s = ranked[i].overall;
    out += std::to_string(i + 1) + "," + ranked[i].tracker + "," + std::to_string(s.frames) + "," + fixed6(s.pr) +
           "," + fixed6(s.npr) + "," + fixed6(s.sr1) + "," + fixed6(s.sr2) + "\n";
  }
  return out;
}

/// report.json (first report), the three plots, attributes.csv and comparison.csv.
inline void write_report(const std::filesystem::path& dir, const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ValidationError("no reports to write");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  if (reports.size() == 1) {
    save_report(dir / "report.json", reports.front());
  } else {
    nlohmann::json all = nlohmann::json::array();
    for (const auto& r : reports) all.push_back(report_to_json(r));
    write_text(dir / "report.json", nlohmann::json{{"schema", "cmot.eval_report_set"},
                                                   {"version", kReportVersion},
                                                   {"reports", all}}
                                            .dump(2) + "\n");
  }
  write_plot(dir / "precision.png", reports, PlotKind::Precision);
  write_plot(dir / "norm_precision.png", reports, PlotKind::NormPrecision);
  write_plot(dir / "success.png", reports, PlotKind::Success);
  write_text(dir / "attributes.csv", attribute_table(reports));
  write_text(dir / "comparison.csv", comparison_table(reports));
}

/// Reads what `write_report` wrote: one report or a report set.
inline std::vector<EvalReport> load_reports(const std::filesystem::path& p) {
  const std::string text = read_text(p);
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("schema", "") != "cmot.eval_report_set") return {report_from_json(j)};
    std::vector<EvalReport> out;
    for (const auto& r : j.at("reports")) out.push_back(report_from_json(r));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + p.string() + "': " + e.what());
  }
}

}  // namespace cmot::eval
