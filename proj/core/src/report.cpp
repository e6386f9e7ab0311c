// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Report files written by EmitReport:
//   annotation_counts.csv      kind,value,count
//   annotation_durations.csv   kind,value,n,mean_s,std_s
//   gaps_same_kind.csv         from,to,value,n,mean_s,std_s
//   gaps_transition.csv        from,to,value,n,mean_s,std_s
//   eating_rate.csv            session_id,seat,normalized,minute,value
//   stats.json                 everything above (json format only)
//   eating_rate.svg, eating_rate_normalized.svg

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "sonnet/analytics.hpp"
#include "sonnet/errors.hpp"
#include "text_util.hpp"

namespace sonnet {
namespace {

using text::FormatDouble;

std::string ValueName(const std::optional<EventValue>& v) {
  return v ? std::string(ToString(*v)) : std::string("all");
}

std::ofstream Open(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw Error(ErrorCode::kIOFailure, "cannot write " + p.string());
  return os;
}

void WriteGaps(const std::filesystem::path& p, const std::vector<GapRow>& rows) {
  auto os = Open(p);
  os << "from,to,value,n,mean_s,std_s\n";
  for (const auto& g : rows)
    os << ToString(g.from) << ',' << ToString(g.to) << ',' << ValueName(g.value) << ',' << g.seconds.n << ','
       << FormatDouble(g.seconds.mean) << ',' << FormatDouble(g.seconds.std) << '\n';
}

nlohmann::json StatJson(const SummaryStat& s) { return {{"n", s.n}, {"mean_s", s.mean}, {"std_s", s.std}}; }

nlohmann::json GapsJson(const std::vector<GapRow>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& g : rows)
    out.push_back({{"from", ToString(g.from)}, {"to", ToString(g.to)}, {"value", ValueName(g.value)},
                   {"stat", StatJson(g.seconds)}});
  return out;
}

}  // namespace

std::string RenderRateSvg(std::span<const RateCurve> curves, const std::string& title) {
  constexpr int kW = 640, kH = 360, kPad = 48;
  std::size_t bins = 1;
  double top = 0;
  for (const auto& c : curves) {
    bins = std::max(bins, c.per_minute.size());
    for (double v : c.per_minute) top = std::max(top, v);
  }
  if (top <= 0) top = 1;
  const double dx = bins > 1 ? double(kW - 2 * kPad) / double(bins - 1) : 0.0;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  os << "<text x=\"" << kPad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title
     << "</text>\n";
  os << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" font-size=\"12\">minute</text>\n";
  os << "<text x=\"4\" y=\"" << kPad - 8 << "\" font-size=\"12\">max " << FormatDouble(top) << "</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    os << "<polyline fill=\"none\" stroke=\"" << kColors[i % 6] << "\" data-session=\"" << c.session_id
       << "\" data-seat=\"" << c.seat << "\" points=\"";
    for (std::size_t b = 0; b < c.per_minute.size(); ++b) {
      const double x = kPad + dx * double(b);
      const double y = (kH - kPad) - (kH - 2 * kPad) * c.per_minute[b] / top;
      os << (b ? " " : "") << FormatDouble(std::round(x * 100) / 100) << ','
         << FormatDouble(std::round(y * 100) / 100);
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::filesystem::path> EmitReport(const StatsReport& report, std::string_view format,
                                              const std::filesystem::path& dir) {
  if (format != "csv" && format != "json")
    throw Error(ErrorCode::kIOFailure, "unknown report format '" + std::string(format) + "'");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIOFailure, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;

  if (format == "csv") {
    {
      auto p = dir / "annotation_counts.csv";
      auto os = Open(p);
      os << "kind,value,count\n";
      for (const auto& c : report.counts) os << ToString(c.kind) << ',' << ValueName(c.value) << ',' << c.count << '\n';
      written.push_back(p);
    }
    {
      auto p = dir / "annotation_durations.csv";
      auto os = Open(p);
      os << "kind,value,n,mean_s,std_s\n";
      for (const auto& d : report.durations)
        os << ToString(d.kind) << ',' << ValueName(d.value) << ',' << d.seconds.n << ','
           << FormatDouble(d.seconds.mean) << ',' << FormatDouble(d.seconds.std) << '\n';
      written.push_back(p);
    }
    WriteGaps(dir / "gaps_same_kind.csv", report.same_kind_gaps);
    written.push_back(dir / "gaps_same_kind.csv");
    WriteGaps(dir / "gaps_transition.csv", report.transition_gaps);
    written.push_back(dir / "gaps_transition.csv");
    {
      auto p = dir / "eating_rate.csv";
      auto os = Open(p);
      os << "session_id,seat,normalized,minute,value\n";
      for (const auto& c : report.rates)
        for (std::size_t m = 0; m < c.per_minute.size(); ++m)
          os << c.session_id << ',' << c.seat << ',' << (c.normalized ? 1 : 0) << ',' << m << ','
             << FormatDouble(c.per_minute[m]) << '\n';
      written.push_back(p);
    }
  } else {
    nlohmann::json j;
    j["total_events"] = report.total_events;
    auto counts = nlohmann::json::array();
    for (const auto& c : report.counts)
      counts.push_back({{"kind", ToString(c.kind)}, {"value", ValueName(c.value)}, {"count", c.count}});
    j["counts"] = counts;
    auto durs = nlohmann::json::array();
    for (const auto& d : report.durations)
      durs.push_back({{"kind", ToString(d.kind)}, {"value", ValueName(d.value)}, {"stat", StatJson(d.seconds)}});
    j["durations"] = durs;
    j["same_kind_gaps"] = GapsJson(report.same_kind_gaps);
    j["transition_gaps"] = GapsJson(report.transition_gaps);
    auto rates = nlohmann::json::array();
    for (const auto& c : report.rates)
      rates.push_back({{"session_id", c.session_id}, {"seat", c.seat}, {"normalized", c.normalized},
                       {"per_minute", c.per_minute}});
    j["rates"] = rates;
    auto p = dir / "stats.json";
    auto os = Open(p);
    os << j.dump(2) << '\n';
    written.push_back(p);
  }

  std::vector<RateCurve> raw, norm;
  for (const auto& c : report.rates) (c.normalized ? norm : raw).push_back(c);
  for (auto [name, curves, title] : {std::tuple{"eating_rate.svg", &raw, "food_to_mouth per minute"},
                                     std::tuple{"eating_rate_normalized.svg", &norm,
                                                "food_to_mouth per minute (normalized)"}}) {
    auto p = dir / name;
    auto os = Open(p);
    os << RenderRateSvg(*curves, title);
    written.push_back(p);
  }
  return written;
}

std::vector<std::vector<std::string>> ReadCsvTable(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::kIOFailure, "cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = text::Split(line, ',');
    rows.emplace_back(fields.begin(), fields.end());
  }
  return rows;
}

}  // namespace sonnet
