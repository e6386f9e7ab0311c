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

#include "sonnet/window_archive.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "sonnet/errors.hpp"

namespace sonnet {
namespace {

constexpr char kMagic[8] = {'S', 'N', 'T', 'W', 'I', 'N', '0', '1'};

template <typename T>
void Put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw Error(ErrorCode::kFormatError, "truncated window archive");
  return v;
}

void PutMatrix(std::ostream& os, const Matrix& m) {
  Put<std::int64_t>(os, m.rows());
  Put<std::int64_t>(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix GetMatrix(std::istream& is) {
  const auto rows = Get<std::int64_t>(is);
  const auto cols = Get<std::int64_t>(is);
  if (rows < 0 || cols < 0 || rows * cols > (std::int64_t{1} << 32))
    throw Error(ErrorCode::kFormatError, "corrupt matrix shape in window archive");
  Matrix m(rows, cols);
  if (!is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
    throw Error(ErrorCode::kFormatError, "truncated window archive");
  return m;
}

}  // namespace

void WriteWindowArchive(const std::filesystem::path& path, const WindowSpec& spec,
                        const WindowLayout& layout, std::span<const LabeledWindow> windows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIOFailure, "cannot write " + path.string());
  nlohmann::json h;
  h["k_seconds"] = spec.k_seconds;
  h["fps"] = spec.fps;
  h["horizon_s"] = spec.horizon_s;
  h["min_gap_to_positive_ms"] = spec.min_gap_to_positive_ms;
  h["layout"] = {{"speaking", layout.speaking}, {"gaze_head", layout.gaze_head},
                 {"body_face", layout.body_face}, {"bite", layout.bite}, {"gamma", layout.gamma}};
  h["count"] = windows.size();
  const std::string text = h.dump();
  os.write(kMagic, sizeof kMagic);
  Put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& w : windows) {
    Put<std::uint32_t>(os, static_cast<std::uint32_t>(w.session_id.size()));
    os.write(w.session_id.data(), static_cast<std::streamsize>(w.session_id.size()));
    Put<std::int32_t>(os, w.target_seat);
    Put<std::int64_t>(os, w.anchor_ms);
    Put<std::uint8_t>(os, w.label);
    PutMatrix(os, w.U);
    PutMatrix(os, w.L);
    PutMatrix(os, w.R);
  }
  if (!os) throw Error(ErrorCode::kIOFailure, "failed writing " + path.string());
}

WindowArchive ReadWindowArchive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIOFailure, "cannot read " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw Error(ErrorCode::kFormatError, path.string() + " is not a window archive");
  const auto len = Get<std::uint64_t>(is);
  if (len > (1u << 24)) throw Error(ErrorCode::kFormatError, "corrupt window archive header");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len)))
    throw Error(ErrorCode::kFormatError, "truncated window archive");
  WindowArchive out;
  std::size_t count = 0;
  try {
    const auto h = nlohmann::json::parse(text);
    out.spec.k_seconds = h.at("k_seconds");
    out.spec.fps = h.at("fps");
    out.spec.horizon_s = h.at("horizon_s");
    out.spec.min_gap_to_positive_ms = h.at("min_gap_to_positive_ms");
    const auto& l = h.at("layout");
    out.layout.speaking = l.at("speaking");
    out.layout.gaze_head = l.at("gaze_head");
    out.layout.body_face = l.at("body_face");
    out.layout.bite = l.at("bite");
    out.layout.gamma = l.at("gamma");
    count = h.at("count");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("bad window archive header: ") + e.what());
  }
  out.windows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    LabeledWindow w;
    const auto n = Get<std::uint32_t>(is);
    if (n > 4096) throw Error(ErrorCode::kFormatError, "corrupt session id in window archive");
    w.session_id.resize(n);
    if (!is.read(w.session_id.data(), n)) throw Error(ErrorCode::kFormatError, "truncated window archive");
    w.target_seat = Get<std::int32_t>(is);
    w.anchor_ms = Get<std::int64_t>(is);
    w.label = Get<std::uint8_t>(is);
    w.U = GetMatrix(is);
    w.L = GetMatrix(is);
    w.R = GetMatrix(is);
    out.windows.push_back(std::move(w));
  }
  return out;
}

void WriteDropManifest(std::ostream& os, std::span<const DroppedWindow> dropped) {
  os << "session_id,target_seat,anchor_ms,label,reason\n";
  for (const auto& d : dropped)
    os << d.session_id << ',' << d.target_seat << ',' << d.anchor_ms << ',' << int(d.label) << ','
       << d.reason << '\n';
}

}  // namespace sonnet
