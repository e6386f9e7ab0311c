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

// Checkpoint layout (little-endian):
//   8 bytes   magic "SNTCKPT1"
//   u32       format version
//   u64 + n   JSON header: {"spec": ..., "metadata": ...}
//   u64       parameter count
//   per parameter: u32 name length, name, i64 rows, i64 cols, rows*cols f64
// Doubles are stored raw, so a reload reproduces forward outputs exactly.

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "sonnet/errors.hpp"
#include "sonnet/models.hpp"

namespace sonnet {
namespace {

constexpr char kMagic[8] = {'S', 'N', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void Put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw Error(ErrorCode::kFormatError, "truncated checkpoint");
  return v;
}

std::string GetString(std::istream& is, std::uint64_t n) {
  if (n > (1u << 30)) throw Error(ErrorCode::kFormatError, "corrupt checkpoint string length");
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n)))
    throw Error(ErrorCode::kFormatError, "truncated checkpoint");
  return s;
}

}  // namespace

void SaveCheckpoint(const TrainedModel& m, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIOFailure, "cannot write " + path.string());
  nlohmann::json header;
  header["spec"] = nlohmann::json::parse(ModelSpecToJson(m.spec()));
  header["metadata"] = {{"epochs_run", m.metadata.epochs_run},
                        {"best_epoch", m.metadata.best_epoch},
                        {"best_val_loss", m.metadata.best_val_loss},
                        {"seed", m.metadata.seed},
                        {"trained", m.metadata.trained}};
  const std::string text = header.dump();
  os.write(kMagic, sizeof kMagic);
  Put<std::uint32_t>(os, kVersion);
  Put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto params = m.Params();
  Put<std::uint64_t>(os, params.size());
  for (const auto* p : params) {
    Put<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    Put<std::int64_t>(os, p->value.rows());
    Put<std::int64_t>(os, p->value.cols());
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!os) throw Error(ErrorCode::kIOFailure, "failed writing " + path.string());
}

TrainedModel LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIOFailure, "cannot read " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw Error(ErrorCode::kFormatError, path.string() + " is not a model checkpoint");
  const auto version = Get<std::uint32_t>(is);
  if (version != kVersion)
    throw Error(ErrorCode::kFormatError, "unsupported checkpoint version " + std::to_string(version));
  const std::string text = GetString(is, Get<std::uint64_t>(is));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, std::string("bad checkpoint header: ") + e.what());
  }
  TrainedModel m(ModelSpecFromJson(header.at("spec").dump()));
  const auto& md = header.at("metadata");
  m.metadata.epochs_run = md.at("epochs_run");
  m.metadata.best_epoch = md.at("best_epoch");
  m.metadata.best_val_loss = md.at("best_val_loss");
  m.metadata.seed = md.at("seed");
  m.metadata.trained = md.at("trained");
  auto params = m.Params();
  if (Get<std::uint64_t>(is) != params.size())
    throw Error(ErrorCode::kFormatError, "checkpoint parameter count does not match its spec");
  for (auto* p : params) {
    const std::string name = GetString(is, Get<std::uint32_t>(is));
    const auto rows = Get<std::int64_t>(is);
    const auto cols = Get<std::int64_t>(is);
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols())
      throw Error(ErrorCode::kFormatError, "checkpoint parameter '" + name + "' does not match spec");
    if (!is.read(reinterpret_cast<char*>(p->value.data()),
                 static_cast<std::streamsize>(p->value.size() * sizeof(double))))
      throw Error(ErrorCode::kFormatError, "truncated checkpoint");
  }
  return m;
}

}  // namespace sonnet
