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

#pragma once

// Binary container for extracted windows plus a CSV manifest of the windows
// that were dropped. Layout (little-endian):
//   8 bytes  magic "SNTWIN01"
//   u64 + n  JSON header (window spec, layout, count)
//   per window: u32 id length, session id, i32 seat, i64 anchor_ms, u8 label,
//               then U, L, R each as i64 rows, i64 cols, rows*cols f64 row-major

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sonnet/pipeline.hpp"

namespace sonnet {

struct WindowArchive {
  WindowSpec spec;
  WindowLayout layout;
  std::vector<LabeledWindow> windows;
};

void WriteWindowArchive(const std::filesystem::path& path, const WindowSpec& spec,
                        const WindowLayout& layout, std::span<const LabeledWindow> windows);
// Throws Error{IOFailure} or Error{FormatError}.
WindowArchive ReadWindowArchive(const std::filesystem::path& path);

// session_id,target_seat,anchor_ms,label,reason
void WriteDropManifest(std::ostream& os, std::span<const DroppedWindow> dropped);

}  // namespace sonnet
