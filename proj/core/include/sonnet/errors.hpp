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

#include <stdexcept>
#include <string>
#include <string_view>

namespace sonnet {

enum class ErrorCode {
  kMalformedRow,
  kIllegalValueForKind,
  kNonPositiveDuration,
  kInvalidConfig,
  kInvalidArgument,
  kEmptyStream,
  kNonIntegerDecimation,
  kInvalidSpec,
  kShapeMismatch,
  kEmptyDataset,
  kLengthMismatch,
  kEmpty,
  kEmptySplit,
  kDivergedLoss,
  kTooFewSessions,
  kUnknownMask,
  kNonPositiveResult,
  kMissingModel,
  kMissingMouthEvents,
  kUnknownKind,
  kNoEvents,
  kIOFailure,
  kFormatError,
  kUnknownCommand,
  kConfigError,
};

// Stable, machine-readable name ("MalformedRow", "ShapeMismatch", ...).
std::string_view ErrorCodeName(ErrorCode code);

// Every failure raised by the library carries an ErrorCode so callers (and
// the CLI's error record) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sonnet
