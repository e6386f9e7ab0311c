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

#include "sonnet/errors.hpp"

namespace sonnet {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kIllegalValueForKind: return "IllegalValueForKind";
    case ErrorCode::kNonPositiveDuration: return "NonPositiveDuration";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyStream: return "EmptyStream";
    case ErrorCode::kNonIntegerDecimation: return "NonIntegerDecimation";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmpty: return "Empty";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kTooFewSessions: return "TooFewSessions";
    case ErrorCode::kUnknownMask: return "UnknownMask";
    case ErrorCode::kNonPositiveResult: return "NonPositiveResult";
    case ErrorCode::kMissingModel: return "MissingModel";
    case ErrorCode::kMissingMouthEvents: return "MissingMouthEvents";
    case ErrorCode::kUnknownKind: return "UnknownKind";
    case ErrorCode::kNoEvents: return "NoEvents";
    case ErrorCode::kIOFailure: return "IOFailure";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kUnknownCommand: return "UnknownCommand";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

}  // namespace sonnet
