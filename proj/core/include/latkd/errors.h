// Copyright 2026 The LATKD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LATKD_ERRORS_H_
#define LATKD_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace latkd {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kIo,
  kParse,
  kSchema,
  kData,
  kIntegrity,
  kTraining,
  kRegistryGap,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure raised by the library. The code is stable and is what the CLI
// reports in its machine-readable error document.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace latkd

#endif  // LATKD_ERRORS_H_
