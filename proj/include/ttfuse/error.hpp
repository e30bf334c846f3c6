// Copyright 2026 The ttfuse Authors. All Rights Reserved.
//
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

namespace ttfuse {

enum class ErrorKind {
  kInvalidArgument,
  kShapeMismatch,
  kConfig,
  kNotFound,
  kIo,
  kUnsupportedFormat,
  kTruncated,
  kCorrupt,
  kBadMagic,
  kBadChecksum,
  kBadVersion,
  kEmptyDataset,
  kNumeric,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit code for a failure of the given kind: 1 usage/config, 2 data,
// 3 numeric.
int exit_code_for(ErrorKind kind);

}  // namespace ttfuse
