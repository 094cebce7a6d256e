// Copyright 2026 The riskprune Authors
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

namespace riskprune {

// Error categories map one-to-one onto C API status codes and CLI exit codes,
// so a caller can distinguish "file missing" from "bad line 17" from "your
// request makes no statistical sense" without parsing message text.
enum class ErrorCategory {
  io,
  parse,
  domain,
  invalid_argument,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string message)
      : std::runtime_error(std::move(message)), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void throw_io(std::string msg) {
  throw Error(ErrorCategory::io, std::move(msg));
}

[[noreturn]] inline void throw_parse(std::string msg) {
  throw Error(ErrorCategory::parse, std::move(msg));
}

[[noreturn]] inline void throw_domain(std::string msg) {
  throw Error(ErrorCategory::domain, std::move(msg));
}

[[noreturn]] inline void throw_invalid(std::string msg) {
  throw Error(ErrorCategory::invalid_argument, std::move(msg));
}

}  // namespace riskprune
