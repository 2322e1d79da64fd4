// Copyright 2026 The SqueezePass Authors. All Rights Reserved.
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

namespace squeezepass {

// Base error for all failures raised by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed graph, file, or argument. The CLI maps this to exit code 2.
struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// A rewrite pass could not be applied. The CLI maps this to exit code 3.
struct PassError : Error {
  PassError(const std::string& pass, const std::string& node, const std::string& msg)
      : Error(pass + ": node '" + node + "': " + msg), pass_name(pass), node_id(node) {}
  std::string pass_name;
  std::string node_id;
};

}  // namespace squeezepass
