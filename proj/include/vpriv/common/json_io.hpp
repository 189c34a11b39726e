// Copyright 2026 The vpriv Authors
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

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "vpriv/common/error.hpp"

namespace vpriv {

using Json = nlohmann::json;
// Key-ordered JSON keeps serialized reports byte-stable.
using OrderedJson = nlohmann::ordered_json;

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void WriteFile(const std::filesystem::path& path,
                      const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << content;
}

// Parses JSON text, mapping syntax errors to the given code.
inline Json ParseJson(const std::string& text,
                      ErrorCode code = ErrorCode::kSyntaxError) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(code, e.what());
  }
}

inline Json LoadJsonFile(const std::filesystem::path& path,
                         ErrorCode code = ErrorCode::kSyntaxError) {
  return ParseJson(ReadFile(path), code);
}

}  // namespace vpriv
