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

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "vpriv/common/error.hpp"

namespace vpriv {

template <typename E, std::size_t N>
using EnumNames = std::array<std::pair<E, std::string_view>, N>;

template <typename E, std::size_t N>
std::string_view NameOf(const EnumNames<E, N>& names, E value) {
  for (const auto& [v, name] : names) {
    if (v == value) return name;
  }
  return "?";
}

template <typename E, std::size_t N>
std::optional<E> TryParseEnum(const EnumNames<E, N>& names,
                              std::string_view text) {
  for (const auto& [v, name] : names) {
    if (name == text) return v;
  }
  return std::nullopt;
}

template <typename E, std::size_t N>
E ParseEnum(const EnumNames<E, N>& names, std::string_view text,
            ErrorCode code, std::string_view what) {
  if (auto v = TryParseEnum(names, text)) return *v;
  throw Error(code, "unknown " + std::string(what) + " '" + std::string(text) +
                        "'");
}

}  // namespace vpriv
