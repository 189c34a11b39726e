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

#include <stdexcept>
#include <string>
#include <string_view>

namespace vpriv {

// Every fault raised by the library carries one of these codes. Validation
// results that are values (e.g. validate_item) do not use this type.
enum class ErrorCode {
  kInvalidItem,
  kInvalidParam,
  kSyntaxError,
  kSchemaError,
  kCatalogError,
  kWeakSecret,
  kEmptyAttributes,
  kPolicyParseError,
  kPolicyNotSatisfied,
  kIntegrityError,
  kRuleFileError,
  kUnknownPet,
  kNoViablePet,
  kDeniedByPolicy,
  kStaleData,
  kRateLimited,
  kPipelineError,
  kTypeMismatch,
  kOrderViolation,
  kUnknownTopic,
  kParseError,
  kMonotonicityError,
  kMissingItem,
  kTransport,
  kServerRejected,
  kUnknownProvider,
  kUnknownCategory,
  kDegeneratePosterior,
  kAlreadyInstalled,
  kNotFound,
  kIoError,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidItem: return "InvalidItem";
    case ErrorCode::kInvalidParam: return "InvalidParam";
    case ErrorCode::kSyntaxError: return "SyntaxError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kCatalogError: return "CatalogError";
    case ErrorCode::kWeakSecret: return "WeakSecret";
    case ErrorCode::kEmptyAttributes: return "EmptyAttributes";
    case ErrorCode::kPolicyParseError: return "PolicyParseError";
    case ErrorCode::kPolicyNotSatisfied: return "PolicyNotSatisfied";
    case ErrorCode::kIntegrityError: return "IntegrityError";
    case ErrorCode::kRuleFileError: return "RuleFileError";
    case ErrorCode::kUnknownPet: return "UnknownPet";
    case ErrorCode::kNoViablePet: return "NoViablePet";
    case ErrorCode::kDeniedByPolicy: return "DeniedByPolicy";
    case ErrorCode::kStaleData: return "StaleData";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kPipelineError: return "PipelineError";
    case ErrorCode::kTypeMismatch: return "TypeMismatch";
    case ErrorCode::kOrderViolation: return "OrderViolation";
    case ErrorCode::kUnknownTopic: return "UnknownTopic";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMonotonicityError: return "MonotonicityError";
    case ErrorCode::kMissingItem: return "MissingItem";
    case ErrorCode::kTransport: return "Transport";
    case ErrorCode::kServerRejected: return "ServerRejected";
    case ErrorCode::kUnknownProvider: return "UnknownProvider";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kDegeneratePosterior: return "DegeneratePosterior";
    case ErrorCode::kAlreadyInstalled: return "AlreadyInstalled";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace vpriv
