// Copyright 2026 The ncbir Authors
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
#include <string_view>

namespace ncbir {

// Failure categories. The CLI prints category_name() as the machine-parsable
// prefix of its single-line error message.
enum class ErrorCategory {
    Domain,
    Argument,
    Shape,
    EmptyDataset,
    Divergence,
    Retrieval,
    Protocol,
    Build,
    Lookup,
    Config,
    Io,
    Format,
    Join,
    InsufficientStructure,
};

std::string_view category_name(ErrorCategory category);

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
    throw Error(category, message);
}

} // namespace ncbir
