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

#include "ncbir/error.hpp"

namespace ncbir {

std::string_view category_name(ErrorCategory category) {
    switch (category) {
    case ErrorCategory::Domain: return "domain";
    case ErrorCategory::Argument: return "argument";
    case ErrorCategory::Shape: return "shape";
    case ErrorCategory::EmptyDataset: return "empty-dataset";
    case ErrorCategory::Divergence: return "divergence";
    case ErrorCategory::Retrieval: return "retrieval";
    case ErrorCategory::Protocol: return "protocol";
    case ErrorCategory::Build: return "build";
    case ErrorCategory::Lookup: return "lookup";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Format: return "format";
    case ErrorCategory::Join: return "join";
    case ErrorCategory::InsufficientStructure: return "insufficient-structure";
    }
    return "unknown";
}

} // namespace ncbir
