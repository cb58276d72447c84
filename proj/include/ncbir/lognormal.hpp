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

#include <span>

namespace ncbir {

// Maximum-likelihood log-normal parameters: mu is the mean of ln(x) and
// sigma the population standard deviation of ln(x).
struct LogNormalFit {
    double mu = 0.0;
    double sigma = 0.0;

    // Density and distribution function; a zero-sigma fit degenerates to a
    // point mass at exp(mu), so pdf is 0 and cdf a step there.
    double pdf(double x) const;
    double cdf(double x) const;
};

/// Requires n >= 2 and every sample strictly positive.
LogNormalFit lognormal_mle_fit(std::span<const double> samples);

} // namespace ncbir
