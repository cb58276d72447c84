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

#include "ncbir/lognormal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ncbir/error.hpp"

namespace ncbir {

double LogNormalFit::pdf(double x) const {
    if (x <= 0.0 || sigma <= 0.0) return 0.0;
    const double z = (std::log(x) - mu) / sigma;
    return std::exp(-0.5 * z * z) / (x * sigma * std::sqrt(2.0 * std::numbers::pi));
}

double LogNormalFit::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (sigma <= 0.0) return std::log(x) >= mu ? 1.0 : 0.0;
    return 0.5 * std::erfc(-(std::log(x) - mu) / (sigma * std::numbers::sqrt2));
}

LogNormalFit lognormal_mle_fit(std::span<const double> samples) {
    if (samples.size() < 2) {
        fail(ErrorCategory::Argument, "log-normal fit needs at least 2 samples, got " +
                                          std::to_string(samples.size()));
    }
    // Reduce in sorted order so the fit is bit-identical under permutation.
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double x : sorted) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            fail(ErrorCategory::Domain, "log-normal fit requires finite positive samples, got " +
                                            std::to_string(x));
        }
        sum += std::log(x);
    }
    const double n = static_cast<double>(samples.size());
    const double mu = sum / n;
    double ss = 0.0;
    for (double x : sorted) {
        const double d = std::log(x) - mu;
        ss += d * d;
    }
    return {mu, std::sqrt(ss / n)};
}

} // namespace ncbir
