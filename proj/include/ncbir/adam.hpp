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

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ncbir {

// Adaptive-moment update over a flat parameter vector, with bias-corrected
// first and second moment estimates.
class Adam {
public:
    explicit Adam(std::size_t n_params, double learning_rate, double beta1 = 0.9,
                  double beta2 = 0.999, double epsilon = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon),
          m_(n_params, 0.0), v_(n_params, 0.0) {}

    void step(std::span<double> params, std::span<const double> grads) {
        ++t_;
        const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i];
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
            const double m_hat = m_[i] / correction1;
            const double v_hat = v_[i] / correction2;
            params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
        }
    }

    std::size_t steps() const noexcept { return t_; }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

} // namespace ncbir
