#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wasp/matrix.hpp"

namespace wasp {

struct AdamWParams {
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamWState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;

    explicit AdamWState(std::size_t parameter_count = 0)
        : first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}
};

/// Decoupled weight decay followed by a bias-corrected Adam update, in place.
void adamw_update(std::span<double> params, std::span<const double> grads, AdamWState& state,
                  const AdamWParams& hp);

/// AdamW step on a probe weight matrix followed by row-wise L2 renormalization.
/// Throws NonFiniteGradient before touching any state.
void adamw_step(MatrixD& weights, AdamWState& state, const MatrixD& grads, const AdamWParams& hp);

}  // namespace wasp
