#include "wasp/adamw.hpp"

#include <cmath>

#include "wasp/error.hpp"
#include "wasp/probe.hpp"

namespace wasp {

void adamw_update(std::span<double> params, std::span<const double> grads, AdamWState& state,
                  const AdamWParams& hp) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
        params.size() != state.second_moment.size()) {
        throw Error(ErrorCode::DimensionMismatch, "optimizer shapes do not match");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGradient, "gradient contains NaN or Inf");
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(hp.beta1, t);
    const double bias2 = 1.0 - std::pow(hp.beta2, t);
    const double decay = 1.0 - hp.learning_rate * hp.weight_decay;

    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = hp.beta1 * m + (1.0 - hp.beta1) * g;
        v = hp.beta2 * v + (1.0 - hp.beta2) * g * g;
        const double m_hat = m / bias1;
        const double v_hat = v / bias2;
        params[i] = params[i] * decay - hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
    }
}

void adamw_step(MatrixD& weights, AdamWState& state, const MatrixD& grads, const AdamWParams& hp) {
    if (weights.rows() != grads.rows() || weights.cols() != grads.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "gradient shape does not match weights");
    }
    adamw_update(weights.flat(), grads.flat(), state, hp);
    renormalize_rows(weights);
}

}  // namespace wasp
