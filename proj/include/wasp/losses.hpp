#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wasp/data.hpp"
#include "wasp/matrix.hpp"
#include "wasp/probe.hpp"

namespace wasp {

struct LogitLoss {
    double value = 0.0;
    MatrixD grad_logits;  // n x K
};

struct WeightLoss {
    double value = 0.0;
    MatrixD grad_weights;  // K x D
};

/// Unweighted softmax cross-entropy of each row.
std::vector<double> per_sample_cross_entropy(const MatrixD& logits, std::span<const std::uint32_t> labels);

/// n / (K * count_k); classes absent from `labels` get weight 1.
std::vector<double> balanced_class_weights(std::span<const std::uint32_t> labels, std::size_t num_classes);

/// Class-weighted mean cross-entropy, normalized by the sum of applied weights.
LogitLoss loss_erm(const MatrixD& logits, std::span<const std::uint32_t> labels, std::span<const double> class_weights);

/// Similarity-equalizing regularizer, averaged over concepts.
///
/// For concept b: (tau^2 / K) * sum_k (w_k.b - sg(mean_j w_j.b))^2. The mean is
/// held constant when differentiating.
WeightLoss loss_reg(const LinearProbe& probe, const ConceptSet& sc_embs);

struct GroupDroResult {
    double value = 0.0;
    std::vector<double> weights;         // updated q, sums to 1
    std::vector<double> sample_weights;  // q_g / n_g for each sample of group g
};

/// One exponentiated-gradient step on the group weights q, then the q-weighted
/// sum of per-group mean losses. Groups absent from the batch keep their q
/// (before renormalization) and contribute nothing.
GroupDroResult loss_groupdro(std::span<const double> per_sample_losses, std::span<const std::uint32_t> groups,
                             std::span<const double> state, double step);

}  // namespace wasp
