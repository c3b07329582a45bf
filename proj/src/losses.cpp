#include "wasp/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wasp/error.hpp"

namespace wasp {

namespace {

void check_labels(const MatrixD& logits, std::span<const std::uint32_t> labels) {
    if (labels.size() != logits.rows()) {
        throw Error(ErrorCode::CountMismatch, std::to_string(labels.size()) + " labels for " +
                                                  std::to_string(logits.rows()) + " logit rows");
    }
    for (auto y : labels) {
        if (y >= logits.cols()) {
            throw Error(ErrorCode::LabelOutOfRange,
                        "label " + std::to_string(y) + " with " + std::to_string(logits.cols()) + " classes");
        }
    }
}

// log-softmax of one row into `out`
void log_softmax(std::span<const double> row, std::vector<double>& out) {
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - mx);
    const double lse = mx + std::log(sum);
    out.resize(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) out[k] = row[k] - lse;
}

}  // namespace

std::vector<double> per_sample_cross_entropy(const MatrixD& logits, std::span<const std::uint32_t> labels) {
    check_labels(logits, labels);
    std::vector<double> out(logits.rows());
    std::vector<double> lp;
    for (std::size_t j = 0; j < logits.rows(); ++j) {
        log_softmax(logits.row(j), lp);
        out[j] = -lp[labels[j]];
    }
    return out;
}

std::vector<double> balanced_class_weights(std::span<const std::uint32_t> labels, std::size_t num_classes) {
    std::vector<std::size_t> counts(num_classes, 0);
    for (auto y : labels) {
        if (y >= num_classes) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y));
        ++counts[y];
    }
    std::vector<double> w(num_classes, 1.0);
    const auto n = static_cast<double>(labels.size());
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (counts[k] > 0) w[k] = n / (static_cast<double>(num_classes) * static_cast<double>(counts[k]));
    }
    return w;
}

LogitLoss loss_erm(const MatrixD& logits, std::span<const std::uint32_t> labels, std::span<const double> class_weights) {
    check_labels(logits, labels);
    if (class_weights.size() != logits.cols()) {
        throw Error(ErrorCode::CountMismatch, "class weight count does not match class count");
    }
    for (double w : class_weights) {
        if (!(w > 0.0)) throw Error(ErrorCode::ConfigInvalid, "class weights must be strictly positive");
    }

    LogitLoss out;
    out.grad_logits = MatrixD(logits.rows(), logits.cols(), 0.0);
    double weight_sum = 0.0;
    for (auto y : labels) weight_sum += class_weights[y];
    if (weight_sum == 0.0) return out;

    std::vector<double> lp;
    double total = 0.0;
    for (std::size_t j = 0; j < logits.rows(); ++j) {
        log_softmax(logits.row(j), lp);
        const double w = class_weights[labels[j]];
        total += w * -lp[labels[j]];
        auto g = out.grad_logits.row(j);
        for (std::size_t k = 0; k < lp.size(); ++k) {
            g[k] = w * (std::exp(lp[k]) - (k == labels[j] ? 1.0 : 0.0)) / weight_sum;
        }
    }
    out.value = total / weight_sum;
    return out;
}

WeightLoss loss_reg(const LinearProbe& probe, const ConceptSet& sc_embs) {
    if (sc_embs.embeddings.rows() == 0) throw Error(ErrorCode::EmptyConceptSet, "regularizer needs at least one concept");
    if (sc_embs.dim() != probe.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "concepts have D=" + std::to_string(sc_embs.dim()) + ", probe D=" + std::to_string(probe.dim()));
    }
    const std::size_t n_classes = probe.num_classes();
    const std::size_t n_concepts = sc_embs.embeddings.rows();
    const double tau2 = probe.temperature * probe.temperature;

    WeightLoss out;
    out.grad_weights = MatrixD(n_classes, probe.dim(), 0.0);
    std::vector<double> sims(n_classes);
    for (std::size_t b = 0; b < n_concepts; ++b) {
        auto concept_row = sc_embs.embeddings.row(b);
        double mean = 0.0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            sims[k] = dot(probe.weights.row(k), concept_row);
            mean += sims[k];
        }
        mean /= static_cast<double>(n_classes);
        double sq = 0.0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            const double dev = sims[k] - mean;
            sq += dev * dev;
            const double coeff = 2.0 * tau2 * dev / static_cast<double>(n_classes * n_concepts);
            auto gk = out.grad_weights.row(k);
            for (std::size_t d = 0; d < gk.size(); ++d) gk[d] += coeff * concept_row[d];
        }
        out.value += tau2 * sq / static_cast<double>(n_classes);
    }
    out.value /= static_cast<double>(n_concepts);
    return out;
}

GroupDroResult loss_groupdro(std::span<const double> per_sample_losses, std::span<const std::uint32_t> groups,
                             std::span<const double> state, double step) {
    if (per_sample_losses.size() != groups.size()) {
        throw Error(ErrorCode::CountMismatch, "per-sample losses and groups differ in length");
    }
    const std::size_t n_groups = state.size();
    double state_sum = 0.0;
    for (double q : state) {
        if (!(q > 0.0)) throw Error(ErrorCode::ConfigInvalid, "group weights must be positive");
        state_sum += q;
    }
    if (std::abs(state_sum - 1.0) > 1e-6) throw Error(ErrorCode::ConfigInvalid, "group weights must sum to 1");

    std::vector<double> group_loss(n_groups, 0.0);
    std::vector<std::size_t> group_count(n_groups, 0);
    for (std::size_t j = 0; j < groups.size(); ++j) {
        if (groups[j] >= n_groups) throw Error(ErrorCode::LabelOutOfRange, "group " + std::to_string(groups[j]));
        group_loss[groups[j]] += per_sample_losses[j];
        ++group_count[groups[j]];
    }
    double max_exponent = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < n_groups; ++g) {
        if (group_count[g] == 0) continue;
        group_loss[g] /= static_cast<double>(group_count[g]);
        max_exponent = std::max(max_exponent, step * group_loss[g]);
    }

    GroupDroResult out;
    out.weights.assign(state.begin(), state.end());
    if (!std::isfinite(max_exponent)) {
        out.sample_weights.assign(groups.size(), 0.0);
        return out;
    }
    // shifting every exponent by the same constant leaves the normalized q unchanged
    for (std::size_t g = 0; g < n_groups; ++g) {
        const double exponent = group_count[g] ? step * group_loss[g] : 0.0;
        out.weights[g] *= std::exp(exponent - max_exponent);
    }
    double total = 0.0;
    for (double q : out.weights) total += q;
    for (double& q : out.weights) q /= total;

    for (std::size_t g = 0; g < n_groups; ++g) {
        if (group_count[g]) out.value += out.weights[g] * group_loss[g];
    }
    out.sample_weights.resize(groups.size());
    for (std::size_t j = 0; j < groups.size(); ++j) {
        out.sample_weights[j] = out.weights[groups[j]] / static_cast<double>(group_count[groups[j]]);
    }
    return out;
}

}  // namespace wasp
