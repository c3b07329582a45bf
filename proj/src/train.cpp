#include "wasp/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wasp/error.hpp"
#include "wasp/eval.hpp"

namespace wasp {

std::string_view to_string(TrainMode mode) noexcept {
    switch (mode) {
        case TrainMode::Erm: return "erm";
        case TrainMode::ErmPlusReg: return "erm_plus_reg";
        case TrainMode::GroupDro: return "group_dro";
    }
    return "erm";
}

TrainMode parse_train_mode(std::string_view text) {
    if (text == "erm") return TrainMode::Erm;
    if (text == "erm_plus_reg") return TrainMode::ErmPlusReg;
    if (text == "group_dro") return TrainMode::GroupDro;
    throw Error(ErrorCode::ConfigInvalid, "unknown training mode '" + std::string(text) + "'");
}

void validate(const TrainConfig& cfg) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); };
    if (!(cfg.learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(cfg.weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (cfg.batch_size < 1) fail("batch_size must be >= 1");
    if (cfg.patience < 1) fail("patience must be >= 1");
    if (!(cfg.alpha >= 0.0)) fail("alpha must be >= 0");
    if (!(cfg.groupdro_step >= 0.0)) fail("groupdro_step must be >= 0");
}

WeightLoss erm_objective(const LinearProbe& probe, const Matrix& x, std::span<const std::uint32_t> labels,
                         std::span<const double> class_weights, const ConceptSet* sc_embs, double alpha) {
    const auto ce = loss_erm(forward(probe, x), labels, class_weights);
    WeightLoss out{ce.value, backward(probe, x, ce.grad_logits)};
    if (sc_embs != nullptr && alpha > 0.0) {
        const auto reg = loss_reg(probe, *sc_embs);
        out.value += alpha * reg.value;
        auto g = out.grad_weights.flat();
        auto rg = reg.grad_weights.flat();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += alpha * rg[i];
    }
    return out;
}

namespace {

// Softmax-CE gradient with an explicit weight per sample.
MatrixD weighted_ce_grad(const MatrixD& logits, std::span<const std::uint32_t> labels,
                         std::span<const double> sample_weights) {
    MatrixD grad(logits.rows(), logits.cols(), 0.0);
    for (std::size_t j = 0; j < logits.rows(); ++j) {
        auto row = logits.row(j);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double z : row) sum += std::exp(z - mx);
        auto g = grad.row(j);
        for (std::size_t k = 0; k < row.size(); ++k) {
            const double p = std::exp(row[k] - mx) / sum;
            g[k] = sample_weights[j] * (p - (k == labels[j] ? 1.0 : 0.0));
        }
    }
    return grad;
}

void check_inputs(const LinearProbe& probe, const EmbeddingDataset& train_ds, const EmbeddingDataset& val_ds,
                  const TrainConfig& cfg, const ConceptSet* sc_embs) {
    validate(cfg);
    if (probe.num_classes() == 0) throw Error(ErrorCode::EmptyClassSet, "probe has no classes");
    for (const auto* ds : {&train_ds, &val_ds}) {
        if (ds->dim() != probe.dim()) {
            throw Error(ErrorCode::DimensionMismatch,
                        "data has D=" + std::to_string(ds->dim()) + ", probe D=" + std::to_string(probe.dim()));
        }
        for (auto y : ds->require_labels()) {
            if (y >= probe.num_classes()) {
                throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(y) + " with " +
                                                            std::to_string(probe.num_classes()) + " classes");
            }
        }
    }
    if (train_ds.size() == 0) throw Error(ErrorCode::ConfigInvalid, "empty training split");
    if (val_ds.size() == 0) throw Error(ErrorCode::ConfigInvalid, "empty validation split");
    if (cfg.mode == TrainMode::ErmPlusReg) {
        if (sc_embs == nullptr || sc_embs->embeddings.rows() == 0) {
            throw Error(ErrorCode::ConfigInvalid, "erm_plus_reg needs spurious-concept embeddings");
        }
        if (sc_embs->dim() != probe.dim()) throw Error(ErrorCode::DimensionMismatch, "concept dimension differs");
    }
    if (cfg.mode == TrainMode::GroupDro && !train_ds.has_groups()) {
        throw Error(ErrorCode::MissingGroups, "group_dro needs group labels on the training split");
    }
}

}  // namespace

TrainReport train(const LinearProbe& probe, const EmbeddingDataset& train_ds, const EmbeddingDataset& val_ds,
                  const TrainConfig& cfg, const ConceptSet* sc_embs) {
    check_inputs(probe, train_ds, val_ds, cfg, sc_embs);

    TrainReport report;
    report.config = cfg;
    report.final_probe = probe;
    if (cfg.max_epochs == 0) return report;

    const auto& labels = *train_ds.labels;
    const std::size_t n = train_ds.size();
    const std::size_t n_classes = probe.num_classes();
    const auto class_weights = balanced_class_weights(labels, n_classes);

    // GroupDRO groups are (class, attribute) pairs
    const std::size_t n_attrs = train_ds.has_groups() ? train_ds.attribute_count() : 1;
    std::vector<double> group_weights;
    if (cfg.mode == TrainMode::GroupDro) {
        group_weights.assign(n_classes * n_attrs, 1.0 / static_cast<double>(n_classes * n_attrs));
    }

    const AdamWParams hp{cfg.learning_rate, cfg.weight_decay};
    AdamWState opt(n_classes * probe.dim());
    LinearProbe current = probe;
    MatrixD weights(n_classes, probe.dim());

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    double best_acc = -1.0;
    std::size_t stale = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - start);
            Matrix x(count, probe.dim());
            std::vector<std::uint32_t> y(count);
            std::vector<std::uint32_t> group_ids(count);
            for (std::size_t b = 0; b < count; ++b) {
                const std::size_t j = order[start + b];
                std::ranges::copy(train_ds.embeddings.row(j), x.row(b).begin());
                y[b] = labels[j];
                if (!group_weights.empty()) {
                    group_ids[b] = static_cast<std::uint32_t>(labels[j] * n_attrs + (*train_ds.groups)[j]);
                }
            }

            WeightLoss batch;
            if (cfg.mode == TrainMode::GroupDro) {
                const auto logits = forward(current, x);
                const auto ce = per_sample_cross_entropy(logits, y);
                auto dro = loss_groupdro(ce, group_ids, group_weights, cfg.groupdro_step);
                group_weights = std::move(dro.weights);
                batch.value = dro.value;
                batch.grad_weights = backward(current, x, weighted_ce_grad(logits, y, dro.sample_weights));
            } else {
                const ConceptSet* reg = cfg.mode == TrainMode::ErmPlusReg ? sc_embs : nullptr;
                batch = erm_objective(current, x, y, class_weights, reg, cfg.alpha);
            }
            epoch_loss += batch.value * static_cast<double>(count) / static_cast<double>(n);

            std::ranges::copy(current.weights.flat(), weights.flat().begin());
            adamw_step(weights, opt, batch.grad_weights, hp);
            std::ranges::transform(weights.flat(), current.weights.flat().begin(),
                                   [](double w) { return static_cast<float>(w); });
            if (!weights_unit_norm(current)) {
                throw Error(ErrorCode::InvariantViolated, "weight rows left the unit sphere after a step");
            }
        }

        const double acc = class_balanced_accuracy(current, val_ds);
        report.history.push_back({epoch, epoch_loss, acc});
        if (acc > best_acc) {
            best_acc = acc;
            report.best_epoch = epoch;
            report.final_probe = current;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    return report;
}

}  // namespace wasp
