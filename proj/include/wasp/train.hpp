#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wasp/adamw.hpp"
#include "wasp/data.hpp"
#include "wasp/losses.hpp"
#include "wasp/probe.hpp"

namespace wasp {

enum class TrainMode { Erm, ErmPlusReg, GroupDro };

std::string_view to_string(TrainMode mode) noexcept;
TrainMode parse_train_mode(std::string_view text);

struct TrainConfig {
    double learning_rate = 1e-4;
    double weight_decay = 1e-5;
    std::size_t batch_size = 1024;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    double alpha = 0.1;
    TrainMode mode = TrainMode::Erm;
    double groupdro_step = 0.01;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_class_balanced_accuracy = 0.0;
};

struct TrainReport {
    /// Epoch whose weights were kept; 0 when no epoch ran.
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> history;
    LinearProbe final_probe;
    TrainConfig config;
};

/// L_ERM + alpha * mean_b L_reg(b) on one batch and its gradient w.r.t. W.
/// `sc_embs` may be null (or alpha 0) for plain ERM.
WeightLoss erm_objective(const LinearProbe& probe, const Matrix& x, std::span<const std::uint32_t> labels,
                         std::span<const double> class_weights, const ConceptSet* sc_embs, double alpha);

/// Trains the probe with AdamW, renormalizing W after every step and keeping
/// the weights of the epoch with the best class-balanced validation accuracy.
/// Stops after `patience` epochs without improvement.
TrainReport train(const LinearProbe& probe, const EmbeddingDataset& train_ds, const EmbeddingDataset& val_ds,
                  const TrainConfig& cfg, const ConceptSet* sc_embs = nullptr);

}  // namespace wasp
