#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wasp/data.hpp"
#include "wasp/probe.hpp"

namespace wasp {

struct ClassAccuracy {
    std::uint32_t cls = 0;
    double accuracy = 0.0;
    std::size_t count = 0;
};

struct GroupAccuracy {
    std::uint32_t cls = 0;
    std::uint32_t attribute = 0;
    double accuracy = 0.0;
    std::size_t count = 0;
};

struct MetricsReport {
    double average_accuracy = 0.0;
    /// Unweighted mean over the classes present in the data.
    double class_balanced_accuracy = 0.0;
    std::vector<ClassAccuracy> per_class;
    /// One entry per (class, attribute) pair present; empty without group labels.
    std::vector<GroupAccuracy> per_group;
    std::optional<double> worst_group_accuracy;
};

MetricsReport compute_metrics(std::span<const std::uint32_t> predictions, const EmbeddingDataset& ds);

/// Argmax-logit predictions scored against the labels; `threads` shards the
/// forward pass, results do not depend on it.
MetricsReport evaluate(const LinearProbe& probe, const EmbeddingDataset& ds, unsigned threads = 1);

double class_balanced_accuracy(const LinearProbe& probe, const EmbeddingDataset& ds);

/// Prompt embeddings grouped by class.
struct PromptSet {
    ConceptSet prompts;
    std::vector<std::uint32_t> classes;  // class of each prompt row
    std::size_t num_classes = 0;
};

/// Validates that every class owns at least one unit-norm prompt.
PromptSet make_prompt_set(ConceptSet prompts, std::vector<std::uint32_t> classes, std::size_t num_classes);

/// n x K: temperature * max over class k's prompts of prompt.x.
MatrixD maxpool_logits(const PromptSet& prompts, const Matrix& x, double temperature);

MetricsReport zero_shot_maxpool(const PromptSet& prompts, const EmbeddingDataset& ds, double temperature,
                                unsigned threads = 1);

/// Pearson correlation; nullopt when either series has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct ConceptCorrelation {
    std::string text;
    std::optional<double> r;
};

/// Per concept: Pearson r between each sample's unweighted cross-entropy under
/// `probe` and the sample's similarity to the concept.
std::vector<ConceptCorrelation> loss_similarity_correlation(const LinearProbe& probe, const EmbeddingDataset& ds,
                                                            const ConceptSet& concepts);

}  // namespace wasp
