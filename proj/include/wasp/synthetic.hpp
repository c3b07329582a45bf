#pragma once

#include <cstdint>

#include "wasp/data.hpp"

namespace wasp {

/// Planted-shortcut embedding space.
///
/// Class k owns a direction u_k and attribute g owns v_g, all orthonormal.
/// A sample of class y with attribute g is normalize(a*u_y + b*v_g + sigma*eps).
/// Class-name embeddings share a text-modality direction t and leak their
/// class's attribute: normalize(text_offset*t + u_k + text_attr_leak*v_k).
/// With text_offset = text_attr_leak = 0 they are exactly u_k.
struct SyntheticConfig {
    std::uint32_t num_classes = 2;
    std::uint32_t dim = 64;
    std::uint32_t n_per_group = 500;
    double signal_class = 1.0;
    double signal_attr = 1.5;
    double noise_sigma = 0.1;
    /// Fraction of a class's training samples carrying its own attribute.
    double correlation = 1.0;
    double text_offset = 30.0;
    double text_attr_leak = 0.7;
    std::uint32_t n_distractors = 20;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    EmbeddingDataset train;
    EmbeddingDataset val;
    EmbeddingDataset test;
    /// "attribute_0".."attribute_{K-1}" then "distractor_0"...
    ConceptSet concepts;
    /// "class_0".."class_{K-1}".
    ConceptSet class_embs;
    /// Ground-truth directions, K rows each.
    MatrixD class_dirs;
    MatrixD attr_dirs;
    MatrixD text_dir;  // 1 row, empty when text_offset == 0
};

void validate(const SyntheticConfig& cfg);

/// Training count for each attribute of class y; the own attribute receives
/// round-half-up(correlation * K * n_per_group), the rest is spread evenly
/// over the other attributes with the remainder going to the lowest indices.
std::vector<std::uint32_t> train_group_counts(const SyntheticConfig& cfg, std::uint32_t cls);

SyntheticData generate_synthetic(const SyntheticConfig& cfg);

}  // namespace wasp
