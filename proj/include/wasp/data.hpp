#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wasp/matrix.hpp"

namespace wasp {

enum class SplitTag { Train, Val, Test };

inline constexpr double kZeroRowTolerance = 1e-12;
inline constexpr double kUnitNormTolerance = 1e-4;

/// Sample embeddings with class labels and optional attribute (group) labels.
///
/// Group labels hold the attribute index of each sample; group-wise metrics
/// key on the (label, attribute) pair.
struct EmbeddingDataset {
    Matrix embeddings;
    std::optional<std::vector<std::uint32_t>> labels;
    std::optional<std::vector<std::uint32_t>> groups;
    SplitTag split = SplitTag::Train;

    std::size_t size() const noexcept { return embeddings.rows(); }
    std::size_t dim() const noexcept { return embeddings.cols(); }
    bool has_labels() const noexcept { return labels.has_value(); }
    bool has_groups() const noexcept { return groups.has_value(); }

    /// max label + 1, or 0 when unlabeled.
    std::uint32_t class_count() const;
    /// max group + 1, or 0 when groups are absent.
    std::uint32_t attribute_count() const;

    const std::vector<std::uint32_t>& require_labels() const;
};

/// Concept texts aligned with their embeddings, row i <-> texts[i].
struct ConceptSet {
    std::vector<std::string> texts;
    Matrix embeddings;
    /// Class-related concepts were removed upstream.
    bool filtered = true;

    std::size_t size() const noexcept { return texts.size(); }
    std::size_t dim() const noexcept { return embeddings.cols(); }
};

/// (class, attribute) pairs to keep.
struct GroupSpec {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
};

/// Checks row/text alignment, unique non-empty texts and unit-norm rows.
void validate(const ConceptSet& concepts);

/// Returns a copy with every row scaled to unit L2 norm. Throws ZeroRow.
EmbeddingDataset normalize(const EmbeddingDataset& ds);
Matrix normalize_rows(const Matrix& m);

bool rows_unit_norm(const Matrix& m, double tolerance = kUnitNormTolerance);

/// Samples whose (label, group) pair is listed in `keep`, order preserved.
EmbeddingDataset make_fully_spurious(const EmbeddingDataset& ds, const GroupSpec& keep);

/// Subset of rows in the given order.
EmbeddingDataset select_rows(const EmbeddingDataset& ds, const std::vector<std::size_t>& indices);
ConceptSet select_rows(const ConceptSet& concepts, const std::vector<std::size_t>& indices);

/// Shifts every row by half the mean image-text gap, then renormalizes.
EmbeddingDataset close_modality_gap(const EmbeddingDataset& ds, const ConceptSet& text_refs);

}  // namespace wasp
