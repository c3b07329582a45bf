#include "wasp/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wasp/error.hpp"

namespace wasp {

namespace {

std::uint32_t max_plus_one(const std::optional<std::vector<std::uint32_t>>& v) {
    if (!v || v->empty()) return 0;
    return *std::max_element(v->begin(), v->end()) + 1;
}

}  // namespace

std::uint32_t EmbeddingDataset::class_count() const { return max_plus_one(labels); }
std::uint32_t EmbeddingDataset::attribute_count() const { return max_plus_one(groups); }

const std::vector<std::uint32_t>& EmbeddingDataset::require_labels() const {
    if (!labels) throw Error(ErrorCode::ConfigInvalid, "dataset has no class labels");
    return *labels;
}

void validate(const ConceptSet& concepts) {
    if (concepts.texts.size() != concepts.embeddings.rows()) {
        throw Error(ErrorCode::CountMismatch,
                    std::to_string(concepts.texts.size()) + " texts for " +
                        std::to_string(concepts.embeddings.rows()) + " embedding rows");
    }
    std::set<std::string> seen;
    for (const auto& t : concepts.texts) {
        if (t.empty()) throw Error(ErrorCode::ConfigInvalid, "empty concept text");
        if (!seen.insert(t).second) throw Error(ErrorCode::ConfigInvalid, "duplicate concept text '" + t + "'");
    }
    if (!rows_unit_norm(concepts.embeddings)) {
        throw Error(ErrorCode::ConfigInvalid, "concept embeddings are not unit-norm");
    }
}

Matrix normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        const double norm = l2_norm(row);
        if (norm < kZeroRowTolerance) {
            throw Error(ErrorCode::ZeroRow, "row " + std::to_string(i) + " has zero norm");
        }
        for (auto& x : row) x = static_cast<float>(static_cast<double>(x) / norm);
    }
    return out;
}

EmbeddingDataset normalize(const EmbeddingDataset& ds) {
    EmbeddingDataset out = ds;
    out.embeddings = normalize_rows(ds.embeddings);
    return out;
}

bool rows_unit_norm(const Matrix& m, double tolerance) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (std::abs(l2_norm(m.row(i)) - 1.0) > tolerance) return false;
    }
    return true;
}

EmbeddingDataset make_fully_spurious(const EmbeddingDataset& ds, const GroupSpec& keep) {
    if (!ds.groups) throw Error(ErrorCode::MissingGroups, "dataset has no group labels");
    const auto& labels = ds.require_labels();
    const auto& groups = *ds.groups;
    if (keep.pairs.empty()) throw Error(ErrorCode::ConfigInvalid, "group spec is empty");

    const std::uint32_t n_classes = ds.class_count();
    const std::uint32_t n_attrs = ds.attribute_count();
    std::vector<bool> class_kept(n_classes, false);
    std::set<std::pair<std::uint32_t, std::uint32_t>> kept;
    for (const auto& [cls, attr] : keep.pairs) {
        if (cls >= n_classes || attr >= n_attrs) {
            throw Error(ErrorCode::ConfigInvalid, "group (" + std::to_string(cls) + ", " + std::to_string(attr) +
                                                      ") out of range for " + std::to_string(n_classes) +
                                                      " classes x " + std::to_string(n_attrs) + " attributes");
        }
        class_kept[cls] = true;
        kept.emplace(cls, attr);
    }
    for (std::uint32_t k = 0; k < n_classes; ++k) {
        if (!class_kept[k]) {
            throw Error(ErrorCode::ConfigInvalid, "class " + std::to_string(k) + " has no kept group");
        }
    }

    std::vector<std::size_t> indices;
    for (std::size_t j = 0; j < ds.size(); ++j) {
        if (kept.count({labels[j], groups[j]})) indices.push_back(j);
    }
    if (indices.empty()) throw Error(ErrorCode::EmptyResult, "no sample matches the kept groups");
    return select_rows(ds, indices);
}

EmbeddingDataset select_rows(const EmbeddingDataset& ds, const std::vector<std::size_t>& indices) {
    EmbeddingDataset out;
    out.split = ds.split;
    out.embeddings = Matrix(indices.size(), ds.dim());
    if (ds.labels) out.labels.emplace();
    if (ds.groups) out.groups.emplace();
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t j = indices[r];
        std::ranges::copy(ds.embeddings.row(j), out.embeddings.row(r).begin());
        if (ds.labels) out.labels->push_back((*ds.labels)[j]);
        if (ds.groups) out.groups->push_back((*ds.groups)[j]);
    }
    return out;
}

ConceptSet select_rows(const ConceptSet& concepts, const std::vector<std::size_t>& indices) {
    ConceptSet out;
    out.filtered = concepts.filtered;
    out.embeddings = Matrix(indices.size(), concepts.dim());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        out.texts.push_back(concepts.texts[indices[r]]);
        std::ranges::copy(concepts.embeddings.row(indices[r]), out.embeddings.row(r).begin());
    }
    return out;
}

EmbeddingDataset close_modality_gap(const EmbeddingDataset& ds, const ConceptSet& text_refs) {
    if (ds.dim() != text_refs.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "samples have D=" + std::to_string(ds.dim()) +
                                                      ", text references D=" + std::to_string(text_refs.dim()));
    }
    if (ds.size() == 0 || text_refs.embeddings.rows() == 0) {
        throw Error(ErrorCode::ConfigInvalid, "modality gap needs at least one sample and one text reference");
    }
    const std::size_t dim = ds.dim();
    std::vector<double> half_gap(dim, 0.0);
    for (std::size_t j = 0; j < ds.size(); ++j) {
        auto row = ds.embeddings.row(j);
        for (std::size_t d = 0; d < dim; ++d) half_gap[d] += row[d] / static_cast<double>(ds.size());
    }
    const auto n_text = static_cast<double>(text_refs.embeddings.rows());
    for (std::size_t i = 0; i < text_refs.embeddings.rows(); ++i) {
        auto row = text_refs.embeddings.row(i);
        for (std::size_t d = 0; d < dim; ++d) half_gap[d] -= row[d] / n_text;
    }
    for (auto& g : half_gap) g *= 0.5;

    EmbeddingDataset out = ds;
    for (std::size_t j = 0; j < out.size(); ++j) {
        auto row = out.embeddings.row(j);
        std::vector<double> shifted(dim);
        for (std::size_t d = 0; d < dim; ++d) shifted[d] = static_cast<double>(row[d]) - half_gap[d];
        const double norm = l2_norm(shifted);
        if (norm < kZeroRowTolerance) {
            throw Error(ErrorCode::ZeroRow, "row " + std::to_string(j) + " vanishes after gap shift");
        }
        for (std::size_t d = 0; d < dim; ++d) row[d] = static_cast<float>(shifted[d] / norm);
    }
    return out;
}

}  // namespace wasp
