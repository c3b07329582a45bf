#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wasp/data.hpp"
#include "wasp/matrix.hpp"

namespace wasp {

inline constexpr double kClipTemperature = 100.0;
inline constexpr double kWeightNormTolerance = 1e-5;

/// Linear classification layer over unit-norm embeddings.
/// logits = temperature * W x, every row of W unit-norm.
struct LinearProbe {
    Matrix weights;  // K x D
    double temperature = kClipTemperature;
    std::vector<std::string> class_names;

    std::size_t num_classes() const noexcept { return weights.rows(); }
    std::size_t dim() const noexcept { return weights.cols(); }
};

/// Zero-shot probe: row k is the embedding of class name k.
LinearProbe init_probe(const ConceptSet& class_embs, double temperature = kClipTemperature);

/// n x K logits, accumulated in double.
MatrixD forward(const LinearProbe& probe, const Matrix& x);

/// Chain rule through the logits: dL/dW = temperature * dlogits^T X.
MatrixD backward(const LinearProbe& probe, const Matrix& x, const MatrixD& dlogits);

/// argmax per row, ties resolved to the smallest class index.
std::vector<std::uint32_t> predict(const MatrixD& logits);

/// Renormalizes every row of `weights` to unit L2 norm in double precision.
void renormalize_rows(MatrixD& weights);

bool weights_unit_norm(const LinearProbe& probe, double tolerance = kWeightNormTolerance);

/// FNV-1a over K, D and the little-endian weight bytes, as 16 hex digits.
std::string fingerprint(const LinearProbe& probe);

}  // namespace wasp
