#include "wasp/probe.hpp"

#include <bit>
#include <cmath>
#include <cstdio>

#include "wasp/error.hpp"

namespace wasp {

LinearProbe init_probe(const ConceptSet& class_embs, double temperature) {
    if (class_embs.embeddings.rows() == 0) throw Error(ErrorCode::EmptyClassSet, "no class embeddings");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorCode::ConfigInvalid, "temperature must be positive, got " + std::to_string(temperature));
    }
    if (class_embs.texts.size() != class_embs.embeddings.rows()) {
        throw Error(ErrorCode::CountMismatch, "class names do not match class embedding rows");
    }
    if (!rows_unit_norm(class_embs.embeddings)) {
        throw Error(ErrorCode::ConfigInvalid, "class embeddings are not unit-norm");
    }
    return LinearProbe{class_embs.embeddings, temperature, class_embs.texts};
}

MatrixD forward(const LinearProbe& probe, const Matrix& x) {
    if (x.cols() != probe.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "inputs have D=" + std::to_string(x.cols()) + ", probe D=" + std::to_string(probe.dim()));
    }
    MatrixD logits(x.rows(), probe.num_classes());
    for (std::size_t j = 0; j < x.rows(); ++j) {
        for (std::size_t k = 0; k < probe.num_classes(); ++k) {
            logits(j, k) = probe.temperature * dot(probe.weights.row(k), x.row(j));
        }
    }
    return logits;
}

MatrixD backward(const LinearProbe& probe, const Matrix& x, const MatrixD& dlogits) {
    MatrixD grad(probe.num_classes(), probe.dim(), 0.0);
    for (std::size_t j = 0; j < x.rows(); ++j) {
        auto xj = x.row(j);
        for (std::size_t k = 0; k < probe.num_classes(); ++k) {
            const double g = probe.temperature * dlogits(j, k);
            if (g == 0.0) continue;
            auto gk = grad.row(k);
            for (std::size_t d = 0; d < xj.size(); ++d) gk[d] += g * xj[d];
        }
    }
    return grad;
}

std::vector<std::uint32_t> predict(const MatrixD& logits) {
    std::vector<std::uint32_t> out(logits.rows(), 0);
    for (std::size_t j = 0; j < logits.rows(); ++j) {
        auto row = logits.row(j);
        std::size_t best = 0;
        for (std::size_t k = 1; k < row.size(); ++k) {
            if (row[k] > row[best]) best = k;
        }
        out[j] = static_cast<std::uint32_t>(best);
    }
    return out;
}

void renormalize_rows(MatrixD& weights) {
    for (std::size_t k = 0; k < weights.rows(); ++k) {
        auto row = weights.row(k);
        const double norm = l2_norm(row);
        if (norm < kZeroRowTolerance) throw Error(ErrorCode::ZeroRow, "weight row " + std::to_string(k) + " vanished");
        for (auto& w : row) w /= norm;
    }
}

bool weights_unit_norm(const LinearProbe& probe, double tolerance) {
    return rows_unit_norm(probe.weights, tolerance);
}

std::string fingerprint(const LinearProbe& probe) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_u32 = [&](std::uint32_t v) {
        for (int shift = 0; shift < 32; shift += 8) {
            h ^= (v >> shift) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    mix_u32(static_cast<std::uint32_t>(probe.num_classes()));
    mix_u32(static_cast<std::uint32_t>(probe.dim()));
    for (float w : probe.weights.flat()) mix_u32(std::bit_cast<std::uint32_t>(w));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace wasp
