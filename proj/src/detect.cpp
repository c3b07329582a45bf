#include "wasp/detect.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>

#include "wasp/error.hpp"

namespace wasp {

std::string_view to_string(Polarity polarity) noexcept {
    return polarity == Polarity::Positive ? "positive" : "negative";
}

Polarity parse_polarity(std::string_view text) {
    if (text == "positive") return Polarity::Positive;
    if (text == "negative") return Polarity::Negative;
    throw Error(ErrorCode::ConfigInvalid, "unknown polarity '" + std::string(text) + "'");
}

MatrixD similarities(const LinearProbe& probe, const ConceptSet& concepts) {
    if (concepts.embeddings.rows() == 0) throw Error(ErrorCode::EmptyConceptSet, "no concepts to score");
    if (concepts.dim() != probe.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "concepts have D=" + std::to_string(concepts.dim()) + ", probe D=" + std::to_string(probe.dim()));
    }
    MatrixD sims(probe.num_classes(), concepts.embeddings.rows());
    for (std::size_t k = 0; k < sims.rows(); ++k) {
        for (std::size_t i = 0; i < sims.cols(); ++i) sims(k, i) = dot(probe.weights.row(k), concepts.embeddings.row(i));
    }
    return sims;
}

MatrixD positive_scores(const MatrixD& sims) {
    MatrixD out(sims.rows(), sims.cols());
    for (std::size_t i = 0; i < sims.cols(); ++i) {
        double lowest = sims(0, i);
        for (std::size_t k = 1; k < sims.rows(); ++k) lowest = std::min(lowest, sims(k, i));
        for (std::size_t k = 0; k < sims.rows(); ++k) out(k, i) = sims(k, i) - lowest;
    }
    return out;
}

ScoreTable rank_scores(const MatrixD& scores, Polarity polarity) {
    ScoreTable table;
    table.polarity = polarity;
    table.classes.resize(scores.rows());
    for (std::size_t k = 0; k < scores.rows(); ++k) {
        auto& list = table.classes[k];
        list.reserve(scores.cols());
        for (std::size_t i = 0; i < scores.cols(); ++i) list.push_back({i, scores(k, i)});
        std::ranges::sort(list, [](const ScoredConcept& a, const ScoredConcept& b) {
            return a.score != b.score ? a.score > b.score : a.index < b.index;
        });
    }
    return table;
}

ScoreTable score_positive(const LinearProbe& probe, const ConceptSet& concepts) {
    return rank_scores(positive_scores(similarities(probe, concepts)), Polarity::Positive);
}

ScoreTable score_negative(const LinearProbe& probe, const ConceptSet& concepts) {
    auto sims = similarities(probe, concepts);
    for (auto& s : sims.flat()) s = -s;
    return rank_scores(sims, Polarity::Negative);
}

std::vector<double> smooth_scores(std::span<const double> sorted_scores, std::size_t r) {
    if (r < 1) throw Error(ErrorCode::WindowTooLarge, "window must be >= 1");
    if (r > sorted_scores.size()) {
        throw Error(ErrorCode::WindowTooLarge,
                    "window " + std::to_string(r) + " exceeds " + std::to_string(sorted_scores.size()) + " scores");
    }
    std::vector<double> out(sorted_scores.size() - r + 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = i; j < i + r; ++j) sum += sorted_scores[j];
        out[i] = sum / static_cast<double>(r);
    }
    return out;
}

std::size_t dynamic_threshold(std::span<const double> smoothed, std::size_t r) {
    const std::size_t p = smoothed.size();
    if (p < 2) throw Error(ErrorCode::TooFewScores, "need at least 2 smoothed scores, got " + std::to_string(p));
    const double first = smoothed.front();
    const double drop = first - smoothed.back();
    const auto span_len = static_cast<double>(p - 1);

    // deviation times (p - 1), shifted by the constant drop: both endpoints evaluate to exactly 0
    std::size_t best_i = 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i <= p; ++i) {
        const double dev = (first - smoothed[i - 1]) * span_len - static_cast<double>(i - 1) * drop;
        if (dev > best) {
            best = dev;
            best_i = i;
        }
    }
    return r / 2 + best_i;
}

namespace {

std::size_t dynamic_cut(std::span<const ScoredConcept> list, std::size_t r) {
    std::vector<double> scores(list.size());
    std::ranges::transform(list, scores.begin(), [](const ScoredConcept& s) { return s.score; });
    const auto smoothed = smooth_scores(scores, r);
    if (smoothed.size() == 1) return std::min(list.size(), r / 2 + 1);
    return dynamic_threshold(smoothed, r);
}

}  // namespace

SCReport select_scs(const ScoreTable& table, const ConceptSet& concepts, const Strategy& strategy) {
    const std::size_t q = concepts.size();
    if (q == 0) throw Error(ErrorCode::EmptyConceptSet, "no concepts to select from");
    if (concepts.embeddings.rows() != q) throw Error(ErrorCode::CountMismatch, "concept texts and rows differ");

    SCReport report;
    report.strategy = strategy;
    report.polarity = table.polarity;

    std::size_t fixed_count = 0;
    if (const auto* dyn = std::get_if<DynamicStrategy>(&strategy)) {
        if (dyn->r < 1) throw Error(ErrorCode::ConfigInvalid, "r must be >= 1");
        report.effective_r = std::min(dyn->r, q);
        if (dyn->r > q) {
            report.r_fallback = true;
            report.warnings.push_back("r=" + std::to_string(dyn->r) + " exceeds " + std::to_string(q) +
                                      " concepts; using r=" + std::to_string(q));
        }
    } else if (const auto* top = std::get_if<TopKStrategy>(&strategy)) {
        if (top->k < 1 || top->k > q) {
            throw Error(ErrorCode::ConfigInvalid, "top-k " + std::to_string(top->k) + " outside [1, " +
                                                      std::to_string(q) + "]");
        }
        fixed_count = top->k;
    } else {
        const double f = std::get<TopFractionStrategy>(strategy).fraction;
        if (!(f > 0.0 && f <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "top fraction must lie in (0, 1]");
        fixed_count = static_cast<std::size_t>(std::ceil(f * static_cast<double>(q) - 1e-9));
        fixed_count = std::clamp<std::size_t>(fixed_count, 1, q);
    }

    for (std::size_t k = 0; k < table.classes.size(); ++k) {
        const auto& list = table.classes[k];
        if (list.size() != q) throw Error(ErrorCode::CountMismatch, "score table does not cover every concept");
        ClassSCs cls;
        cls.name = "class_" + std::to_string(k);
        cls.m_k = report.effective_r > 0 ? dynamic_cut(list, report.effective_r) : fixed_count;
        for (std::size_t i = 0; i < cls.m_k; ++i) {
            cls.selected.push_back({list[i].index, concepts.texts[list[i].index], list[i].score});
        }
        report.classes.push_back(std::move(cls));
    }
    return report;
}

SCReport detect(const LinearProbe& probe, const ConceptSet& concepts, const Strategy& strategy, Polarity polarity,
                double noise_floor_sigmas) {
    const auto table =
        polarity == Polarity::Positive ? score_positive(probe, concepts) : score_negative(probe, concepts);
    auto report = select_scs(table, concepts, strategy);
    if (!concepts.filtered) report.warnings.push_back("concepts were not filtered for class-related terms");

    const auto root_dim = std::sqrt(static_cast<double>(probe.dim()));
    for (std::size_t k = 0; k < report.classes.size(); ++k) {
        auto& cls = report.classes[k];
        if (k < probe.class_names.size()) cls.name = probe.class_names[k];
        // spread of a random unit concept projected on the scored direction
        double spread = 1.0 / root_dim;
        if (polarity == Polarity::Positive) {
            double widest = 0.0;
            for (std::size_t j = 0; j < probe.num_classes(); ++j) {
                double sq = 0.0;
                for (std::size_t d = 0; d < probe.dim(); ++d) {
                    const double diff = static_cast<double>(probe.weights(k, d)) - probe.weights(j, d);
                    sq += diff * diff;
                }
                widest = std::max(widest, std::sqrt(sq));
            }
            spread = widest / root_dim;
        }
        cls.noise_floor = noise_floor_sigmas * spread;
        cls.near_zero = table.classes[k].front().score <= cls.noise_floor;
    }
    report.probe_fingerprint = fingerprint(probe);
    return report;
}

ConceptSet selected_concepts(const SCReport& report, const ConceptSet& concepts) {
    std::vector<std::size_t> indices;
    for (const auto& cls : report.classes) {
        for (const auto& s : cls.selected) indices.push_back(s.index);
    }
    std::ranges::sort(indices);
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    return select_rows(concepts, indices);
}

ConceptSet random_concepts(const ConceptSet& concepts, std::size_t count, std::uint64_t seed) {
    if (count > concepts.size()) throw Error(ErrorCode::ConfigInvalid, "cannot draw more concepts than available");
    std::vector<std::size_t> all(concepts.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> picked;
    std::mt19937_64 rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
    return select_rows(concepts, picked);
}

}  // namespace wasp
