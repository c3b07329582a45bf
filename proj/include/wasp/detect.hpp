#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wasp/data.hpp"
#include "wasp/probe.hpp"

namespace wasp {

enum class Polarity { Positive, Negative };

std::string_view to_string(Polarity polarity) noexcept;
Polarity parse_polarity(std::string_view text);

struct ScoredConcept {
    std::size_t index = 0;
    double score = 0.0;
};

/// Per class, every concept sorted by descending score (ties: ascending index).
struct ScoreTable {
    Polarity polarity = Polarity::Positive;
    std::vector<std::vector<ScoredConcept>> classes;
};

/// K x q similarities w_k . c_i.
MatrixD similarities(const LinearProbe& probe, const ConceptSet& concepts);

/// s+_{k,i} = S_{k,i} - min_k' S_{k',i}; the min includes k itself.
MatrixD positive_scores(const MatrixD& sims);

ScoreTable score_positive(const LinearProbe& probe, const ConceptSet& concepts);
/// s-_{k,i} = -w_k . c_i.
ScoreTable score_negative(const LinearProbe& probe, const ConceptSet& concepts);

/// Sorts each class row of a K x q score matrix into a table.
ScoreTable rank_scores(const MatrixD& scores, Polarity polarity);

/// Mean over every full window of r consecutive scores; length q - r + 1.
std::vector<double> smooth_scores(std::span<const double> sorted_scores, std::size_t r);

/// Knee of a non-increasing smoothed curve: floor(r/2) + the 1-based index
/// where the curve falls furthest below the chord joining its endpoints.
/// Ties go to the smallest index.
std::size_t dynamic_threshold(std::span<const double> smoothed, std::size_t r);

struct DynamicStrategy {
    std::size_t r = 5;
};
struct TopKStrategy {
    std::size_t k = 30;
};
struct TopFractionStrategy {
    double fraction = 0.2;
};
using Strategy = std::variant<DynamicStrategy, TopKStrategy, TopFractionStrategy>;

struct SelectedConcept {
    std::size_t index = 0;
    std::string text;
    double score = 0.0;
};

struct ClassSCs {
    std::string name;
    std::size_t m_k = 0;
    std::vector<SelectedConcept> selected;
    /// Top score does not clear the random-direction noise floor.
    bool near_zero = false;
    double noise_floor = 0.0;
};

struct SCReport {
    Strategy strategy;
    Polarity polarity = Polarity::Positive;
    /// Window actually used by the dynamic strategy (r is clamped to q).
    std::size_t effective_r = 0;
    bool r_fallback = false;
    std::vector<ClassSCs> classes;
    std::string probe_fingerprint;
    std::vector<std::string> warnings;
};

SCReport select_scs(const ScoreTable& table, const ConceptSet& concepts, const Strategy& strategy);

/// Score, smooth, threshold and select for every class of a trained probe.
SCReport detect(const LinearProbe& probe, const ConceptSet& concepts, const Strategy& strategy,
                Polarity polarity = Polarity::Positive, double noise_floor_sigmas = 3.0);

/// Union of every class's selection, ascending concept index.
ConceptSet selected_concepts(const SCReport& report, const ConceptSet& concepts);

/// `count` concepts drawn uniformly without replacement, ascending index.
ConceptSet random_concepts(const ConceptSet& concepts, std::size_t count, std::uint64_t seed);

}  // namespace wasp
