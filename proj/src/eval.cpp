#include "wasp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <thread>

#include "wasp/error.hpp"
#include "wasp/losses.hpp"

namespace wasp {

namespace {

// Runs fn(begin, end) over contiguous shards of [0, n).
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn fn) {
    threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> workers;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([=] { fn(begin, end); });
    }
}

std::vector<std::uint32_t> sharded_predictions(const Matrix& x, unsigned threads,
                                               const std::function<MatrixD(const Matrix&)>& logits_fn) {
    std::vector<std::uint32_t> out(x.rows());
    parallel_for(x.rows(), threads, [&](std::size_t begin, std::size_t end) {
        Matrix shard(end - begin, x.cols());
        for (std::size_t j = begin; j < end; ++j) std::ranges::copy(x.row(j), shard.row(j - begin).begin());
        const auto preds = predict(logits_fn(shard));
        std::ranges::copy(preds, out.begin() + static_cast<std::ptrdiff_t>(begin));
    });
    return out;
}

}  // namespace

MetricsReport compute_metrics(std::span<const std::uint32_t> predictions, const EmbeddingDataset& ds) {
    const auto& labels = ds.require_labels();
    if (predictions.size() != labels.size()) throw Error(ErrorCode::CountMismatch, "prediction count != label count");
    if (labels.empty()) throw Error(ErrorCode::EmptyResult, "cannot score an empty dataset");

    std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> per_class;  // correct, total
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<std::size_t, std::size_t>> per_group;
    std::size_t correct = 0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const bool hit = predictions[j] == labels[j];
        correct += hit;
        auto& c = per_class[labels[j]];
        c.first += hit;
        ++c.second;
        if (ds.groups) {
            auto& g = per_group[{labels[j], (*ds.groups)[j]}];
            g.first += hit;
            ++g.second;
        }
    }

    MetricsReport out;
    out.average_accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    double cba = 0.0;
    for (const auto& [cls, ct] : per_class) {
        const double acc = static_cast<double>(ct.first) / static_cast<double>(ct.second);
        out.per_class.push_back({cls, acc, ct.second});
        cba += acc;
    }
    out.class_balanced_accuracy = cba / static_cast<double>(per_class.size());
    if (ds.groups) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& [key, ct] : per_group) {
            const double acc = static_cast<double>(ct.first) / static_cast<double>(ct.second);
            out.per_group.push_back({key.first, key.second, acc, ct.second});
            worst = std::min(worst, acc);
        }
        out.worst_group_accuracy = worst;
    }
    return out;
}

MetricsReport evaluate(const LinearProbe& probe, const EmbeddingDataset& ds, unsigned threads) {
    if (ds.dim() != probe.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "data has D=" + std::to_string(ds.dim()) + ", probe D=" + std::to_string(probe.dim()));
    }
    const auto preds = sharded_predictions(ds.embeddings, threads, [&](const Matrix& x) { return forward(probe, x); });
    return compute_metrics(preds, ds);
}

double class_balanced_accuracy(const LinearProbe& probe, const EmbeddingDataset& ds) {
    return evaluate(probe, ds).class_balanced_accuracy;
}

PromptSet make_prompt_set(ConceptSet prompts, std::vector<std::uint32_t> classes, std::size_t num_classes) {
    if (classes.size() != prompts.embeddings.rows()) {
        throw Error(ErrorCode::CountMismatch, "prompt class assignments do not match prompt rows");
    }
    std::vector<std::size_t> per_class(num_classes, 0);
    for (auto c : classes) {
        if (c >= num_classes) throw Error(ErrorCode::LabelOutOfRange, "prompt class " + std::to_string(c));
        ++per_class[c];
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (per_class[k] == 0) throw Error(ErrorCode::EmptyPromptGroup, "class " + std::to_string(k) + " has no prompt");
    }
    if (!rows_unit_norm(prompts.embeddings)) throw Error(ErrorCode::ConfigInvalid, "prompt embeddings are not unit-norm");
    return PromptSet{std::move(prompts), std::move(classes), num_classes};
}

MatrixD maxpool_logits(const PromptSet& prompts, const Matrix& x, double temperature) {
    if (x.cols() != prompts.prompts.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "prompt and sample dimensions differ");
    }
    MatrixD out(x.rows(), prompts.num_classes, -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < x.rows(); ++j) {
        for (std::size_t p = 0; p < prompts.classes.size(); ++p) {
            const double s = temperature * dot(prompts.prompts.embeddings.row(p), x.row(j));
            double& slot = out(j, prompts.classes[p]);
            slot = std::max(slot, s);
        }
    }
    return out;
}

MetricsReport zero_shot_maxpool(const PromptSet& prompts, const EmbeddingDataset& ds, double temperature,
                                unsigned threads) {
    if (!(temperature > 0.0)) throw Error(ErrorCode::ConfigInvalid, "temperature must be positive");
    const auto preds = sharded_predictions(ds.embeddings, threads,
                                           [&](const Matrix& x) { return maxpool_logits(prompts, x, temperature); });
    return compute_metrics(preds, ds);
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::CountMismatch, "series lengths differ");
    if (a.size() < 2) return std::nullopt;
    const auto n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0, raw_a = 0.0, raw_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
        raw_a += a[i] * a[i];
        raw_b += b[i] * b[i];
    }
    // variance below rounding noise of the raw second moment counts as constant
    constexpr double kRelVar = 1e-20;
    if (saa <= kRelVar * raw_a || sbb <= kRelVar * raw_b) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<ConceptCorrelation> loss_similarity_correlation(const LinearProbe& probe, const EmbeddingDataset& ds,
                                                            const ConceptSet& concepts) {
    const auto& labels = ds.require_labels();
    if (concepts.dim() != ds.dim()) throw Error(ErrorCode::DimensionMismatch, "concept and sample dimensions differ");
    const auto losses = per_sample_cross_entropy(forward(probe, ds.embeddings), labels);

    std::vector<ConceptCorrelation> out;
    std::vector<double> sims(ds.size());
    for (std::size_t i = 0; i < concepts.embeddings.rows(); ++i) {
        for (std::size_t j = 0; j < ds.size(); ++j) sims[j] = dot(concepts.embeddings.row(i), ds.embeddings.row(j));
        out.push_back({concepts.texts[i], pearson(losses, sims)});
    }
    return out;
}

}  // namespace wasp
