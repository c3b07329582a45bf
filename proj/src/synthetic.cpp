#include "wasp/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "wasp/error.hpp"

namespace wasp {

void validate(const SyntheticConfig& cfg) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); };
    if (cfg.num_classes < 1) fail("num_classes must be >= 1");
    if (cfg.n_per_group < 1) fail("n_per_group must be >= 1");
    const std::uint32_t needed = 2 * cfg.num_classes + (cfg.text_offset != 0.0 ? 1 : 0);
    if (cfg.dim < needed) {
        fail("dim " + std::to_string(cfg.dim) + " cannot hold " + std::to_string(needed) + " orthogonal directions");
    }
    if (!(cfg.correlation >= 0.0 && cfg.correlation <= 1.0)) fail("correlation must lie in [0, 1]");
    if (!(cfg.noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
    if (!std::isfinite(cfg.signal_class) || !std::isfinite(cfg.signal_attr) || !std::isfinite(cfg.text_offset) ||
        !std::isfinite(cfg.text_attr_leak)) {
        fail("non-finite coefficient");
    }
    if (cfg.num_classes == 1 && cfg.correlation < 1.0) {
        // a single class has no other attribute to receive the remainder
        fail("correlation < 1 needs at least two classes");
    }
}

std::vector<std::uint32_t> train_group_counts(const SyntheticConfig& cfg, std::uint32_t cls) {
    const std::uint32_t k = cfg.num_classes;
    const std::uint32_t total = k * cfg.n_per_group;
    const auto own = static_cast<std::uint32_t>(std::floor(cfg.correlation * total + 0.5));
    std::vector<std::uint32_t> counts(k, 0);
    counts[cls] = own;
    if (k == 1) return counts;
    const std::uint32_t rest = total - own;
    std::uint32_t slot = 0;
    for (std::uint32_t g = 0; g < k; ++g) {
        if (g == cls) continue;
        counts[g] = rest / (k - 1) + (slot < rest % (k - 1) ? 1 : 0);
        ++slot;
    }
    return counts;
}

namespace {

class Sampler {
public:
    Sampler(const SyntheticConfig& cfg, const MatrixD& u, const MatrixD& v, std::mt19937_64& rng)
        : cfg_(cfg), u_(u), v_(v), rng_(rng) {}

    void append(EmbeddingDataset& ds, std::uint32_t cls, std::uint32_t attr, std::uint32_t count) {
        std::vector<double> x(cfg_.dim);
        for (std::uint32_t s = 0; s < count; ++s) {
            for (std::uint32_t d = 0; d < cfg_.dim; ++d) {
                x[d] = cfg_.signal_class * u_(cls, d) + cfg_.signal_attr * v_(attr, d) + cfg_.noise_sigma * normal_(rng_);
            }
            push_normalized(x);
            ds.labels->push_back(cls);
            ds.groups->push_back(attr);
        }
    }

    Matrix take() {
        Matrix m(rows_.size() / cfg_.dim, cfg_.dim);
        std::copy(rows_.begin(), rows_.end(), m.flat().begin());
        rows_.clear();
        return m;
    }

private:
    void push_normalized(const std::vector<double>& x) {
        const double norm = l2_norm(x);
        if (norm < kZeroRowTolerance) throw Error(ErrorCode::ZeroRow, "synthetic sample collapsed to zero");
        for (double xi : x) rows_.push_back(static_cast<float>(xi / norm));
    }

    const SyntheticConfig& cfg_;
    const MatrixD& u_;
    const MatrixD& v_;
    std::mt19937_64& rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::vector<float> rows_;
};

EmbeddingDataset make_split(Sampler& sampler, const SyntheticConfig& cfg, SplitTag tag, bool balanced) {
    EmbeddingDataset ds;
    ds.split = tag;
    ds.labels.emplace();
    ds.groups.emplace();
    for (std::uint32_t y = 0; y < cfg.num_classes; ++y) {
        const auto counts = balanced ? std::vector<std::uint32_t>(cfg.num_classes, cfg.n_per_group)
                                     : train_group_counts(cfg, y);
        for (std::uint32_t g = 0; g < cfg.num_classes; ++g) sampler.append(ds, y, g, counts[g]);
    }
    ds.embeddings = sampler.take();
    return ds;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    validate(cfg);
    const std::uint32_t k = cfg.num_classes;
    const std::uint32_t dim = cfg.dim;
    const bool with_text = cfg.text_offset != 0.0;
    const std::uint32_t n_dirs = 2 * k + (with_text ? 1 : 0);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::MatrixXd gaussian(dim, n_dirs);
    for (std::uint32_t c = 0; c < n_dirs; ++c) {
        for (std::uint32_t r = 0; r < dim; ++r) gaussian(r, c) = normal(rng);
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, n_dirs);

    SyntheticData out;
    out.class_dirs = MatrixD(k, dim);
    out.attr_dirs = MatrixD(k, dim);
    for (std::uint32_t i = 0; i < k; ++i) {
        for (std::uint32_t d = 0; d < dim; ++d) {
            out.class_dirs(i, d) = q(d, i);
            out.attr_dirs(i, d) = q(d, k + i);
        }
    }
    if (with_text) {
        out.text_dir = MatrixD(1, dim);
        for (std::uint32_t d = 0; d < dim; ++d) out.text_dir(0, d) = q(d, 2 * k);
    }

    Sampler sampler(cfg, out.class_dirs, out.attr_dirs, rng);
    out.train = make_split(sampler, cfg, SplitTag::Train, false);
    out.val = make_split(sampler, cfg, SplitTag::Val, true);
    out.test = make_split(sampler, cfg, SplitTag::Test, true);

    const double concept_sigma = cfg.noise_sigma / 4.0;
    const std::size_t n_concepts = k + cfg.n_distractors;
    out.concepts.embeddings = Matrix(n_concepts, dim);
    std::vector<double> x(dim);
    auto store = [&](Matrix& m, std::size_t row) {
        const double norm = l2_norm(x);
        for (std::uint32_t d = 0; d < dim; ++d) m(row, d) = static_cast<float>(x[d] / norm);
    };
    for (std::uint32_t i = 0; i < k; ++i) {
        for (std::uint32_t d = 0; d < dim; ++d) x[d] = out.attr_dirs(i, d) + concept_sigma * normal(rng);
        store(out.concepts.embeddings, i);
        out.concepts.texts.push_back("attribute_" + std::to_string(i));
    }
    for (std::uint32_t j = 0; j < cfg.n_distractors; ++j) {
        for (std::uint32_t d = 0; d < dim; ++d) x[d] = normal(rng);
        store(out.concepts.embeddings, k + j);
        out.concepts.texts.push_back("distractor_" + std::to_string(j));
    }

    out.class_embs.embeddings = Matrix(k, dim);
    for (std::uint32_t i = 0; i < k; ++i) {
        for (std::uint32_t d = 0; d < dim; ++d) {
            x[d] = out.class_dirs(i, d) + cfg.text_attr_leak * out.attr_dirs(i, d);
            if (with_text) x[d] += cfg.text_offset * out.text_dir(0, d);
        }
        store(out.class_embs.embeddings, i);
        out.class_embs.texts.push_back("class_" + std::to_string(i));
    }
    return out;
}

}  // namespace wasp
