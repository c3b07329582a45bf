#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "wasp/detect.hpp"
#include "wasp/synthetic.hpp"
#include "wasp/train.hpp"

using namespace wasp;
using testing::matrix;
using testing::thrown_code;

namespace {

std::vector<double> scores_of(const std::vector<ScoredConcept>& list) {
    std::vector<double> out;
    for (const auto& s : list) out.push_back(s.score);
    return out;
}

}  // namespace

TEST_SUITE("scores") {
    TEST_CASE("positive score hand example") {
        const auto p = testing::probe(matrix({{1, 0}, {0, 1}}));
        const auto table = score_positive(p, testing::concepts(matrix({{0.6f, 0.8f}})));
        CHECK(table.classes[0][0].score == doctest::Approx(0.0).epsilon(1e-7));
        CHECK(table.classes[1][0].score == doctest::Approx(0.2).epsilon(1e-6));
    }

    TEST_CASE("negative score hand example") {
        const auto p = testing::probe(matrix({{1, 0}, {0, 1}}));
        const auto table = score_negative(p, testing::concepts(matrix({{0.6f, 0.8f}, {-1, 0}})));
        CHECK(table.polarity == Polarity::Negative);
        // class 0: antipodal concept ranks first with score 1
        CHECK(table.classes[0][0].index == 1);
        CHECK(table.classes[0][0].score == doctest::Approx(1.0));
        CHECK(table.classes[0][1].score == doctest::Approx(-0.6).epsilon(1e-6));
        CHECK(table.classes[1][0].index == 1);
        CHECK(table.classes[1][1].score == doctest::Approx(-0.8).epsilon(1e-6));
    }

    TEST_CASE("single class scores zero everywhere") {
        std::mt19937_64 rng(1);
        const auto p = testing::probe(testing::random_unit_rows(1, 6, rng));
        const auto table = score_positive(p, testing::concepts(testing::random_unit_rows(9, 6, rng)));
        for (const auto& s : table.classes[0]) CHECK(s.score == 0.0);
    }

    TEST_CASE("positive scores are nonnegative with a zero per concept") {
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 50; ++trial) {
            const auto p = testing::probe(testing::random_unit_rows(1 + trial % 6, 10, rng));
            const auto c = testing::concepts(testing::random_unit_rows(15, 10, rng));
            const auto s = positive_scores(similarities(p, c));
            for (std::size_t i = 0; i < s.cols(); ++i) {
                bool has_zero = false;
                for (std::size_t k = 0; k < s.rows(); ++k) {
                    CHECK(s(k, i) >= 0.0);
                    has_zero = has_zero || s(k, i) == 0.0;
                }
                CHECK(has_zero);
            }
        }
    }

    TEST_CASE("positive scores depend only on similarity differences") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> normal;
        MatrixD sims(4, 7);
        for (auto& v : sims.flat()) v = normal(rng);
        auto shifted = sims;
        for (std::size_t i = 0; i < 7; ++i) {
            const double c = 10.0 * normal(rng);
            for (std::size_t k = 0; k < 4; ++k) shifted(k, i) += c;
        }
        const auto a = positive_scores(sims);
        const auto b = positive_scores(shifted);
        for (std::size_t i = 0; i < a.flat().size(); ++i) CHECK(a.flat()[i] == doctest::Approx(b.flat()[i]).epsilon(1e-12));
    }

    TEST_CASE("rank order is descending score then ascending index") {
        MatrixD scores(1, 5);
        const double v[] = {0.2, 0.5, 0.2, 0.9, 0.5};
        std::copy(std::begin(v), std::end(v), scores.flat().begin());
        const auto table = rank_scores(scores, Polarity::Positive);
        std::vector<std::size_t> order;
        for (const auto& s : table.classes[0]) order.push_back(s.index);
        CHECK(order == std::vector<std::size_t>{3, 1, 4, 0, 2});
    }
}

TEST_SUITE("threshold") {
    TEST_CASE("smoothing hand example") {
        const std::vector<double> s{1.0, 0.9, 0.8, 0.2, 0.1};
        const auto out = smooth_scores(s, 3);
        REQUIRE(out.size() == 3);
        CHECK(out[0] == doctest::Approx(0.9).epsilon(1e-12));
        CHECK(out[1] == doctest::Approx(1.9 / 3).epsilon(1e-12));
        CHECK(out[2] == doctest::Approx(1.1 / 3).epsilon(1e-12));
        CHECK(smooth_scores(s, 1) == s);
        const auto flat = smooth_scores(std::vector<double>(8, 0.3), 4);
        CHECK(flat.size() == 5);
        for (double v : flat) CHECK(v == doctest::Approx(0.3));
        CHECK(thrown_code([&] { smooth_scores(s, 6); }) == ErrorCode::WindowTooLarge);
    }

    TEST_CASE("knee of the five-score example is 4") {
        const std::vector<double> s{1.0, 0.9, 0.8, 0.2, 0.1};
        CHECK(dynamic_threshold(s, 1) == 4);
    }

    TEST_CASE("collinear scores tie at the first index") {
        std::vector<double> line;
        for (int i = 0; i < 10; ++i) line.push_back(1.0 - 0.125 * i);
        CHECK(dynamic_threshold(line, 1) == 1);
        CHECK(dynamic_threshold(line, 5) == 3);
        CHECK(dynamic_threshold(std::vector<double>(6, 0.4), 4) == 3);
    }

    TEST_CASE("fewer than two smoothed scores") {
        CHECK(thrown_code([&] { dynamic_threshold(std::vector<double>{1.0}, 1); }) == ErrorCode::TooFewScores);
    }

    TEST_CASE("threshold is invariant to positive scaling") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<double> s(2 + trial % 40);
            for (auto& v : s) v = unit(rng);
            std::ranges::sort(s, std::greater<>());
            const std::size_t r = 1 + trial % 7;
            const double lambda = std::ldexp(1.0, trial % 11 - 5);
            auto scaled = s;
            for (auto& v : scaled) v *= lambda;
            CHECK(dynamic_threshold(s, r) == dynamic_threshold(scaled, r));
        }
    }
}

TEST_SUITE("selection") {
    ConceptSet ramp(std::size_t q) {
        ConceptSet c;
        c.embeddings = Matrix(q, 2, 0.0f);
        for (std::size_t i = 0; i < q; ++i) {
            c.texts.push_back("concept " + std::to_string(i));
            c.embeddings(i, 0) = 1.0f;
        }
        return c;
    }

    ScoreTable table_from(const std::vector<double>& scores) {
        MatrixD m(1, scores.size());
        std::copy(scores.begin(), scores.end(), m.flat().begin());
        return rank_scores(m, Polarity::Positive);
    }

    TEST_CASE("dynamic r=1 keeps the first four of the example") {
        const auto report = select_scs(table_from({1.0, 0.9, 0.8, 0.2, 0.1}), ramp(5), DynamicStrategy{1});
        CHECK(report.classes[0].m_k == 4);
        REQUIRE(report.classes[0].selected.size() == 4);
        CHECK(report.classes[0].selected[3].text == "concept 3");
        CHECK(report.effective_r == 1);
        CHECK_FALSE(report.r_fallback);
    }

    TEST_CASE("top-k of all concepts keeps the full sorted list") {
        const std::vector<double> s{0.1, 0.7, 0.4};
        const auto report = select_scs(table_from(s), ramp(3), TopKStrategy{3});
        REQUIRE(report.classes[0].selected.size() == 3);
        CHECK(report.classes[0].selected[0].index == 1);
        CHECK(report.classes[0].selected[1].index == 2);
        CHECK(report.classes[0].selected[2].index == 0);
        CHECK(thrown_code([&] { select_scs(table_from(s), ramp(3), TopKStrategy{4}); }) == ErrorCode::ConfigInvalid);
    }

    TEST_CASE("top fraction rounds up") {
        std::vector<double> s(100);
        std::iota(s.begin(), s.end(), 0.0);
        CHECK(select_scs(table_from(s), ramp(100), TopFractionStrategy{0.2}).classes[0].m_k == 20);
        CHECK(select_scs(table_from({1, 2, 3}), ramp(3), TopFractionStrategy{0.5}).classes[0].m_k == 2);
        CHECK(thrown_code([&] { select_scs(table_from({1}), ramp(1), TopFractionStrategy{0.0}); }) ==
              ErrorCode::ConfigInvalid);
    }

    TEST_CASE("window larger than the concept count falls back") {
        const auto report = select_scs(table_from({0.9, 0.5, 0.1}), ramp(3), DynamicStrategy{5});
        CHECK(report.r_fallback);
        CHECK(report.effective_r == 3);
        CHECK(report.classes[0].m_k == 2);
        CHECK_FALSE(report.warnings.empty());
    }

    TEST_CASE("dynamic selections are the top-m scores") {
        std::mt19937_64 rng(6);
        std::exponential_distribution<double> expo(3.0);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t q = 6 + trial % 50;
            std::vector<double> s(q);
            for (auto& v : s) v = expo(rng);
            const auto table = table_from(s);
            const auto report = select_scs(table, ramp(q), DynamicStrategy{5});
            const auto& cls = report.classes[0];
            CHECK(cls.m_k >= 1);
            CHECK(cls.selected.size() == cls.m_k);
            for (std::size_t i = 0; i < cls.m_k; ++i) CHECK(cls.selected[i].score == table.classes[0][i].score);
            auto sorted = scores_of(table.classes[0]);
            CHECK(std::ranges::is_sorted(sorted, std::greater<>()));
        }
    }
}

TEST_SUITE("detect") {
    SyntheticData planted(std::uint64_t seed) {
        SyntheticConfig cfg;
        cfg.seed = seed;
        return generate_synthetic(cfg);
    }

    TEST_CASE("planted attribute ranks first after ERM") {
        const auto data = planted(0);
        const auto report = train(init_probe(data.class_embs), data.train, data.val, TrainConfig{});
        const auto sc = detect(report.final_probe, data.concepts, DynamicStrategy{5});
        REQUIRE(sc.classes.size() == 2);
        CHECK(sc.classes[0].name == "class_0");
        CHECK(sc.classes[0].selected[0].text == "attribute_0");
        CHECK(sc.classes[1].selected[0].text == "attribute_1");
        CHECK(sc.probe_fingerprint == fingerprint(report.final_probe));
    }

    TEST_CASE("no planted signal leaves every class near zero") {
        SyntheticConfig cfg;
        cfg.num_classes = 4;
        cfg.signal_attr = 0.0;
        cfg.text_offset = 0.0;
        cfg.text_attr_leak = 0.0;
        cfg.n_distractors = 0;
        cfg.n_per_group = 10;
        const auto data = generate_synthetic(cfg);
        const auto sc = detect(init_probe(data.class_embs), data.concepts, DynamicStrategy{5});
        for (const auto& cls : sc.classes) CHECK(cls.near_zero);
        CHECK(sc.r_fallback);
    }

    TEST_CASE("concept order does not change the report") {
        const auto data = planted(1);
        const auto p = train(init_probe(data.class_embs), data.train, data.val, TrainConfig{}).final_probe;
        std::vector<std::size_t> perm(data.concepts.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::mt19937_64 rng(5);
        std::ranges::shuffle(perm, rng);
        const auto shuffled = select_rows(data.concepts, perm);
        for (auto polarity : {Polarity::Positive, Polarity::Negative}) {
            const auto table = polarity == Polarity::Positive ? score_positive(p, data.concepts)
                                                              : score_negative(p, data.concepts);
            const auto a = detect(p, data.concepts, DynamicStrategy{5}, polarity);
            const auto b = detect(p, shuffled, DynamicStrategy{5}, polarity);
            for (std::size_t k = 0; k < 2; ++k) {
                const auto& sa = a.classes[k].selected;
                const auto& sb = b.classes[k].selected;
                REQUIRE(a.classes[k].m_k == b.classes[k].m_k);
                for (std::size_t i = 0; i < sa.size(); ++i) {
                    CHECK(sa[i].score == sb[i].score);
                    // tied scores keep input order, so only untied entries name the same concept
                    const auto all = scores_of(table.classes[k]);
                    if (std::ranges::count(all, sa[i].score) == 1) CHECK(sa[i].text == sb[i].text);
                }
            }
        }
    }

    TEST_CASE("detect is deterministic") {
        const auto data = planted(2);
        const auto p = init_probe(data.class_embs);
        const auto a = detect(p, data.concepts, TopKStrategy{3});
        const auto b = detect(p, data.concepts, TopKStrategy{3});
        for (std::size_t k = 0; k < 2; ++k) {
            for (std::size_t i = 0; i < 3; ++i) CHECK(a.classes[k].selected[i].score == b.classes[k].selected[i].score);
        }
    }

    TEST_CASE("unfiltered concepts carry a warning") {
        const auto data = planted(3);
        auto concepts = data.concepts;
        concepts.filtered = false;
        const auto sc = detect(init_probe(data.class_embs), concepts, DynamicStrategy{5});
        CHECK(std::ranges::any_of(sc.warnings, [](const std::string& w) { return w.find("filtered") != std::string::npos; }));
    }

    TEST_CASE("union and random subsets of concepts") {
        const auto data = planted(4);
        const auto sc = detect(init_probe(data.class_embs), data.concepts, TopKStrategy{2});
        const auto u = selected_concepts(sc, data.concepts);
        CHECK(u.size() >= 2);
        CHECK(u.size() <= 4);
        const auto r1 = random_concepts(data.concepts, 5, 9);
        const auto r2 = random_concepts(data.concepts, 5, 9);
        CHECK(r1.texts == r2.texts);
        CHECK(r1.size() == 5);
        CHECK(thrown_code([&] { random_concepts(data.concepts, 100, 0); }) == ErrorCode::ConfigInvalid);
    }
}
