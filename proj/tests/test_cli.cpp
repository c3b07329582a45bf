#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "helpers.hpp"
#include "wasp/wemb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "wasp");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Outcome o;
    o.code = wasp::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

/// Synthetic splits plus an ERM probe, shared by the detect/eval tests.
struct Pipeline {
    testing::TempDir dir;
    fs::path data = dir / "data";
    fs::path erm = dir / "erm";

    Pipeline() {
        REQUIRE(run({"synth", "--out", data.string(), "--n-per-group", "300"}).code == 0);
        REQUIRE(run({"train", "--train", s("train.wemb"), "--val", s("val.wemb"), "--classes", s("classes.wemb"),
                     "--out", erm.string()})
                    .code == 0);
    }
    std::string s(const std::string& name) const { return (data / name).string(); }
    std::string probe() const { return (erm / "probe.wemb").string(); }
};

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("help exits cleanly, no subcommand is a config error") {
        CHECK(run({"--help"}).code == 0);
        CHECK(run({}).code == wasp::cli::kConfig);
        CHECK(run({"bogus"}).code == wasp::cli::kConfig);
    }

    TEST_CASE("synth is deterministic per seed") {
        testing::TempDir dir;
        REQUIRE(run({"synth", "--out", (dir / "a").string(), "--seed", "7", "--n-per-group", "20"}).code == 0);
        REQUIRE(run({"synth", "--out", (dir / "b").string(), "--seed", "7", "--n-per-group", "20"}).code == 0);
        for (const char* f : {"train.wemb", "val.wemb", "test.wemb", "concepts.wemb", "concepts.jsonl", "classes.wemb",
                              "classes.jsonl", "synth_config.json"}) {
            CHECK(wasp::read_file_bytes(dir / "a" / f) == wasp::read_file_bytes(dir / "b" / f));
        }
        CHECK(read_json(dir / "a" / "synth_config.json")["seed"] == 7);
        CHECK(run({"synth", "--out", (dir / "c").string(), "--correlation", "2"}).code == wasp::cli::kConfig);
    }

    TEST_CASE("train writes probe, names and report") {
        Pipeline p;
        CHECK(fs::exists(p.erm / "probe.wemb"));
        CHECK(fs::exists(p.erm / "probe.jsonl"));
        const auto report = read_json(p.erm / "train_report.json");
        CHECK(report["best_epoch"].get<int>() >= 1);
        CHECK(report["history"].is_array());
        CHECK(report["config"]["mode"] == "erm");
        CHECK(report["config"]["learning_rate"] == 1e-4);
        CHECK(wasp::load_sidecar(p.erm / "probe.jsonl")[1].text == "class_1");
    }

    TEST_CASE("train input errors map to exit codes") {
        Pipeline p;
        std::ofstream(p.dir / "notes.txt") << "plain text, not embeddings\n";
        const auto bad = run({"train", "--train", (p.dir / "notes.txt").string(), "--val", p.s("val.wemb"),
                              "--classes", p.s("classes.wemb"), "--out", (p.dir / "x").string()});
        CHECK(bad.code == wasp::cli::kFormat);
        CHECK(bad.err.find("BadMagic") != std::string::npos);

        const auto no_sc = run({"train", "--train", p.s("train.wemb"), "--val", p.s("val.wemb"), "--classes",
                                p.s("classes.wemb"), "--out", (p.dir / "x").string(), "--mode", "erm_plus_reg"});
        CHECK(no_sc.code == wasp::cli::kConfig);

        const auto missing = run({"train", "--train", (p.dir / "nope.wemb").string(), "--val", p.s("val.wemb"),
                                  "--classes", p.s("classes.wemb"), "--out", (p.dir / "x").string()});
        CHECK(missing.code == wasp::cli::kConfig);

        const auto mode = run({"train", "--train", p.s("train.wemb"), "--val", p.s("val.wemb"), "--classes",
                               p.s("classes.wemb"), "--out", (p.dir / "x").string(), "--mode", "sgd"});
        CHECK(mode.code == wasp::cli::kConfig);
    }

    TEST_CASE("detect finds the planted attribute and feeds regularized training") {
        Pipeline p;
        const auto sc = p.dir / "sc.json";
        const auto res = run({"detect", "--probe", p.probe(), "--concepts", p.s("concepts.wemb"), "--concepts-text",
                              p.s("concepts.jsonl"), "--out", sc.string(), "--sc-out", (p.dir / "sc.wemb").string()});
        REQUIRE(res.code == 0);
        const auto report = read_json(sc);
        CHECK(report["classes"][1]["selected"][0]["text"] == "attribute_1");
        CHECK(report["classes"][0]["selected"][0]["text"] == "attribute_0");
        CHECK(report["r"] == 5);
        CHECK(res.out.find("attribute_1") != std::string::npos);
        CHECK(fs::exists(p.dir / "sc.jsonl"));

        const auto reg = run({"train", "--train", p.s("train.wemb"), "--val", p.s("val.wemb"), "--classes",
                              p.s("classes.wemb"), "--out", (p.dir / "reg").string(), "--mode", "erm_plus_reg",
                              "--reg-concepts", (p.dir / "sc.wemb").string()});
        REQUIRE(reg.code == 0);
        REQUIRE(run({"eval", "--probe", p.probe(), "--data", p.s("test.wemb"), "--out", (p.dir / "e1.json").string()})
                    .code == 0);
        REQUIRE(run({"eval", "--probe", (p.dir / "reg" / "probe.wemb").string(), "--data", p.s("test.wemb"), "--out",
                     (p.dir / "e2.json").string()})
                    .code == 0);
        CHECK(read_json(p.dir / "e2.json")["worst_group_accuracy"].get<double>() >
              read_json(p.dir / "e1.json")["worst_group_accuracy"].get<double>());
    }

    TEST_CASE("detect flag validation") {
        Pipeline p;
        const std::vector<std::string> base{"detect", "--probe", p.probe(), "--concepts", p.s("concepts.wemb"),
                                            "--concepts-text", p.s("concepts.jsonl"), "--out",
                                            (p.dir / "sc.json").string()};
        auto both = base;
        both.insert(both.end(), {"--r", "5", "--top-k", "3"});
        CHECK(run(both).code == wasp::cli::kConfig);

        auto big = base;
        big.insert(big.end(), {"--r", "1000"});
        const auto fallback = run(big);
        CHECK(fallback.code == 0);
        CHECK(fallback.err.find("warning") != std::string::npos);
        CHECK(read_json(p.dir / "sc.json")["r_fallback"] == true);

        auto top = base;
        top.insert(top.end(), {"--top-fraction", "0.25", "--polarity", "negative"});
        CHECK(run(top).code == 0);
        const auto neg = read_json(p.dir / "sc.json");
        CHECK(neg["polarity"] == "negative");
        CHECK(neg["classes"][0]["selected"].size() == 6);

        wasp::save_sidecar(p.dir / "short.jsonl", {{"only", std::nullopt}});
        auto mismatch = base;
        mismatch[6] = (p.dir / "short.jsonl").string();
        CHECK(run(mismatch).code == wasp::cli::kConfig);
    }

    TEST_CASE("zero-shot with class prompts matches eval of the initial probe") {
        Pipeline p;
        std::vector<wasp::SidecarEntry> prompts;
        for (const auto& e : wasp::load_sidecar(p.data / "classes.jsonl")) {
            prompts.push_back({"a photo of a " + e.text, static_cast<std::uint32_t>(prompts.size())});
        }
        wasp::save_sidecar(p.dir / "prompts.jsonl", prompts);
        const auto zs = run({"zeroshot", "--prompts", p.s("classes.wemb"), "--prompts-text",
                             (p.dir / "prompts.jsonl").string(), "--data", p.s("test.wemb"), "--out",
                             (p.dir / "zs.json").string()});
        REQUIRE(zs.code == 0);
        const auto ev = run({"eval", "--probe", p.s("classes.wemb"), "--data", p.s("test.wemb"), "--out",
                             (p.dir / "ev.json").string(), "--threads", "3"});
        REQUIRE(ev.code == 0);
        const auto a = read_json(p.dir / "zs.json");
        const auto b = read_json(p.dir / "ev.json");
        CHECK(a["average_accuracy"] == b["average_accuracy"]);
        CHECK(a["worst_group_accuracy"] == b["worst_group_accuracy"]);
        CHECK(a["per_group"] == b["per_group"]);
        CHECK(ev.out.find("worst_group_accuracy") != std::string::npos);

        CHECK(run({"zeroshot", "--prompts", p.s("classes.wemb"), "--prompts-text", (p.dir / "prompts.jsonl").string(),
                   "--data", p.s("test.wemb"), "--out", (p.dir / "gap.json").string(), "--close-gap"})
                  .code == 0);
    }

    TEST_CASE("correlate ranks a planted concept first") {
        Pipeline p;
        const auto res = run({"correlate", "--probe", p.probe(), "--data", p.s("test.wemb"), "--concepts",
                              p.s("concepts.wemb"), "--concepts-text", p.s("concepts.jsonl"), "--only-class", "1",
                              "--out", (p.dir / "corr.json").string()});
        REQUIRE(res.code == 0);
        const auto doc = read_json(p.dir / "corr.json");
        std::string best;
        double best_r = -1.0;
        for (const auto& c : doc["correlations"]) {
            if (c["r"].is_null()) continue;
            if (std::abs(c["r"].get<double>()) > best_r) {
                best_r = std::abs(c["r"].get<double>());
                best = c["text"];
            }
        }
        CHECK(best.rfind("attribute_", 0) == 0);
        CHECK(doc["config"]["only_class"] == 1);
    }

    TEST_CASE("inputs are left untouched") {
        Pipeline p;
        const auto before = wasp::read_file_bytes(p.data / "test.wemb");
        REQUIRE(run({"eval", "--probe", p.probe(), "--data", p.s("test.wemb"), "--out", (p.dir / "e.json").string()})
                    .code == 0);
        CHECK(wasp::read_file_bytes(p.data / "test.wemb") == before);
    }
}
