#include "wasp/reports.hpp"

#include <cstdio>
#include <fstream>
#include <string>

#include "wasp/error.hpp"
#include "wasp/wemb.hpp"

namespace wasp {

double round_significant(double value, int digits) {
    if (!std::isfinite(value)) return value;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
    return std::stod(buf);
}

nlohmann::json to_json(const TrainConfig& cfg) {
    return {
        {"learning_rate", cfg.learning_rate},
        {"weight_decay", cfg.weight_decay},
        {"batch_size", cfg.batch_size},
        {"max_epochs", cfg.max_epochs},
        {"patience", cfg.patience},
        {"alpha", cfg.alpha},
        {"mode", std::string(to_string(cfg.mode))},
        {"groupdro_step", cfg.groupdro_step},
        {"seed", cfg.seed},
    };
}

nlohmann::json to_json(const TrainReport& report) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& e : report.history) {
        history.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"val_class_balanced_accuracy", e.val_class_balanced_accuracy}});
    }
    return {
        {"best_epoch", report.best_epoch},
        {"history", history},
        {"temperature", report.final_probe.temperature},
        {"probe_fingerprint", fingerprint(report.final_probe)},
        {"config", to_json(report.config)},
    };
}

nlohmann::json to_json(const SCReport& report) {
    nlohmann::json doc;
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, DynamicStrategy>) {
                doc["strategy"] = "dynamic";
                doc["r"] = s.r;
            } else if constexpr (std::is_same_v<S, TopKStrategy>) {
                doc["strategy"] = "top_k";
                doc["r"] = nullptr;
                doc["top_k"] = s.k;
            } else {
                doc["strategy"] = "top_fraction";
                doc["r"] = nullptr;
                doc["top_fraction"] = s.fraction;
            }
        },
        report.strategy);
    if (report.effective_r > 0) doc["effective_r"] = report.effective_r;
    doc["r_fallback"] = report.r_fallback;
    doc["polarity"] = std::string(to_string(report.polarity));
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& cls : report.classes) {
        nlohmann::json selected = nlohmann::json::array();
        for (const auto& s : cls.selected) {
            selected.push_back({{"text", s.text}, {"score", round_significant(s.score)}});
        }
        classes.push_back({{"name", cls.name},
                           {"m_k", cls.m_k},
                           {"selected", selected},
                           {"near_zero", cls.near_zero},
                           {"noise_floor", round_significant(cls.noise_floor)}});
    }
    doc["classes"] = classes;
    doc["probe_fingerprint"] = report.probe_fingerprint;
    doc["warnings"] = report.warnings;
    return doc;
}

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& c : report.per_class) {
        per_class.push_back({{"class", c.cls}, {"accuracy", c.accuracy}, {"count", c.count}});
    }
    nlohmann::json per_group = nlohmann::json::array();
    for (const auto& g : report.per_group) {
        per_group.push_back(
            {{"class", g.cls}, {"attribute", g.attribute}, {"accuracy", g.accuracy}, {"count", g.count}});
    }
    return {
        {"average_accuracy", report.average_accuracy},
        {"class_balanced_accuracy", report.class_balanced_accuracy},
        {"worst_group_accuracy",
         report.worst_group_accuracy ? nlohmann::json(*report.worst_group_accuracy) : nlohmann::json(nullptr)},
        {"per_class", per_class},
        {"per_group", per_group},
    };
}

nlohmann::json to_json(const std::vector<ConceptCorrelation>& correlations) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : correlations) {
        rows.push_back({{"text", c.text},
                        {"r", c.r ? nlohmann::json(round_significant(*c.r)) : nlohmann::json(nullptr)},
                        {"defined", c.r.has_value()}});
    }
    return {{"correlations", rows}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
}

void save_probe(const std::filesystem::path& wemb_path, const LinearProbe& probe) {
    ConceptSet rows;
    rows.embeddings = probe.weights;
    rows.texts = probe.class_names;
    save_concepts(wemb_path, sidecar_path(wemb_path), rows);
}

LinearProbe load_probe(const std::filesystem::path& wemb_path, double temperature) {
    auto ds = load_embeddings(wemb_path);
    std::vector<std::string> names;
    const auto names_path = sidecar_path(wemb_path);
    if (std::filesystem::exists(names_path)) {
        for (auto& e : load_sidecar(names_path)) names.push_back(std::move(e.text));
        if (names.size() != ds.size()) {
            throw Error(ErrorCode::CountMismatch, names_path.string() + " does not match probe rows");
        }
    } else {
        for (std::size_t k = 0; k < ds.size(); ++k) names.push_back("class_" + std::to_string(k));
    }
    ConceptSet class_embs{std::move(names), std::move(ds.embeddings), true};
    return init_probe(class_embs, temperature);
}

}  // namespace wasp
