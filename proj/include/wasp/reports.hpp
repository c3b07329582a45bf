#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "wasp/detect.hpp"
#include "wasp/eval.hpp"
#include "wasp/train.hpp"

namespace wasp {

/// Rounds to 9 significant digits so the JSON text carries at most that many.
double round_significant(double value, int digits = 9);

nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const TrainReport& report);
nlohmann::json to_json(const SCReport& report);
nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const std::vector<ConceptCorrelation>& correlations);

/// Pretty-printed, newline-terminated UTF-8.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Probe weights as a .wemb (K rows, no labels) plus class names in the sidecar.
void save_probe(const std::filesystem::path& wemb_path, const LinearProbe& probe);
LinearProbe load_probe(const std::filesystem::path& wemb_path, double temperature = kClipTemperature);

}  // namespace wasp
