#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wasp/data.hpp"
#include "wasp/error.hpp"
#include "wasp/probe.hpp"

namespace testing {

inline wasp::Matrix matrix(std::initializer_list<std::initializer_list<float>> rows) {
    const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    wasp::Matrix m(rows.size(), cols);
    std::size_t r = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (float v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

inline wasp::ConceptSet concepts(wasp::Matrix rows, const std::string& prefix = "c") {
    wasp::ConceptSet set;
    for (std::size_t i = 0; i < rows.rows(); ++i) set.texts.push_back(prefix + std::to_string(i));
    set.embeddings = std::move(rows);
    return set;
}

inline wasp::LinearProbe probe(wasp::Matrix rows, double temperature = wasp::kClipTemperature) {
    return wasp::init_probe(concepts(std::move(rows), "class_"), temperature);
}

inline wasp::Matrix random_unit_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<float> normal;
    wasp::Matrix m(n, d);
    for (auto& v : m.flat()) v = normal(rng);
    return wasp::normalize_rows(m);
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static int counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("wasp_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Code of the wasp::Error thrown by `f`, nullopt when nothing is thrown.
template <typename F>
std::optional<wasp::ErrorCode> thrown_code(F&& f) {
    try {
        f();
    } catch (const wasp::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

}  // namespace testing
