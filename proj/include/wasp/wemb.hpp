#pragma once

// WASP embedding file (.wemb), little-endian:
//   bytes 0-7   "WASPEMB1"
//   u32 n, u32 D, u8 flags (bit0 labels, bit1 groups), 3 zero bytes
//   n*D f32 row-major
//   [n u32 labels] [n u32 groups]
//
// Text sidecars (.jsonl) hold one {"text": ..., "class": ...} object per row.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wasp/data.hpp"

namespace wasp {

inline constexpr char kWembMagic[8] = {'W', 'A', 'S', 'P', 'E', 'M', 'B', '1'};
inline constexpr std::size_t kWembHeaderSize = 20;

std::vector<std::uint8_t> encode_embeddings(const EmbeddingDataset& ds);
EmbeddingDataset decode_embeddings(const std::vector<std::uint8_t>& bytes);

EmbeddingDataset load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingDataset& ds);

struct SidecarEntry {
    std::string text;
    std::optional<std::uint32_t> class_index;
};

std::vector<SidecarEntry> load_sidecar(const std::filesystem::path& path);
void save_sidecar(const std::filesystem::path& path, const std::vector<SidecarEntry>& entries);

/// `foo/bar.wemb` -> `foo/bar.jsonl`.
std::filesystem::path sidecar_path(const std::filesystem::path& wemb_path);

/// Embeddings from a .wemb paired with texts from a .jsonl; row counts must agree.
ConceptSet load_concepts(const std::filesystem::path& wemb_path, const std::filesystem::path& jsonl_path);
void save_concepts(const std::filesystem::path& wemb_path, const std::filesystem::path& jsonl_path,
                   const ConceptSet& concepts);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace wasp
