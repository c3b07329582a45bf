#include "wasp/wemb.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "wasp/error.hpp"

namespace wasp {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

constexpr std::uint8_t kFlagLabels = 0x1;
constexpr std::uint8_t kFlagGroups = 0x2;

}  // namespace

std::vector<std::uint8_t> encode_embeddings(const EmbeddingDataset& ds) {
    const std::size_t n = ds.size();
    if (ds.labels && ds.labels->size() != n) throw Error(ErrorCode::CountMismatch, "label count != row count");
    if (ds.groups && ds.groups->size() != n) throw Error(ErrorCode::CountMismatch, "group count != row count");

    if (n > UINT32_MAX || ds.dim() > UINT32_MAX) throw Error(ErrorCode::ConfigInvalid, "n or D exceeds u32 range");

    std::vector<std::uint8_t> out(kWembHeaderSize, 0);
    out.reserve(kWembHeaderSize + n * ds.dim() * 4 + 8 * n);
    std::memcpy(out.data(), kWembMagic, sizeof(kWembMagic));
    for (int i = 0; i < 4; ++i) {
        out[8 + i] = static_cast<std::uint8_t>(n >> (8 * i));
        out[12 + i] = static_cast<std::uint8_t>(ds.dim() >> (8 * i));
    }
    if (ds.labels) out[16] |= kFlagLabels;
    if (ds.groups) out[16] |= kFlagGroups;
    for (float f : ds.embeddings.flat()) put_f32(out, f);
    if (ds.labels) for (auto v : *ds.labels) put_u32(out, v);
    if (ds.groups) for (auto v : *ds.groups) put_u32(out, v);
    return out;
}

EmbeddingDataset decode_embeddings(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof(kWembMagic)) throw Error(ErrorCode::BadMagic, "file shorter than magic");
    if (std::memcmp(bytes.data(), kWembMagic, 7) != 0) throw Error(ErrorCode::BadMagic, "not a WASP embedding file");
    if (bytes[7] != static_cast<std::uint8_t>(kWembMagic[7])) {
        throw Error(ErrorCode::VersionMismatch, std::string("unsupported format version '") +
                                                    static_cast<char>(bytes[7]) + "'");
    }
    if (bytes.size() < kWembHeaderSize) throw Error(ErrorCode::Truncated, "header incomplete");

    const std::uint64_t n = get_u32(bytes.data() + 8);
    const std::uint64_t dim = get_u32(bytes.data() + 12);
    const std::uint8_t flags = bytes[16];
    if ((flags & ~(kFlagLabels | kFlagGroups)) != 0 || bytes[17] != 0 || bytes[18] != 0 || bytes[19] != 0) {
        throw Error(ErrorCode::VersionMismatch, "reserved header bits set");
    }
    const bool has_labels = flags & kFlagLabels;
    const bool has_groups = flags & kFlagGroups;

    const std::uint64_t expected = kWembHeaderSize + 4 * n * dim + (has_labels ? 4 * n : 0) + (has_groups ? 4 * n : 0);
    if (bytes.size() < expected) {
        throw Error(ErrorCode::Truncated, "declared n=" + std::to_string(n) + ", D=" + std::to_string(dim) + " needs " +
                                              std::to_string(expected) + " bytes, file has " +
                                              std::to_string(bytes.size()));
    }
    if (bytes.size() > expected) {
        throw Error(ErrorCode::TrailingData, std::to_string(bytes.size() - expected) + " bytes after payload");
    }

    EmbeddingDataset ds;
    ds.embeddings = Matrix(n, dim);
    const std::uint8_t* p = bytes.data() + kWembHeaderSize;
    for (auto& f : ds.embeddings.flat()) {
        f = get_f32(p);
        p += 4;
    }
    auto read_indices = [&](std::optional<std::vector<std::uint32_t>>& dst) {
        dst.emplace(n);
        for (auto& v : *dst) {
            v = get_u32(p);
            p += 4;
        }
    };
    if (has_labels) read_indices(ds.labels);
    if (has_groups) read_indices(ds.groups);
    return ds;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

EmbeddingDataset load_embeddings(const std::filesystem::path& path) {
    try {
        return decode_embeddings(read_file_bytes(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.detail());
    }
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingDataset& ds) {
    write_file_bytes(path, encode_embeddings(ds));
}

std::vector<SidecarEntry> load_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::vector<SidecarEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        try {
            const auto obj = nlohmann::json::parse(line);
            SidecarEntry entry;
            entry.text = obj.at("text").get<std::string>();
            if (obj.contains("class") && !obj["class"].is_null()) entry.class_index = obj["class"].get<std::uint32_t>();
            entries.push_back(std::move(entry));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedSidecar,
                        path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return entries;
}

void save_sidecar(const std::filesystem::path& path, const std::vector<SidecarEntry>& entries) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    for (const auto& e : entries) {
        nlohmann::json obj = {{"text", e.text}};
        if (e.class_index) obj["class"] = *e.class_index;
        out << obj.dump() << '\n';
    }
}

std::filesystem::path sidecar_path(const std::filesystem::path& wemb_path) {
    auto p = wemb_path;
    p.replace_extension(".jsonl");
    return p;
}

ConceptSet load_concepts(const std::filesystem::path& wemb_path, const std::filesystem::path& jsonl_path) {
    auto ds = load_embeddings(wemb_path);
    auto entries = load_sidecar(jsonl_path);
    if (entries.size() != ds.size()) {
        throw Error(ErrorCode::CountMismatch, jsonl_path.string() + " has " + std::to_string(entries.size()) +
                                                  " lines but " + wemb_path.string() + " has " +
                                                  std::to_string(ds.size()) + " rows");
    }
    ConceptSet concepts;
    concepts.embeddings = std::move(ds.embeddings);
    for (auto& e : entries) concepts.texts.push_back(std::move(e.text));
    return concepts;
}

void save_concepts(const std::filesystem::path& wemb_path, const std::filesystem::path& jsonl_path,
                   const ConceptSet& concepts) {
    EmbeddingDataset ds;
    ds.embeddings = concepts.embeddings;
    save_embeddings(wemb_path, ds);
    std::vector<SidecarEntry> entries;
    for (const auto& t : concepts.texts) entries.push_back({t, std::nullopt});
    save_sidecar(jsonl_path, entries);
}

}  // namespace wasp
