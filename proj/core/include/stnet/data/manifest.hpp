#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stnet/data/clip.hpp"

namespace stnet {

/// Split tags; "-" marks a record not yet assigned.
inline constexpr const char* kTrain = "train";
inline constexpr const char* kTest = "test";
inline constexpr const char* kValidation = "validation";
inline constexpr const char* kUnassigned = "-";

struct ManifestRecord {
    std::string path;
    std::optional<std::size_t> label;
    std::string split = kUnassigned;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
    std::vector<ManifestRecord> records;

    /// Unique paths and known split tags.
    void validate() const;
    std::vector<ManifestRecord> with_split(const std::string& split) const;

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t test = 0;
    std::size_t validation = 0;
};

/// 50/30/20 with test and validation rounded down, remainder to train.
SplitCounts split_counts(std::size_t records);

/// Seeded shuffle, then train/test/validation tags. Needs >= 10 records.
Manifest split_dataset(const Manifest& manifest, std::uint64_t seed);

/// One "path,label,split" line per record, label "-" when unlabeled.
std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(const std::string& text);

void write_manifest(const std::string& path, const Manifest& manifest);
Manifest read_manifest(const std::string& path);

/// Reads the strip of a record; relative paths resolve against base_dir.
Clip load_clip(const ManifestRecord& record, const std::string& base_dir);
std::vector<Clip> load_clips(const std::vector<ManifestRecord>& records, const std::string& base_dir);

}  // namespace stnet
