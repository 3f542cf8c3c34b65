#include "stnet/data/manifest.hpp"

#include <filesystem>
#include <numeric>
#include <set>

#include "stnet/data/strip.hpp"
#include "stnet/error.hpp"
#include "stnet/io.hpp"
#include "stnet/rng.hpp"

namespace stnet {

namespace {

bool known_split(const std::string& s) {
    return s == kTrain || s == kTest || s == kValidation || s == kUnassigned;
}

}  // namespace

void Manifest::validate() const {
    std::set<std::string> paths;
    for (const auto& r : records) {
        if (r.path.empty()) throw ConfigError("manifest record with empty path");
        if (!paths.insert(r.path).second) throw ConfigError("duplicate manifest path " + r.path);
        if (!known_split(r.split)) throw ConfigError("unknown split tag '" + r.split + "'");
    }
}

std::vector<ManifestRecord> Manifest::with_split(const std::string& split) const {
    std::vector<ManifestRecord> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(r);
    }
    return out;
}

SplitCounts split_counts(std::size_t records) {
    SplitCounts c;
    c.test = records * 3 / 10;
    c.validation = records * 2 / 10;
    c.train = records - c.test - c.validation;
    return c;
}

Manifest split_dataset(const Manifest& manifest, std::uint64_t seed) {
    manifest.validate();
    const std::size_t n = manifest.records.size();
    if (n < 10) throw ConfigError("splitting needs at least 10 records, got " + std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "split"));
    shuffle(order, rng);
    const SplitCounts c = split_counts(n);
    Manifest out = manifest;
    for (std::size_t k = 0; k < n; ++k) {
        const char* tag = k < c.train ? kTrain : (k < c.train + c.test ? kTest : kValidation);
        out.records[order[k]].split = tag;
    }
    return out;
}

std::string format_manifest(const Manifest& manifest) {
    std::string out;
    for (const auto& r : manifest.records) {
        if (r.path.find_first_of(",\n") != std::string::npos) throw ConfigError("manifest path contains ',' or newline");
        out += r.path + "," + (r.label ? std::to_string(*r.label) : std::string("-")) + "," + r.split + "\n";
    }
    return out;
}

Manifest parse_manifest(const std::string& text) {
    Manifest m;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected path,label,split");
        }
        ManifestRecord r;
        r.path = line.substr(0, c1);
        const std::string label = line.substr(c1 + 1, c2 - c1 - 1);
        r.split = line.substr(c2 + 1);
        if (label != "-") {
            if (label.empty() || label.find_first_not_of("0123456789") != std::string::npos) {
                throw FormatError("manifest line " + std::to_string(line_no) + ": bad label '" + label + "'");
            }
            r.label = std::stoul(label);
        }
        m.records.push_back(std::move(r));
    }
    try {
        m.validate();
    } catch (const ConfigError& e) {
        throw FormatError(e.what());
    }
    return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
    manifest.validate();
    write_file_atomic(path, format_manifest(manifest));
}

Manifest read_manifest(const std::string& path) { return parse_manifest(read_file(path)); }

Clip load_clip(const ManifestRecord& record, const std::string& base_dir) {
    std::filesystem::path p(record.path);
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    Clip clip = strip_read(p.string());
    clip.label = record.label;
    clip.id = record.path;
    return clip;
}

std::vector<Clip> load_clips(const std::vector<ManifestRecord>& records, const std::string& base_dir) {
    std::vector<Clip> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(load_clip(r, base_dir));
    return out;
}

}  // namespace stnet
