#include "stnet/model/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <sstream>

#include "stnet/error.hpp"
#include "stnet/io.hpp"

namespace stnet {

namespace {

constexpr char kMagic[4] = {'G', 'N', 'E', 'T'};

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.append(s);
    }
    void tensor(const Tensor& t) {
        u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) u64(d);
        for (double v : t.values()) f64(v);
    }
    std::string& bytes() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    Tensor tensor() {
        const std::uint32_t rank = u32();
        if (rank == 0 || rank > 8) throw FormatError("bad tensor rank in checkpoint");
        Shape shape(rank);
        std::size_t count = 1;
        for (auto& d : shape) {
            d = u64();
            if (d == 0 || d > (std::size_t{1} << 40) / count) throw FormatError("bad tensor extent in checkpoint");
            count *= d;
        }
        need(count * 8);
        std::vector<double> data(count);
        for (auto& v : data) v = f64();
        return Tensor(std::move(shape), std::move(data));
    }
    bool done() const { return pos_ == in_.size(); }

private:
    std::string_view in_;
    std::size_t pos_ = 0;
};

std::string hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double unhex(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw FormatError("bad number '" + s + "' in checkpoint metadata");
    return v;
}

std::string encode_metadata(const NetworkConfig& c) {
    std::ostringstream m;
    m << "preset=" << c.preset << "\n";
    m << "input=" << c.input[0] << "x" << c.input[1] << "x" << c.input[2] << "x" << c.input[3] << "\n";
    m << "topology=" << to_string(c.topology) << "\n";
    m << "front_end=" << to_string(c.front_end) << "\n";
    m << "illum_alpha=" << hex(c.illum_alpha) << "\n";
    m << "illum_beta=" << hex(c.illum_beta) << "\n";
    m << "illum_gamma=" << hex(c.illum_gamma) << "\n";
    m << "illum_delta=" << hex(c.illum_delta) << "\n";
    m << "mix_window=" << c.mix_window << "\n";
    m << "front_lrn=" << c.front_lrn.size << "," << hex(c.front_lrn.bias) << "," << hex(c.front_lrn.alpha) << ","
      << hex(c.front_lrn.beta) << "\n";
    m << "seed=" << c.seed << "\n";
    m << "strides=" << format_stride_table(render_strides(c.autoencoder)) << "\n";
    m << "head=" << render_arch(c.head) << "\n";
    return m.str();
}

std::uint64_t to_u64(const std::string& s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') throw FormatError("bad integer '" + s + "' in checkpoint metadata");
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    return parts;
}

NetworkConfig decode_metadata(const std::string& arch, const std::string& text) {
    std::map<std::string, std::string> kv;
    for (const auto& line : split(text, '\n')) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("bad metadata line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError(std::string("checkpoint metadata lacks ") + key);
        return it->second;
    };
    try {
        NetworkConfig c;
        c.preset = get("preset");
        const auto dims = split(get("input"), 'x');
        if (dims.size() != 4) throw FormatError("bad input shape in checkpoint metadata");
        c.input.clear();
        for (const auto& d : dims) c.input.push_back(to_u64(d));
        c.topology = parse_topology(get("topology"));
        c.front_end = parse_front_end(get("front_end"));
        c.illum_alpha = unhex(get("illum_alpha"));
        c.illum_beta = unhex(get("illum_beta"));
        c.illum_gamma = unhex(get("illum_gamma"));
        c.illum_delta = unhex(get("illum_delta"));
        c.mix_window = to_u64(get("mix_window"));
        const auto lrn = split(get("front_lrn"), ',');
        if (lrn.size() != 4) throw FormatError("bad front_lrn in checkpoint metadata");
        c.front_lrn = LrnParams{to_u64(lrn[0]), unhex(lrn[1]), unhex(lrn[2]), unhex(lrn[3])};
        c.seed = to_u64(get("seed"));
        c.autoencoder = parse_arch(arch, parse_stride_table(get("strides")));
        const std::string& head = get("head");
        c.head = head.empty() ? ArchSpec{} : parse_arch(head);
        return c;
    } catch (const ParseError& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what());
    }
}

}  // namespace

std::string encode_checkpoint(const Network& net, const CheckpointExtras& extras) {
    Writer w;
    w.bytes().append(kMagic, 4);
    w.u32(kCheckpointVersion);
    w.str(render_arch(net.config().autoencoder));
    w.str(encode_metadata(net.config()));
    const ParamStore& params = net.params();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        w.str(params.name(i));
        w.tensor(params.value(i));
    }
    w.u8(extras.train ? 1 : 0);
    if (extras.train) {
        const TrainState& st = *extras.train;
        w.u64(st.next_epoch);
        w.f64(st.alpha_recon);
        w.f64(st.beta_pred);
        w.u8(st.calibrated ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(st.velocities.size()));
        for (const auto& v : st.velocities) w.tensor(v);
        w.u32(static_cast<std::uint32_t>(st.history.size()));
        for (const auto& r : st.history) {
            w.u64(r.epoch);
            w.f64(r.l_recon);
            w.f64(r.l_softmax);
            w.f64(r.l_total);
            w.f64(r.val_accuracy);
        }
    }
    w.u64(extras.pretrain_stages_done);
    w.u64(fnv1a(w.bytes()));
    return std::move(w.bytes());
}

LoadedCheckpoint decode_checkpoint(std::string_view bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a GNET checkpoint");
    const std::string_view body = bytes.substr(0, bytes.size() - 8);
    Reader footer(bytes.substr(bytes.size() - 8));
    if (footer.u64() != fnv1a(body)) throw FormatError("checkpoint checksum mismatch (truncated or corrupt)");

    Reader r(body.substr(4));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::string arch = r.str();
    const NetworkConfig config = decode_metadata(arch, r.str());
    Network net;
    try {
        net = build_network(config);
    } catch (const ShapeError& e) {
        throw FormatError(std::string("checkpoint architecture does not build: ") + e.what());
    }
    ParamStore& params = net.params();
    const std::uint32_t count = r.u32();
    if (count != params.size()) throw FormatError("checkpoint parameter count does not match architecture");
    std::vector<bool> seen(params.size(), false);
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::string name = r.str();
        Tensor value = r.tensor();
        const auto id = params.find(name);
        if (!id || seen[*id]) throw FormatError("unexpected parameter '" + name + "' in checkpoint");
        if (value.shape() != params.value(*id).shape()) {
            throw FormatError("parameter '" + name + "' has shape " + to_string(value.shape()) + ", expected " +
                              to_string(params.value(*id).shape()));
        }
        params.value(*id) = std::move(value);
        seen[*id] = true;
    }

    CheckpointExtras extras;
    if (r.u8()) {
        TrainState st;
        st.next_epoch = r.u64();
        st.alpha_recon = r.f64();
        st.beta_pred = r.f64();
        st.calibrated = r.u8() != 0;
        const std::uint32_t nv = r.u32();
        if (nv != 0 && nv != params.size()) throw FormatError("velocity count does not match parameters");
        for (std::uint32_t k = 0; k < nv; ++k) {
            st.velocities.push_back(r.tensor());
            if (st.velocities.back().shape() != params.value(k).shape()) throw FormatError("velocity shape mismatch");
        }
        const std::uint32_t nh = r.u32();
        for (std::uint32_t k = 0; k < nh; ++k) {
            HistoryRow row;
            row.epoch = r.u64();
            row.l_recon = r.f64();
            row.l_softmax = r.f64();
            row.l_total = r.f64();
            row.val_accuracy = r.f64();
            st.history.push_back(row);
        }
        extras.train = std::move(st);
    }
    extras.pretrain_stages_done = r.u64();
    if (!r.done()) throw FormatError("trailing bytes in checkpoint");
    return {std::move(net), std::move(extras)};
}

void save_checkpoint(const std::string& path, const Network& net, const CheckpointExtras& extras) {
    write_file_atomic(path, encode_checkpoint(net, extras));
}

LoadedCheckpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace stnet
