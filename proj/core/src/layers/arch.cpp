#include "stnet/layers/arch.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <optional>

#include "stnet/error.hpp"

namespace stnet {

namespace {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Token {
    std::string name;
    std::vector<std::string> args;
    std::vector<std::size_t> arg_offsets;
    std::size_t offset = 0;
    bool has_parens = false;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    std::vector<Token> tokens() {
        std::vector<Token> out;
        skip_space();
        if (pos_ >= text_.size()) throw ParseError("empty architecture", pos_);
        while (true) {
            out.push_back(token());
            skip_space();
            if (pos_ >= text_.size()) break;
            if (text_[pos_] != '-') throw ParseError("expected '-' between layers", pos_);
            ++pos_;
            skip_space();
            if (pos_ >= text_.size()) throw ParseError("trailing '-'", pos_);
        }
        return out;
    }

private:
    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    Token token() {
        Token t;
        t.offset = pos_;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) t.name += text_[pos_++];
        if (t.name.empty()) throw ParseError("expected layer name", pos_);
        if (pos_ < text_.size() && text_[pos_] == '(') {
            t.has_parens = true;
            ++pos_;
            while (true) {
                skip_space();
                const std::size_t start = pos_;
                while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ')') ++pos_;
                if (pos_ >= text_.size()) throw ParseError("unterminated argument list", pos_);
                std::string arg(text_.substr(start, pos_ - start));
                while (!arg.empty() && std::isspace(static_cast<unsigned char>(arg.back()))) arg.pop_back();
                if (arg.empty()) throw ParseError("empty argument", start);
                t.args.push_back(arg);
                t.arg_offsets.push_back(start);
                if (text_[pos_] == ')') {
                    ++pos_;
                    break;
                }
                ++pos_;
            }
        }
        return t;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

std::size_t parse_count(const Token& t, std::size_t i) {
    const std::string& s = t.args[i];
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        // Report the first character that is not part of a count.
        std::size_t bad = static_cast<std::size_t>(ptr - s.data());
        throw ParseError("expected positive integer in " + t.name, t.arg_offsets[i] + bad);
    }
    if (value == 0) throw ParseError("expected positive integer in " + t.name, t.arg_offsets[i]);
    return value;
}

double parse_real(const Token& t, std::size_t i) {
    const std::string& s = t.args[i];
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        std::size_t bad = static_cast<std::size_t>(ptr - s.data());
        throw ParseError("expected real number in " + t.name, t.arg_offsets[i] + bad);
    }
    return value;
}

void expect_arity(const Token& t, std::size_t n) {
    if (t.args.size() != n || (n > 0 && !t.has_parens)) {
        throw ParseError(t.name + " expects " + std::to_string(n) + " arguments, got " + std::to_string(t.args.size()),
                         t.offset);
    }
}

ConvSpec conv_triple(const Token& t) {
    // Arguments are validated before arity so malformed values report their own offset.
    for (std::size_t i = 0; i < t.args.size() && i < 3; ++i) parse_count(t, i);
    expect_arity(t, 3);
    ConvSpec s;
    s.filters = parse_count(t, 0);
    s.spatial_size = parse_count(t, 1);
    s.temporal_size = parse_count(t, 2);
    return s;
}

void apply_stride(ConvSpec& spec, const ConvStride& stride) {
    spec.spatial_stride = stride.spatial_stride;
    spec.temporal_stride = stride.temporal_stride;
    spec.padding = stride.padding;
}

bool same_triple(const ConvSpec& a, const ConvSpec& b) {
    return a.filters == b.filters && a.spatial_size == b.spatial_size && a.temporal_size == b.temporal_size;
}

}  // namespace

ConvStride default_conv_stride(std::size_t conv_ordinal) {
    switch (conv_ordinal) {
        case 0:
            return {4, 2, 0};
        case 1:
            return {1, 2, 0};
        default:
            return {1, 1, 0};
    }
}

ArchSpec parse_arch(std::string_view shorthand, const StrideTable& strides) {
    const auto tokens = Lexer(shorthand).tokens();
    ArchSpec arch;
    std::size_t conv_token = 0;  // index into strides (C and DC tokens)
    std::size_t conv_ordinal = 0;
    std::vector<ConvSpec> encoder;
    std::vector<std::pair<std::size_t, std::size_t>> pending_deconvs;  // (layer index, token index)

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (t.name == "C") {
            ConvSpec spec = conv_triple(t);
            const bool chain = i + 1 < tokens.size() && tokens[i + 1].name == "Abs";
            if (chain) {
                if (i + 4 >= tokens.size() || tokens[i + 2].name != "Log" || tokens[i + 3].name != "Exp" ||
                    tokens[i + 4].name != "Prod") {
                    throw ParseError("illumination chain must read C(f,1,t)-Abs-Log(a,b)-Exp(g,d)-Prod", t.offset);
                }
                if (spec.spatial_size != 1) throw ParseError("illumination mix must have spatial size 1", t.arg_offsets[1]);
                expect_arity(tokens[i + 1], 0);
                expect_arity(tokens[i + 2], 2);
                expect_arity(tokens[i + 3], 2);
                if (!tokens[i + 4].args.empty() && tokens[i + 4].args.size() != 2) {
                    throw ParseError("Prod takes no arguments or (x1,x2)", tokens[i + 4].offset);
                }
                layer::IllumChain c;
                c.mix_filters = spec.filters;
                c.mix_temporal = spec.temporal_size;
                c.log_scale = parse_real(tokens[i + 2], 0);
                c.log_shift = parse_real(tokens[i + 2], 1);
                c.exp_scale = parse_real(tokens[i + 3], 0);
                c.exp_shift = parse_real(tokens[i + 3], 1);
                arch.layers.emplace_back(c);
                i += 4;
                continue;
            }
            apply_stride(spec, conv_token < strides.size() ? strides[conv_token] : default_conv_stride(conv_ordinal));
            ++conv_token;
            ++conv_ordinal;
            encoder.push_back(spec);
            arch.layers.emplace_back(layer::Conv{spec});
        } else if (t.name == "DC") {
            ConvSpec spec = conv_triple(t);
            if (conv_token < strides.size()) {
                apply_stride(spec, strides[conv_token]);
            } else {
                pending_deconvs.emplace_back(arch.layers.size(), i);
            }
            ++conv_token;
            arch.layers.emplace_back(layer::Deconv{spec});
        } else if (t.name == "N") {
            layer::Norm n;
            if (t.has_parens) {
                expect_arity(t, 4);
                n.params.size = parse_count(t, 0);
                n.params.bias = parse_real(t, 1);
                n.params.alpha = parse_real(t, 2);
                n.params.beta = parse_real(t, 3);
            }
            arch.layers.emplace_back(n);
        } else if (t.name == "FC") {
            expect_arity(t, 1);
            arch.layers.emplace_back(layer::Full{parse_count(t, 0)});
        } else if (t.name == "ReLU" || t.name == "Relu") {
            expect_arity(t, 0);
            arch.layers.emplace_back(layer::Relu{});
        } else if (t.name == "Abs" || t.name == "Log" || t.name == "Exp" || t.name == "Prod") {
            throw ParseError(t.name + " is only valid inside the illumination chain", t.offset);
        } else {
            throw ParseError("unknown layer '" + t.name + "'", t.offset);
        }
    }

    for (auto [index, token] : pending_deconvs) {
        auto& spec = std::get<layer::Deconv>(arch.layers[index]).spec;
        std::optional<ConvSpec> match;
        for (const auto& enc : encoder) {
            if (same_triple(enc, spec)) match = enc;
        }
        if (match) {
            spec.spatial_stride = match->spatial_stride;
            spec.temporal_stride = match->temporal_stride;
            spec.padding = match->padding;
        }
        (void)token;
    }
    return arch;
}

std::string layer_name(const LayerDesc& layer) {
    struct Visitor {
        std::string operator()(const layer::Conv& c) const {
            return "C(" + std::to_string(c.spec.filters) + "," + std::to_string(c.spec.spatial_size) + "," +
                   std::to_string(c.spec.temporal_size) + ")";
        }
        std::string operator()(const layer::Deconv& c) const {
            return "DC(" + std::to_string(c.spec.filters) + "," + std::to_string(c.spec.spatial_size) + "," +
                   std::to_string(c.spec.temporal_size) + ")";
        }
        std::string operator()(const layer::Norm& n) const {
            if (n.params == LrnParams{}) return "N";
            return "N(" + std::to_string(n.params.size) + "," + format_real(n.params.bias) + "," +
                   format_real(n.params.alpha) + "," + format_real(n.params.beta) + ")";
        }
        std::string operator()(const layer::Full& f) const { return "FC(" + std::to_string(f.width) + ")"; }
        std::string operator()(const layer::Relu&) const { return "ReLU"; }
        std::string operator()(const layer::IllumChain& c) const {
            return "C(" + std::to_string(c.mix_filters) + ",1," + std::to_string(c.mix_temporal) + ")-Abs-Log(" +
                   format_real(c.log_scale) + "," + format_real(c.log_shift) + ")-Exp(" + format_real(c.exp_scale) +
                   "," + format_real(c.exp_shift) + ")-Prod";
        }
    };
    return std::visit(Visitor{}, layer);
}

std::string render_arch(const ArchSpec& arch) {
    std::string out;
    for (const auto& l : arch.layers) {
        if (!out.empty()) out += "-";
        out += layer_name(l);
    }
    return out;
}

StrideTable render_strides(const ArchSpec& arch) {
    StrideTable table;
    for (const auto& l : arch.layers) {
        const ConvSpec* spec = nullptr;
        if (const auto* c = std::get_if<layer::Conv>(&l)) spec = &c->spec;
        if (const auto* d = std::get_if<layer::Deconv>(&l)) spec = &d->spec;
        if (spec) table.push_back({spec->spatial_stride, spec->temporal_stride, spec->padding});
    }
    return table;
}

StrideTable parse_stride_table(std::string_view text) {
    StrideTable table;
    std::size_t pos = 0;
    auto read = [&](char terminator, bool last) -> std::size_t {
        std::size_t value = 0;
        const char* begin = text.data() + pos;
        auto [ptr, ec] = std::from_chars(begin, text.data() + text.size(), value);
        if (ec != std::errc()) throw ParseError("expected integer in stride table", pos);
        pos = static_cast<std::size_t>(ptr - text.data());
        if (!last) {
            if (pos >= text.size() || text[pos] != terminator) throw ParseError("expected ':' in stride table", pos);
            ++pos;
        }
        return value;
    };
    while (pos < text.size()) {
        ConvStride s;
        s.spatial_stride = read(':', false);
        s.temporal_stride = read(':', false);
        s.padding = read(',', true);
        if (s.spatial_stride == 0 || s.temporal_stride == 0) throw ParseError("strides must be >= 1", pos);
        table.push_back(s);
        if (pos < text.size()) {
            if (text[pos] != ',') throw ParseError("expected ',' in stride table", pos);
            ++pos;
        }
    }
    return table;
}

std::string format_stride_table(const StrideTable& table) {
    std::string out;
    for (const auto& s : table) {
        if (!out.empty()) out += ",";
        out += std::to_string(s.spatial_stride) + ":" + std::to_string(s.temporal_stride) + ":" +
               std::to_string(s.padding);
    }
    return out;
}

}  // namespace stnet
