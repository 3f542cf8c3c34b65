#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stnet/layers/activation.hpp"
#include "stnet/layers/conv.hpp"

namespace stnet {

namespace layer {

struct Conv {
    ConvSpec spec;
    friend bool operator==(const Conv&, const Conv&) = default;
};
struct Deconv {
    ConvSpec spec;
    friend bool operator==(const Deconv&, const Deconv&) = default;
};
struct Norm {
    LrnParams params;
    friend bool operator==(const Norm&, const Norm&) = default;
};
struct Full {
    std::size_t width = 1;
    friend bool operator==(const Full&, const Full&) = default;
};
struct Relu {
    friend bool operator==(const Relu&, const Relu&) = default;
};

/// The illumination front-end written C(f,1,t)-Abs-Log(a,b)-Exp(g,d)-Prod.
struct IllumChain {
    std::size_t mix_filters = 9;
    std::size_t mix_temporal = 9;
    double log_scale = 1.0;  ///< a in ln(a*x + b)
    double log_shift = 1.0;  ///< b
    double exp_scale = -1.0; ///< g in e^(g*x + d)
    double exp_shift = 0.0;  ///< d
    friend bool operator==(const IllumChain&, const IllumChain&) = default;
};

}  // namespace layer

using LayerDesc = std::variant<layer::Conv, layer::Deconv, layer::Norm, layer::Full, layer::Relu, layer::IllumChain>;

/// Ordered layer list parsed from the dash-separated shorthand, e.g.
/// "C(96,11,3)-N-C(256,5,2)-N-FC(4096)".
struct ArchSpec {
    std::vector<LayerDesc> layers;
    friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// Strides and padding the shorthand does not encode, one entry per C/DC
/// token in order of appearance.
struct ConvStride {
    std::size_t spatial_stride = 1;
    std::size_t temporal_stride = 1;
    std::size_t padding = 0;
    friend bool operator==(const ConvStride&, const ConvStride&) = default;
};

using StrideTable = std::vector<ConvStride>;

/// Default strides for the i-th C token: the first layer strides 4 in space
/// and 2 in time, the second 1 and 2, later ones 1 and 1; no padding.
ConvStride default_conv_stride(std::size_t conv_ordinal);

/// Parses the shorthand. Entries of `strides` override the defaults per C/DC
/// token; DC tokens without an entry inherit the strides of the C token with
/// the same (filters, size, frames) triple. Throws ParseError with the byte
/// offset of the first bad character.
ArchSpec parse_arch(std::string_view shorthand, const StrideTable& strides = {});

/// Canonical shorthand; parse_arch(render_arch(a), render_strides(a)) == a.
std::string render_arch(const ArchSpec& arch);
StrideTable render_strides(const ArchSpec& arch);

/// "s:t:p,s:t:p,..." text form of a stride table, used in config files.
StrideTable parse_stride_table(std::string_view text);
std::string format_stride_table(const StrideTable& table);

std::string layer_name(const LayerDesc& layer);

}  // namespace stnet
