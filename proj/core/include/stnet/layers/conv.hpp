#pragma once

#include <cstddef>

#include "stnet/tensor.hpp"

namespace stnet {

/// One spatio-temporal convolution: `filters` kernels of
/// spatial_size x spatial_size pixels spanning temporal_size frames. Padding
/// is applied on both spatial sides; the temporal axis is never padded.
struct ConvSpec {
    std::size_t filters = 1;
    std::size_t spatial_size = 1;
    std::size_t temporal_size = 1;
    std::size_t spatial_stride = 1;
    std::size_t temporal_stride = 1;
    std::size_t padding = 0;

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

void validate(const ConvSpec& spec);

/// Output extent of a strided window: (in + 2*pad - k) / stride + 1.
/// Throws ShapeError naming `axis` unless the window fits exactly.
std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad, const char* axis);

/// Inverse of conv_extent: (out - 1) * stride + kernel - 2*pad.
std::size_t deconv_extent(std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad, const char* axis);

/// Kernel tensor shape [filters, in_channels, t, s, s].
Shape conv_kernel_shape(const ConvSpec& spec, std::size_t in_channels);

/// [c,t,h,w] -> [filters,t',h',w'].
Shape conv3d_output_shape(const Shape& input, const ConvSpec& spec);
/// [filters,t',h',w'] -> [c,t,h,w] where c comes from the kernel tensor.
Shape deconv3d_output_shape(const Shape& input, const ConvSpec& spec, std::size_t out_channels);

/// Valid cross-correlation (no kernel flip) of input [c,t,h,w] with kernels
/// [f,c,tk,hk,wk].
Tensor conv3d(const Tensor& input, const Tensor& kernels, const ConvSpec& spec);

struct ConvGrads {
    Tensor input;    ///< empty when not requested
    Tensor kernels;
};

ConvGrads conv3d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out, const ConvSpec& spec,
                          bool need_input_grad = true);

/// Transposed convolution with the same kernel layout as conv3d: input has
/// `filters` channels, the output has the kernels' in_channels channels and
/// spatio-temporal extents that invert conv3d's for the same spec.
Tensor deconv3d(const Tensor& input, const Tensor& kernels, const ConvSpec& spec);

ConvGrads deconv3d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out, const ConvSpec& spec,
                            bool need_input_grad = true);

/// Adds bias[f] to every element of channel f in place.
void add_channel_bias(Tensor& activations, const Tensor& bias);
/// Gradient of add_channel_bias: per-channel sums of grad.
Tensor channel_bias_grad(const Tensor& grad);

}  // namespace stnet
