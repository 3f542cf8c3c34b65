#include "stnet/layers/conv.hpp"

#include <string>
#include <vector>

#include "../detail/gemm.hpp"
#include "stnet/error.hpp"

namespace stnet {

namespace {

struct Geometry {
    std::size_t channels, frames, height, width;            // conv input
    std::size_t filters, out_frames, out_height, out_width;  // conv output
    std::size_t kt, kh, kw;
    std::size_t st, ss, pad;

    std::size_t patch() const { return channels * kt * kh * kw; }
    std::size_t positions() const { return out_frames * out_height * out_width; }
};

Geometry geometry_for(const Shape& conv_input, const ConvSpec& spec) {
    validate(spec);
    if (conv_input.size() != 4) {
        throw ShapeError("conv3d: input must be [channels,frames,height,width], got " + to_string(conv_input));
    }
    Geometry g{};
    g.channels = conv_input[0];
    g.frames = conv_input[1];
    g.height = conv_input[2];
    g.width = conv_input[3];
    g.filters = spec.filters;
    g.kt = spec.temporal_size;
    g.kh = g.kw = spec.spatial_size;
    g.st = spec.temporal_stride;
    g.ss = spec.spatial_stride;
    g.pad = spec.padding;
    g.out_frames = conv_extent(g.frames, g.kt, g.st, 0, "frames");
    g.out_height = conv_extent(g.height, g.kh, g.ss, g.pad, "height");
    g.out_width = conv_extent(g.width, g.kw, g.ss, g.pad, "width");
    return g;
}

void check_kernels(const Tensor& kernels, const Geometry& g) {
    const Shape expected{g.filters, g.channels, g.kt, g.kh, g.kw};
    if (kernels.shape() != expected) {
        if (kernels.rank() == 5 && kernels.extent(1) != g.channels) {
            throw ShapeError("conv3d: channel mismatch, input has " + std::to_string(g.channels) +
                             " channels but kernels expect " + std::to_string(kernels.extent(1)));
        }
        throw ShapeError("conv3d: kernel shape " + to_string(kernels.shape()) + " does not match " +
                         to_string(expected));
    }
}

// cols[(c,kt,kh,kw), (ot,oh,ow)]
std::vector<double> im2col(const double* x, const Geometry& g) {
    const std::size_t n = g.positions();
    std::vector<double> cols(g.patch() * n, 0.0);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t dt = 0; dt < g.kt; ++dt) {
            for (std::size_t dh = 0; dh < g.kh; ++dh) {
                for (std::size_t dw = 0; dw < g.kw; ++dw, ++row) {
                    double* dst = cols.data() + row * n;
                    for (std::size_t ot = 0; ot < g.out_frames; ++ot) {
                        const std::size_t it = ot * g.st + dt;
                        for (std::size_t oh = 0; oh < g.out_height; ++oh) {
                            const long ih = static_cast<long>(oh * g.ss + dh) - static_cast<long>(g.pad);
                            double* out = dst + (ot * g.out_height + oh) * g.out_width;
                            if (ih < 0 || ih >= static_cast<long>(g.height)) continue;
                            const double* src = x + ((c * g.frames + it) * g.height + ih) * g.width;
                            for (std::size_t ow = 0; ow < g.out_width; ++ow) {
                                const long iw = static_cast<long>(ow * g.ss + dw) - static_cast<long>(g.pad);
                                if (iw >= 0 && iw < static_cast<long>(g.width)) out[ow] = src[iw];
                            }
                        }
                    }
                }
            }
        }
    }
    return cols;
}

// Scatter-add of cols back into x; adjoint of im2col.
void col2im(const std::vector<double>& cols, const Geometry& g, double* x) {
    const std::size_t n = g.positions();
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t dt = 0; dt < g.kt; ++dt) {
            for (std::size_t dh = 0; dh < g.kh; ++dh) {
                for (std::size_t dw = 0; dw < g.kw; ++dw, ++row) {
                    const double* src = cols.data() + row * n;
                    for (std::size_t ot = 0; ot < g.out_frames; ++ot) {
                        const std::size_t it = ot * g.st + dt;
                        for (std::size_t oh = 0; oh < g.out_height; ++oh) {
                            const long ih = static_cast<long>(oh * g.ss + dh) - static_cast<long>(g.pad);
                            if (ih < 0 || ih >= static_cast<long>(g.height)) continue;
                            const double* in = src + (ot * g.out_height + oh) * g.out_width;
                            double* dst = x + ((c * g.frames + it) * g.height + ih) * g.width;
                            for (std::size_t ow = 0; ow < g.out_width; ++ow) {
                                const long iw = static_cast<long>(ow * g.ss + dw) - static_cast<long>(g.pad);
                                if (iw >= 0 && iw < static_cast<long>(g.width)) dst[iw] += in[ow];
                            }
                        }
                    }
                }
            }
        }
    }
}

// y[f, pos] = K[f, patch] * cols[patch, pos]
Tensor correlate(const Tensor& x, const Tensor& kernels, const Geometry& g) {
    const auto cols = im2col(x.data().data(), g);
    Tensor y({g.filters, g.out_frames, g.out_height, g.out_width});
    detail::gemm_nn(g.filters, g.positions(), g.patch(), kernels.data().data(), cols.data(), y.data().data());
    return y;
}

// Adjoint of correlate with respect to x: x = col2im(K^T * gy).
Tensor correlate_adjoint(const Tensor& gy, const Tensor& kernels, const Geometry& g) {
    std::vector<double> cols(g.patch() * g.positions(), 0.0);
    detail::gemm_tn(g.patch(), g.positions(), g.filters, kernels.data().data(), gy.data().data(), cols.data());
    Tensor x({g.channels, g.frames, g.height, g.width});
    col2im(cols, g, x.data().data());
    return x;
}

// dK[f, patch] = gy[f, pos] * cols[patch, pos]^T
Tensor kernel_grad(const Tensor& x, const Tensor& gy, const Geometry& g) {
    const auto cols = im2col(x.data().data(), g);
    Tensor gk({g.filters, g.channels, g.kt, g.kh, g.kw});
    detail::gemm_nt(g.filters, g.patch(), g.positions(), gy.data().data(), cols.data(), gk.data().data());
    return gk;
}

Geometry deconv_geometry(const Shape& input, const Tensor& kernels, const ConvSpec& spec) {
    if (kernels.rank() != 5) throw ShapeError("deconv3d: kernels must be rank 5");
    const Shape out = deconv3d_output_shape(input, spec, kernels.extent(1));
    Geometry g = geometry_for(out, spec);
    return g;
}

}  // namespace

void validate(const ConvSpec& spec) {
    if (spec.filters < 1 || spec.spatial_size < 1 || spec.temporal_size < 1 || spec.spatial_stride < 1 ||
        spec.temporal_stride < 1) {
        throw ShapeError("conv spec: filters, sizes and strides must all be >= 1");
    }
}

std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad, const char* axis) {
    const std::size_t padded = in + 2 * pad;
    if (kernel > padded) {
        throw ShapeError(std::string("kernel extent ") + std::to_string(kernel) + " exceeds input extent " +
                         std::to_string(padded) + " on axis " + axis);
    }
    if ((padded - kernel) % stride != 0) {
        throw ShapeError(std::string("stride ") + std::to_string(stride) + " does not divide (" +
                         std::to_string(padded) + " - " + std::to_string(kernel) + ") on axis " + axis);
    }
    return (padded - kernel) / stride + 1;
}

std::size_t deconv_extent(std::size_t out, std::size_t kernel, std::size_t stride, std::size_t pad, const char* axis) {
    const std::size_t full = (out - 1) * stride + kernel;
    if (out < 1 || full <= 2 * pad) {
        throw ShapeError(std::string("deconv extent collapses on axis ") + axis);
    }
    return full - 2 * pad;
}

Shape conv_kernel_shape(const ConvSpec& spec, std::size_t in_channels) {
    return {spec.filters, in_channels, spec.temporal_size, spec.spatial_size, spec.spatial_size};
}

Shape conv3d_output_shape(const Shape& input, const ConvSpec& spec) {
    const Geometry g = geometry_for(input, spec);
    return {g.filters, g.out_frames, g.out_height, g.out_width};
}

Shape deconv3d_output_shape(const Shape& input, const ConvSpec& spec, std::size_t out_channels) {
    validate(spec);
    if (input.size() != 4) {
        throw ShapeError("deconv3d: input must be [channels,frames,height,width], got " + to_string(input));
    }
    if (input[0] != spec.filters) {
        throw ShapeError("deconv3d: channel mismatch, input has " + std::to_string(input[0]) +
                         " channels but spec has " + std::to_string(spec.filters) + " filters");
    }
    return {out_channels, deconv_extent(input[1], spec.temporal_size, spec.temporal_stride, 0, "frames"),
            deconv_extent(input[2], spec.spatial_size, spec.spatial_stride, spec.padding, "height"),
            deconv_extent(input[3], spec.spatial_size, spec.spatial_stride, spec.padding, "width")};
}

Tensor conv3d(const Tensor& input, const Tensor& kernels, const ConvSpec& spec) {
    const Geometry g = geometry_for(input.shape(), spec);
    check_kernels(kernels, g);
    return correlate(input, kernels, g);
}

ConvGrads conv3d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out, const ConvSpec& spec,
                          bool need_input_grad) {
    const Geometry g = geometry_for(input.shape(), spec);
    check_kernels(kernels, g);
    if (grad_out.shape() != Shape{g.filters, g.out_frames, g.out_height, g.out_width}) {
        throw ShapeError("conv3d_backward: grad_out shape " + to_string(grad_out.shape()) + " mismatch");
    }
    ConvGrads out;
    out.kernels = kernel_grad(input, grad_out, g);
    if (need_input_grad) out.input = correlate_adjoint(grad_out, kernels, g);
    return out;
}

Tensor deconv3d(const Tensor& input, const Tensor& kernels, const ConvSpec& spec) {
    const Geometry g = deconv_geometry(input.shape(), kernels, spec);
    check_kernels(kernels, g);
    return correlate_adjoint(input, kernels, g);
}

ConvGrads deconv3d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out, const ConvSpec& spec,
                            bool need_input_grad) {
    const Geometry g = deconv_geometry(input.shape(), kernels, spec);
    check_kernels(kernels, g);
    if (grad_out.shape() != Shape{g.channels, g.frames, g.height, g.width}) {
        throw ShapeError("deconv3d_backward: grad_out shape " + to_string(grad_out.shape()) + " mismatch");
    }
    ConvGrads out;
    // The deconv output plays the conv input role, its input the conv output role.
    out.kernels = kernel_grad(grad_out, input, g);
    if (need_input_grad) out.input = correlate(grad_out, kernels, g);
    return out;
}

void add_channel_bias(Tensor& activations, const Tensor& bias) {
    const std::size_t channels = activations.extent(0);
    if (bias.size() != channels) {
        throw ShapeError("bias length " + std::to_string(bias.size()) + " does not match " +
                         std::to_string(channels) + " channels");
    }
    const std::size_t per = activations.size() / channels;
    double* data = activations.data().data();
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < per; ++i) data[c * per + i] += bias[c];
    }
}

Tensor channel_bias_grad(const Tensor& grad) {
    const std::size_t channels = grad.extent(0);
    const std::size_t per = grad.size() / channels;
    Tensor out({channels});
    for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < per; ++i) acc += grad[c * per + i];
        out[c] = acc;
    }
    return out;
}

}  // namespace stnet
