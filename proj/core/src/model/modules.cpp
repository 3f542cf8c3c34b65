#include "stnet/model/modules.hpp"

#include "stnet/error.hpp"
#include "stnet/layers/dense.hpp"

namespace stnet {

Shape ConvModule::output_shape(const Shape& input) const { return conv3d_output_shape(input, spec_); }

Tensor ConvModule::forward(const ParamStore& params, const Tensor& input) const {
    Tensor y = conv3d(input, params.value(kernels_), spec_);
    add_channel_bias(y, params.value(bias_));
    return y;
}

Tensor ConvModule::backward(const ParamStore& params, const Tensor& input, const Tensor&, const Tensor& grad_out,
                            Gradients& grads, bool need_input_grad) const {
    ConvGrads g = conv3d_backward(input, params.value(kernels_), grad_out, spec_, need_input_grad);
    grads[kernels_] += g.kernels;
    grads[bias_] += channel_bias_grad(grad_out);
    return std::move(g.input);
}

Shape DeconvModule::output_shape(const Shape& input) const {
    return deconv3d_output_shape(input, spec_, out_channels_);
}

Tensor DeconvModule::forward(const ParamStore& params, const Tensor& input) const {
    Tensor y = deconv3d(input, params.value(kernels_), spec_);
    add_channel_bias(y, params.value(bias_));
    return y;
}

Tensor DeconvModule::backward(const ParamStore& params, const Tensor& input, const Tensor&, const Tensor& grad_out,
                              Gradients& grads, bool need_input_grad) const {
    ConvGrads g = deconv3d_backward(input, params.value(kernels_), grad_out, spec_, need_input_grad);
    grads[kernels_] += g.kernels;
    grads[bias_] += channel_bias_grad(grad_out);
    return std::move(g.input);
}

Tensor DenseModule::forward(const ParamStore& params, const Tensor& input) const {
    return fully_connected(input, params.value(weights_), params.value(bias_));
}

Tensor DenseModule::backward(const ParamStore& params, const Tensor& input, const Tensor&, const Tensor& grad_out,
                             Gradients& grads, bool need_input_grad) const {
    DenseGrads g = fully_connected_backward(input, params.value(weights_), grad_out, need_input_grad);
    grads[weights_] += g.weights;
    grads[bias_] += g.bias;
    return std::move(g.input);
}

Tensor ReluModule::forward(const ParamStore&, const Tensor& input) const { return relu(input); }

Tensor ReluModule::backward(const ParamStore&, const Tensor& input, const Tensor&, const Tensor& grad_out, Gradients&,
                            bool need_input_grad) const {
    return need_input_grad ? relu_backward(input, grad_out) : Tensor{};
}

namespace {

Tensor frames_as_channels(const Tensor& x) {
    if (x.rank() != 4 || x.extent(0) != 1) {
        throw ShapeError("frame LRN expects a single-channel [1,t,h,w] clip, got " + to_string(x.shape()));
    }
    return x.reshaped({x.extent(1), x.extent(2), x.extent(3)});
}

}  // namespace

Tensor LrnModule::forward(const ParamStore&, const Tensor& input) const {
    if (!over_frames_) return lrn(input, params_);
    return lrn(frames_as_channels(input), params_).reshaped(input.shape());
}

Tensor LrnModule::backward(const ParamStore&, const Tensor& input, const Tensor&, const Tensor& grad_out, Gradients&,
                           bool need_input_grad) const {
    if (!need_input_grad) return {};
    if (!over_frames_) return lrn_backward(input, grad_out, params_);
    return lrn_backward(frames_as_channels(input), frames_as_channels(grad_out), params_).reshaped(input.shape());
}

Shape ReshapeModule::output_shape(const Shape& input) const {
    if (volume(input) != volume(target_)) {
        throw ShapeError(name_ + ": cannot reshape " + to_string(input) + " to " + to_string(target_));
    }
    return target_;
}

Tensor ReshapeModule::forward(const ParamStore&, const Tensor& input) const { return input.reshaped(target_); }

Tensor ReshapeModule::backward(const ParamStore&, const Tensor& input, const Tensor&, const Tensor& grad_out, Gradients&,
                               bool need_input_grad) const {
    return need_input_grad ? grad_out.reshaped(input.shape()) : Tensor{};
}

IllumParams IllumModule::params(const ParamStore& store) const {
    IllumParams p;
    p.alpha_scale = alpha_;
    p.beta_shift = beta_;
    p.gamma = gamma_;
    p.delta = delta_;
    p.mix = store.value(mix_);
    return p;
}

Tensor IllumModule::forward(const ParamStore& store, const Tensor& input) const {
    return illum_forward(input, params(store));
}

Tensor IllumModule::backward(const ParamStore& store, const Tensor& input, const Tensor&, const Tensor& grad_out,
                             Gradients& grads, bool) const {
    IllumGrads g = illum_backward(input, params(store), grad_out);
    grads[mix_] += g.mix;
    return std::move(g.input);
}

}  // namespace stnet
