#pragma once

#include <string>
#include <vector>

#include "stnet/illum/illum.hpp"
#include "stnet/layers/activation.hpp"
#include "stnet/layers/conv.hpp"
#include "stnet/model/params.hpp"

namespace stnet {

/// A differentiable step of a network. Modules are immutable; their
/// parameters live in a ParamStore passed to every call.
class Module {
public:
    virtual ~Module() = default;

    virtual std::string name() const = 0;
    virtual Shape output_shape(const Shape& input) const = 0;
    virtual Tensor forward(const ParamStore& params, const Tensor& input) const = 0;
    /// Accumulates parameter gradients into grads and returns the input
    /// gradient (empty when need_input_grad is false).
    virtual Tensor backward(const ParamStore& params, const Tensor& input, const Tensor& output, const Tensor& grad_out,
                            Gradients& grads, bool need_input_grad) const = 0;
    virtual std::vector<std::size_t> param_ids() const { return {}; }
};

class ConvModule final : public Module {
public:
    ConvModule(std::string name, ConvSpec spec, std::size_t kernels, std::size_t bias)
        : name_(std::move(name)), spec_(spec), kernels_(kernels), bias_(bias) {}
    std::string name() const override { return name_; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const ParamStore& params, const Tensor& input) const override;
    Tensor backward(const ParamStore& params, const Tensor& input, const Tensor& output, const Tensor& grad_out,
                    Gradients& grads, bool need_input_grad) const override;
    std::vector<std::size_t> param_ids() const override { return {kernels_, bias_}; }

private:
    std::string name_;
    ConvSpec spec_;
    std::size_t kernels_, bias_;
};

class DeconvModule final : public Module {
public:
    DeconvModule(std::string name, ConvSpec spec, std::size_t out_channels, std::size_t kernels, std::size_t bias)
        : name_(std::move(name)), spec_(spec), out_channels_(out_channels), kernels_(kernels), bias_(bias) {}
    std::string name() const override { return name_; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const ParamStore& params, const Tensor& input) const override;
    Tensor backward(const ParamStore& params, const Tensor& input, const Tensor& output, const Tensor& grad_out,
                    Gradients& grads, bool need_input_grad) const override;
    std::vector<std::size_t> param_ids() const override { return {kernels_, bias_}; }

private:
    std::string name_;
    ConvSpec spec_;
    std::size_t out_channels_;
    std::size_t kernels_, bias_;
};

class DenseModule final : public Module {
public:
    DenseModule(std::string name, std::size_t width, std::size_t weights, std::size_t bias)
        : name_(std::move(name)), width_(width), weights_(weights), bias_(bias) {}
    std::string name() const override { return name_; }
    Shape output_shape(const Shape&) const override { return {width_}; }
    Tensor forward(const ParamStore& params, const Tensor& input) const override;
    Tensor backward(const ParamStore& params, const Tensor& input, const Tensor& output, const Tensor& grad_out,
                    Gradients& grads, bool need_input_grad) const override;
    std::vector<std::size_t> param_ids() const override { return {weights_, bias_}; }

private:
    std::string name_;
    std::size_t width_;
    std::size_t weights_, bias_;
};

class ReluModule final : public Module {
public:
    explicit ReluModule(std::string name) : name_(std::move(name)) {}
    std::string name() const override { return name_; }
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const ParamStore& params, const Tensor& input) const override;
    Tensor backward(const ParamStore& params, const Tensor& input, const Tensor& output, const Tensor& grad_out,
                    Gradients& grads, bool need_input_grad) const override;

private:
    std::string name_;
};

/// Cross-channel LRN; with over_frames the frame axis of a [1,t,h,w]
/// clip plays the channel role.
class LrnModule final : public Module {
public:
    LrnModule(std::string name, LrnParams params, bool over_frames = false)
        : name_(std::move(name)), params_(params), over_frames_(over_frames) {}
    std::string name() const override { return name_; }
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const ParamStore& params, const Tensor& input) const override;
    Tensor backward(const ParamStore& params, const Tensor& input, const Tensor& output, const Tensor& grad_out,
                    Gradients& grads, bool need_input_grad) const override;

private:
    std::string name_;
    LrnParams params_;
    bool over_frames_;
};

class ReshapeModule final : public Module {
public:
    ReshapeModule(std::string name, Shape target) : name_(std::move(name)), target_(std::move(target)) {}
    std::string name() const override { return name_; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const ParamStore& params, const Tensor& input) const override;
    Tensor backward(const ParamStore& params, const Tensor& input, const Tensor& output, const Tensor& grad_out,
                    Gradients& grads, bool need_input_grad) const override;

private:
    std::string name_;
    Shape target_;
};

/// Illumination front-end; constants fixed, frame mixer trainable.
class IllumModule final : public Module {
public:
    IllumModule(std::string name, double alpha, double beta, double gamma, double delta, std::size_t mix)
        : name_(std::move(name)), alpha_(alpha), beta_(beta), gamma_(gamma), delta_(delta), mix_(mix) {}
    std::string name() const override { return name_; }
    Shape output_shape(const Shape& input) const override { return input; }
    Tensor forward(const ParamStore& params, const Tensor& input) const override;
    Tensor backward(const ParamStore& params, const Tensor& input, const Tensor& output, const Tensor& grad_out,
                    Gradients& grads, bool need_input_grad) const override;
    std::vector<std::size_t> param_ids() const override { return {mix_}; }

    IllumParams params(const ParamStore& store) const;

private:
    std::string name_;
    double alpha_, beta_, gamma_, delta_;
    std::size_t mix_;
};

}  // namespace stnet
