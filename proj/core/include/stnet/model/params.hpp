#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stnet/tensor.hpp"

namespace stnet {

using Gradients = std::vector<Tensor>;

/// Named trainable tensors. Every module of a network refers to its
/// parameters by index, so copying a store copies the whole model state.
class ParamStore {
public:
    std::size_t add(std::string name, Tensor value);

    std::size_t size() const noexcept { return values_.size(); }
    const std::string& name(std::size_t id) const { return names_.at(id); }
    Tensor& value(std::size_t id) { return values_.at(id); }
    const Tensor& value(std::size_t id) const { return values_.at(id); }
    std::optional<std::size_t> find(const std::string& name) const;

    /// One zero tensor per parameter.
    Gradients zero_grads() const;
    std::size_t scalar_count() const;

    /// FNV-1a over the raw bytes of the selected parameters.
    std::uint64_t fingerprint(const std::vector<std::size_t>& ids) const;

    friend bool operator==(const ParamStore&, const ParamStore&) = default;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
};

}  // namespace stnet
