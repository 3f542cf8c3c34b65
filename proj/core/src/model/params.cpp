#include "stnet/model/params.hpp"

#include <bit>

#include "stnet/error.hpp"

namespace stnet {

std::size_t ParamStore::add(std::string name, Tensor value) {
    if (find(name)) throw ConfigError("duplicate parameter name " + name);
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    return std::nullopt;
}

Gradients ParamStore::zero_grads() const {
    Gradients g;
    g.reserve(values_.size());
    for (const auto& v : values_) g.emplace_back(v.shape());
    return g;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

std::uint64_t ParamStore::fingerprint(const std::vector<std::size_t>& ids) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t id : ids) {
        for (double v : values_.at(id).data()) {
            std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        }
    }
    return h;
}

}  // namespace stnet
