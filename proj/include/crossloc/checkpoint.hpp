#pragma once

#include <map>
#include <string>

#include "crossloc/layers.hpp"
#include "crossloc/adam.hpp"
#include "crossloc/tensor.hpp"

namespace crossloc {

// Versioned binary container: named float tensors, little-endian, byte-stable
// for identical contents.
struct Checkpoint {
    std::map<std::string, Tensor<float>> tensors;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    bool has(const std::string& name) const { return tensors.count(name) != 0; }

    template <typename T>
    void put_params(const std::vector<nn::NamedParam<T>>& params) {
        for (const auto& p : params) tensors[p.name] = p.var->value.template cast<float>();
    }

    template <typename T>
    void get_params(const std::vector<nn::NamedParam<T>>& params) const {
        for (const auto& p : params) {
            auto it = tensors.find(p.name);
            if (it == tensors.end())
                throw std::runtime_error("checkpoint: missing tensor " + p.name);
            if (it->second.size() != p.var->value.size())
                throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
            p.var->value = it->second.template cast<T>();
        }
    }

    template <typename T>
    void put_adam(const std::string& prefix, const nn::Adam<T>& opt) {
        const auto& ps = opt.params();
        for (std::size_t i = 0; i < ps.size(); ++i) {
            tensors[prefix + ".m." + ps[i].name] = opt.m()[i].template cast<float>();
            tensors[prefix + ".v." + ps[i].name] = opt.v()[i].template cast<float>();
        }
        tensors[prefix + ".t"] = Tensor<float>::scalar(static_cast<float>(opt.step_count()));
    }
};

}  // namespace crossloc
