#pragma once

#include <string>
#include <string_view>

#include "csattn/tape.hpp"

namespace csattn {

// Ordered named-tensor archive. Creation order is fixed by the builders and
// is the canonical checkpoint order.
template <typename T>
struct ParamStore {
    std::vector<std::string> names;
    std::vector<Tensor<T>> tensors;

    std::int64_t add(std::string name, Tensor<T> t) {
        names.push_back(std::move(name));
        tensors.push_back(std::move(t));
        return static_cast<std::int64_t>(tensors.size()) - 1;
    }

    std::int64_t find(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return static_cast<std::int64_t>(i);
        }
        return -1;
    }

    std::size_t count() const { return tensors.size(); }

    std::int64_t total_elements() const {
        std::int64_t n = 0;
        for (const auto& t : tensors) n += t.size();
        return n;
    }
};

// One leaf per parameter, in store order.
template <typename T>
std::vector<Var<T>> make_leaves(Tape<T>& tape, const ParamStore<T>& ps, bool requires_grad) {
    std::vector<Var<T>> vars;
    vars.reserve(ps.count());
    for (const auto& t : ps.tensors) vars.push_back(tape.leaf(t, requires_grad));
    return vars;
}

// Fan-in-scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)); draws happen
// in double and are cast, so float and double builds see the same stream.
template <typename T>
Tensor<T> fan_in_uniform(Rng& rng, Shape shape, std::int64_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return rng.uniform_tensor<T>(std::move(shape), -bound, bound);
}

}  // namespace csattn
