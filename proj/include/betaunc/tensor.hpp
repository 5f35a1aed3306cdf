#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "betaunc/errors.hpp"

namespace betaunc {

/// Activation tensor in (batch, channel, spatial) order, contiguous.
template <class T>
struct Tensor3 {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::size_t length = 0;
    std::vector<T> data;

    Tensor3() = default;
    Tensor3(std::size_t b, std::size_t c, std::size_t l, T fill = T{0})
        : batch(b), channels(c), length(l), data(b * c * l, fill) {}

    std::size_t size() const noexcept { return data.size(); }

    T& at(std::size_t b, std::size_t c, std::size_t i) { return data[(b * channels + c) * length + i]; }
    const T& at(std::size_t b, std::size_t c, std::size_t i) const { return data[(b * channels + c) * length + i]; }

    std::span<T> row(std::size_t b, std::size_t c) { return {data.data() + (b * channels + c) * length, length}; }
    std::span<const T> row(std::size_t b, std::size_t c) const {
        return {data.data() + (b * channels + c) * length, length};
    }

    bool same_shape(const Tensor3& o) const noexcept {
        return batch == o.batch && channels == o.channels && length == o.length;
    }

    bool all_finite() const {
        for (const T v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

template <class T>
void check_finite([[maybe_unused]] const Tensor3<T>& t, [[maybe_unused]] const char* where) {
#ifndef NDEBUG
    if (!t.all_finite()) {
        throw ContractViolation(std::string("non-finite activation in ") + where);
    }
#endif
}

}  // namespace betaunc
