#include "srcnet/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "srcnet/errors.hpp"

namespace srcnet {

std::int64_t numel_of(const std::vector<int>& dims) {
    std::int64_t n = 1;
    for (int d : dims) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> d, std::vector<float> v) : dims(std::move(d)), data(std::move(v)) {
    if (numel_of(dims) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match dims " + dims_str());
}

Tensor Tensor::zeros(std::vector<int> dims) {
    auto n = numel_of(dims);
    Tensor t;
    t.dims = std::move(dims);
    t.data.assign(static_cast<std::size_t>(n), 0.0f);
    return t;
}

Tensor Tensor::full(std::vector<int> dims, float value) {
    Tensor t = zeros(std::move(dims));
    for (auto& x : t.data) x = value;
    return t;
}

Tensor Tensor::scalar(float value) {
    Tensor t;
    t.data.assign(1, value);
    return t;
}

float Tensor::at4(int n, int c, int h, int w) const {
    return data[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * dims[1] + c) * dims[2] + h) * dims[3] + w)];
}

float& Tensor::at4(int n, int c, int h, int w) {
    return data[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * dims[1] + c) * dims[2] + h) * dims[3] + w)];
}

float Tensor::item() const {
    if (!dims.empty() || data.size() != 1)
        throw ContractError("item() requires a rank-0 tensor, got " + dims_str());
    return data[0];
}

std::string Tensor::dims_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

bool all_finite(const Tensor& t) {
    for (float x : t.data)
        if (!std::isfinite(x)) return false;
    return true;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.dims != b.dims || a.data.size() != b.data.size()) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        // bit compare, so that -0.0 vs 0.0 or NaN payloads do not slip through
        if (std::bit_cast<std::uint32_t>(a.data[i]) != std::bit_cast<std::uint32_t>(b.data[i]))
            return false;
    }
    return true;
}

Tensor stack_batch(const std::vector<const Tensor*>& items) {
    if (items.empty()) throw ContractError("stack_batch: empty batch");
    const Tensor& first = *items[0];
    if (first.rank() != 4 || first.dim(0) != 1)
        throw ShapeError("stack_batch expects [1,C,H,W] items, got " + first.dims_str());
    Tensor out = Tensor::zeros({static_cast<int>(items.size()), first.dim(1), first.dim(2), first.dim(3)});
    std::int64_t per = first.numel();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i]->same_dims(first))
            throw ShapeError("stack_batch: item " + std::to_string(i) + " has dims " +
                             items[i]->dims_str() + ", expected " + first.dims_str());
        std::copy(items[i]->data.begin(), items[i]->data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(per * static_cast<std::int64_t>(i)));
    }
    return out;
}

Tensor take_channel(const Tensor& t, int channel) {
    if (t.rank() != 4) throw ShapeError("take_channel expects rank-4 input, got " + t.dims_str());
    if (channel < 0 || channel >= t.dim(1))
        throw ShapeError("take_channel: channel " + std::to_string(channel) + " out of range for " + t.dims_str());
    const int n = t.dim(0), h = t.dim(2), w = t.dim(3);
    Tensor out = Tensor::zeros({n, 1, h, w});
    for (int i = 0; i < n; ++i)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at4(i, 0, y, x) = t.at4(i, channel, y, x);
    return out;
}

}  // namespace srcnet
