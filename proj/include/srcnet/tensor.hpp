#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace srcnet {

/// Dense row-major float tensor. Rank 0 is a scalar: empty dims, one value.
/// Images use NCHW order throughout.
struct Tensor {
    std::vector<int> dims;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int> d, std::vector<float> v);

    static Tensor zeros(std::vector<int> dims);
    static Tensor full(std::vector<int> dims, float value);
    static Tensor scalar(float value);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(dims.size()); }
    bool same_dims(const Tensor& o) const { return dims == o.dims; }
    bool empty() const { return data.empty(); }

    int dim(int i) const { return dims[static_cast<std::size_t>(i)]; }

    float& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // NCHW access, rank-4 only.
    float at4(int n, int c, int h, int w) const;
    float& at4(int n, int c, int h, int w);

    /// Value of a scalar (rank-0) tensor.
    float item() const;

    std::string dims_str() const;  // "[2,3,8,8]" for messages
};

std::int64_t numel_of(const std::vector<int>& dims);
bool all_finite(const Tensor& t);
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// Stacks rank-4 [1,C,H,W] tensors along the batch axis.
Tensor stack_batch(const std::vector<const Tensor*>& items);

/// Extracts one channel of a rank-4 tensor as [N,1,H,W].
Tensor take_channel(const Tensor& t, int channel);

}  // namespace srcnet
