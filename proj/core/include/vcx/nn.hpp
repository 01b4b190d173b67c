#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vcx/rng.hpp"

namespace vcx::nn {

/// 2-d convolution on channels-last [H,W,C] maps. Weights [k,k,in_c,out_c].
struct Conv2d {
    int in_c = 0, out_c = 0, k = 3, stride = 1, pad = 1;
    std::vector<float> w, b;

    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad_);

    int out_dim(int in_dim) const { return (in_dim + 2 * pad - k) / stride + 1; }
    void init(RandomStream& stream);
    std::size_t param_count() const { return w.size() + b.size(); }

    void forward(const float* x, int h, int w_in, float* y) const;
    /// gx may be null when the input gradient is not needed. gw/gb accumulate.
    void backward(const float* x, int h, int w_in, const float* gy, float* gx, float* gw,
                  float* gb) const;
};

/// Transposed 2-d convolution; with k=4, stride=2, pad=1 it exactly doubles H and W.
struct ConvTranspose2d {
    int in_c = 0, out_c = 0, k = 4, stride = 2, pad = 1;
    std::vector<float> w, b;

    ConvTranspose2d() = default;
    ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride_, int pad_);

    int out_dim(int in_dim) const { return (in_dim - 1) * stride - 2 * pad + k; }
    void init(RandomStream& stream);
    std::size_t param_count() const { return w.size() + b.size(); }

    void forward(const float* x, int h, int w_in, float* y) const;
    void backward(const float* x, int h, int w_in, const float* gy, float* gx, float* gw,
                  float* gb) const;
};

/// Fully connected layer. Weights [in_n, out_n].
struct Dense {
    int in_n = 0, out_n = 0;
    std::vector<float> w, b;

    Dense() = default;
    Dense(int in, int out);

    void init(RandomStream& stream);
    std::size_t param_count() const { return w.size() + b.size(); }

    void forward(const float* x, float* y) const;
    void backward(const float* x, const float* gy, float* gx, float* gw, float* gb) const;
};

void tanh_forward(float* y, std::size_t n);
/// g *= 1 - y^2, where y is the stored tanh output.
void tanh_backward(const float* y, float* g, std::size_t n);

void sigmoid_forward(float* y, std::size_t n);
void sigmoid_backward(const float* y, float* g, std::size_t n);

/// Named view into a model's parameter vectors; the flat order defines the
/// layout of gradient buffers and optimizer state.
struct ParamRef {
    std::string name;
    std::vector<float>* values = nullptr;
};

struct ParamPack {
    std::vector<ParamRef> refs;
    std::vector<std::size_t> offsets; // per-ref offset into the flat vector
    std::size_t total = 0;

    void build(std::vector<ParamRef> r);
    std::vector<float> gather() const;
    void scatter(const std::vector<float>& flat);
    /// Flat span (offset, size) of the ref with the given name.
    std::pair<std::size_t, std::size_t> span(const std::string& name) const;
};

struct Adam {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<float> m, v;
    long t = 0;

    void step(std::vector<float>& params, const std::vector<float>& grads);
};

} // namespace vcx::nn
