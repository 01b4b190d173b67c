#include "vcx/nn.hpp"

#include <cassert>
#include <cmath>
#include <cstring>

#include "vcx/errors.hpp"

namespace vcx::nn {

namespace {

void init_normal(std::vector<float>& w, double std_dev, RandomStream& stream) {
    std::size_t i = 0;
    while (i + 1 < w.size()) {
        float a, b;
        stream.next_gaussian_pair(a, b);
        w[i] = static_cast<float>(a * std_dev);
        w[i + 1] = static_cast<float>(b * std_dev);
        i += 2;
    }
    if (i < w.size()) w[i] = static_cast<float>(stream.next_gaussian() * std_dev);
}

} // namespace

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad_)
    : in_c(in_channels), out_c(out_channels), k(kernel), stride(stride_), pad(pad_) {
    w.assign(static_cast<std::size_t>(k) * k * in_c * out_c, 0.0f);
    b.assign(static_cast<std::size_t>(out_c), 0.0f);
}

void Conv2d::init(RandomStream& stream) {
    init_normal(w, 1.0 / std::sqrt(static_cast<double>(k) * k * in_c), stream);
    std::fill(b.begin(), b.end(), 0.0f);
}

void Conv2d::forward(const float* x, int h, int w_in, float* y) const {
    const int ho = out_dim(h);
    const int wo = out_dim(w_in);
    // double accumulators: output rounds once, which keeps finite-difference
    // gradient checks well inside their tolerance
    std::vector<double> acc(static_cast<std::size_t>(out_c));
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            for (int oc = 0; oc < out_c; ++oc) acc[oc] = b[oc];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= w_in) continue;
                    const float* xr = x + (static_cast<std::size_t>(iy) * w_in + ix) * in_c;
                    const float* wr = w.data() + (static_cast<std::size_t>(ky) * k + kx) * in_c * out_c;
                    for (int ic = 0; ic < in_c; ++ic) {
                        const double xv = xr[ic];
                        if (xv == 0.0) continue;
                        const float* wc = wr + static_cast<std::size_t>(ic) * out_c;
                        for (int oc = 0; oc < out_c; ++oc) acc[oc] += xv * wc[oc];
                    }
                }
            }
            float* yr = y + (static_cast<std::size_t>(oy) * wo + ox) * out_c;
            for (int oc = 0; oc < out_c; ++oc) yr[oc] = static_cast<float>(acc[oc]);
        }
    }
}

void Conv2d::backward(const float* x, int h, int w_in, const float* gy, float* gx, float* gw,
                      float* gb) const {
    const int ho = out_dim(h);
    const int wo = out_dim(w_in);
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            const float* g = gy + (static_cast<std::size_t>(oy) * wo + ox) * out_c;
            for (int oc = 0; oc < out_c; ++oc) gb[oc] += g[oc];
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= w_in) continue;
                    const std::size_t xoff = (static_cast<std::size_t>(iy) * w_in + ix) * in_c;
                    const std::size_t woff = (static_cast<std::size_t>(ky) * k + kx) * in_c * out_c;
                    for (int ic = 0; ic < in_c; ++ic) {
                        const float xv = x[xoff + ic];
                        const float* wc = w.data() + woff + static_cast<std::size_t>(ic) * out_c;
                        float* gwc = gw + woff + static_cast<std::size_t>(ic) * out_c;
                        double gx_acc = 0.0;
                        for (int oc = 0; oc < out_c; ++oc) {
                            gwc[oc] += xv * g[oc];
                            gx_acc += static_cast<double>(wc[oc]) * g[oc];
                        }
                        if (gx) gx[xoff + ic] += static_cast<float>(gx_acc);
                    }
                }
            }
        }
    }
}

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride_,
                                 int pad_)
    : in_c(in_channels), out_c(out_channels), k(kernel), stride(stride_), pad(pad_) {
    w.assign(static_cast<std::size_t>(k) * k * in_c * out_c, 0.0f);
    b.assign(static_cast<std::size_t>(out_c), 0.0f);
}

void ConvTranspose2d::init(RandomStream& stream) {
    init_normal(w, 1.0 / std::sqrt(static_cast<double>(k) * k * in_c / (stride * stride)), stream);
    std::fill(b.begin(), b.end(), 0.0f);
}

void ConvTranspose2d::forward(const float* x, int h, int w_in, float* y) const {
    const int ho = out_dim(h);
    const int wo = out_dim(w_in);
    std::vector<double> acc(static_cast<std::size_t>(ho) * wo * out_c);
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox)
            for (int oc = 0; oc < out_c; ++oc)
                acc[(static_cast<std::size_t>(oy) * wo + ox) * out_c + oc] = b[oc];
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w_in; ++ix) {
            const float* xv = x + (static_cast<std::size_t>(iy) * w_in + ix) * in_c;
            for (int ky = 0; ky < k; ++ky) {
                const int oy = iy * stride - pad + ky;
                if (oy < 0 || oy >= ho) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ox = ix * stride - pad + kx;
                    if (ox < 0 || ox >= wo) continue;
                    double* yr = acc.data() + (static_cast<std::size_t>(oy) * wo + ox) * out_c;
                    const float* wr =
                        w.data() + (static_cast<std::size_t>(ky) * k + kx) * in_c * out_c;
                    for (int ic = 0; ic < in_c; ++ic) {
                        const double v = xv[ic];
                        if (v == 0.0) continue;
                        const float* wc = wr + static_cast<std::size_t>(ic) * out_c;
                        for (int oc = 0; oc < out_c; ++oc) yr[oc] += v * wc[oc];
                    }
                }
            }
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) y[i] = static_cast<float>(acc[i]);
}

void ConvTranspose2d::backward(const float* x, int h, int w_in, const float* gy, float* gx,
                               float* gw, float* gb) const {
    const int ho = out_dim(h);
    const int wo = out_dim(w_in);
    for (int oy = 0; oy < ho; ++oy) {
        const float* g = gy + static_cast<std::size_t>(oy) * wo * out_c;
        for (int ox = 0; ox < wo; ++ox)
            for (int oc = 0; oc < out_c; ++oc) gb[oc] += g[static_cast<std::size_t>(ox) * out_c + oc];
    }
    for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w_in; ++ix) {
            const std::size_t xoff = (static_cast<std::size_t>(iy) * w_in + ix) * in_c;
            for (int ky = 0; ky < k; ++ky) {
                const int oy = iy * stride - pad + ky;
                if (oy < 0 || oy >= ho) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ox = ix * stride - pad + kx;
                    if (ox < 0 || ox >= wo) continue;
                    const float* g = gy + (static_cast<std::size_t>(oy) * wo + ox) * out_c;
                    const std::size_t woff = (static_cast<std::size_t>(ky) * k + kx) * in_c * out_c;
                    for (int ic = 0; ic < in_c; ++ic) {
                        const float xv = x[xoff + ic];
                        const float* wc = w.data() + woff + static_cast<std::size_t>(ic) * out_c;
                        float* gwc = gw + woff + static_cast<std::size_t>(ic) * out_c;
                        double gx_acc = 0.0;
                        for (int oc = 0; oc < out_c; ++oc) {
                            gwc[oc] += xv * g[oc];
                            gx_acc += static_cast<double>(wc[oc]) * g[oc];
                        }
                        if (gx) gx[xoff + ic] += static_cast<float>(gx_acc);
                    }
                }
            }
        }
    }
}

Dense::Dense(int in, int out) : in_n(in), out_n(out) {
    w.assign(static_cast<std::size_t>(in_n) * out_n, 0.0f);
    b.assign(static_cast<std::size_t>(out_n), 0.0f);
}

void Dense::init(RandomStream& stream) {
    init_normal(w, 1.0 / std::sqrt(static_cast<double>(in_n)), stream);
    std::fill(b.begin(), b.end(), 0.0f);
}

void Dense::forward(const float* x, float* y) const {
    std::vector<double> acc(b.begin(), b.end());
    for (int i = 0; i < in_n; ++i) {
        const double xv = x[i];
        if (xv == 0.0) continue;
        const float* wr = w.data() + static_cast<std::size_t>(i) * out_n;
        for (int o = 0; o < out_n; ++o) acc[o] += xv * wr[o];
    }
    for (int o = 0; o < out_n; ++o) y[o] = static_cast<float>(acc[o]);
}

void Dense::backward(const float* x, const float* gy, float* gx, float* gw, float* gb) const {
    for (int o = 0; o < out_n; ++o) gb[o] += gy[o];
    for (int i = 0; i < in_n; ++i) {
        const float xv = x[i];
        const float* wr = w.data() + static_cast<std::size_t>(i) * out_n;
        float* gwr = gw + static_cast<std::size_t>(i) * out_n;
        double acc = 0.0;
        for (int o = 0; o < out_n; ++o) {
            gwr[o] += xv * gy[o];
            acc += static_cast<double>(wr[o]) * gy[o];
        }
        if (gx) gx[i] += static_cast<float>(acc);
    }
}

void tanh_forward(float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(y[i]);
}

void tanh_backward(const float* y, float* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) g[i] *= 1.0f - y[i] * y[i];
}

void sigmoid_forward(float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = 1.0f / (1.0f + std::exp(-y[i]));
}

void sigmoid_backward(const float* y, float* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) g[i] *= y[i] * (1.0f - y[i]);
}

void ParamPack::build(std::vector<ParamRef> r) {
    refs = std::move(r);
    offsets.clear();
    total = 0;
    for (const ParamRef& ref : refs) {
        offsets.push_back(total);
        total += ref.values->size();
    }
}

std::vector<float> ParamPack::gather() const {
    std::vector<float> flat(total);
    for (std::size_t i = 0; i < refs.size(); ++i)
        std::memcpy(flat.data() + offsets[i], refs[i].values->data(),
                    refs[i].values->size() * sizeof(float));
    return flat;
}

void ParamPack::scatter(const std::vector<float>& flat) {
    if (flat.size() != total) throw ShapeError("ParamPack::scatter: size mismatch");
    for (std::size_t i = 0; i < refs.size(); ++i)
        std::memcpy(refs[i].values->data(), flat.data() + offsets[i],
                    refs[i].values->size() * sizeof(float));
}

std::pair<std::size_t, std::size_t> ParamPack::span(const std::string& name) const {
    for (std::size_t i = 0; i < refs.size(); ++i)
        if (refs[i].name == name) return {offsets[i], refs[i].values->size()};
    throw ConfigError("ParamPack: no parameter named '" + name + "'");
}

void Adam::step(std::vector<float>& params, const std::vector<float>& grads) {
    if (params.size() != grads.size()) throw ShapeError("Adam::step: size mismatch");
    if (m.empty()) {
        m.assign(params.size(), 0.0f);
        v.assign(params.size(), 0.0f);
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = static_cast<float>(beta1 * m[i] + (1.0 - beta1) * g);
        v[i] = static_cast<float>(beta2 * v[i] + (1.0 - beta2) * g * g);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
    }
}

} // namespace vcx::nn
