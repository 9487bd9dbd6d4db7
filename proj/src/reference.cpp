// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "apu/error.hpp"
#include "apu/model.hpp"

namespace apu::ir {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

std::vector<double> as_reals(const Tensor& t) {
    std::vector<double> v(t.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.value(i);
    return v;
}

std::vector<std::int64_t> weight_ints(const Tensor& t, const LayerQuant& lq) {
    std::vector<std::int64_t> v(t.numel());
    if (t.is_int()) {
        auto s = t.ints();
        std::copy(s.begin(), s.end(), v.begin());
    } else {
        auto s = t.reals();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = lq.weight_int(s[i]);
    }
    return v;
}

std::vector<std::int64_t> bias_ints(const Tensor& t, double acc_scale) {
    std::vector<std::int64_t> v(t.numel());
    if (t.is_int()) {
        auto s = t.ints();
        std::copy(s.begin(), s.end(), v.begin());
    } else {
        auto s = t.reals();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = bias_int(s[i], acc_scale);
    }
    return v;
}

// Generic windowed traversal shared by conv and pool, real or integer.
template <class T>
std::vector<T> conv_forward(const std::vector<T>& x, const Shape& in, const Conv2D& c, const std::vector<T>& k,
                            const std::vector<T>& b, const Shape& out) {
    const std::size_t H = in[1], W = in[2], OH = out[1], OW = out[2];
    const std::size_t Co = c.out_channels(), Cg = c.kernel.dim(1), KH = c.kh(), KW = c.kw();
    const std::size_t per_group_out = Co / c.groups;
    std::vector<T> y(Co * OH * OW);
    for (std::size_t o = 0; o < Co; ++o) {
        const std::size_t g = o / per_group_out;
        for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
                T acc = b[o];
                for (std::size_t ci = 0; ci < Cg; ++ci) {
                    const std::size_t cin = g * Cg + ci;
                    for (std::size_t ky = 0; ky < KH; ++ky) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * c.stride[0] + ky) -
                                        static_cast<std::ptrdiff_t>(c.padding[0]);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t kx = 0; kx < KW; ++kx) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * c.stride[1] + kx) -
                                            static_cast<std::ptrdiff_t>(c.padding[1]);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                            acc += k[((o * Cg + ci) * KH + ky) * KW + kx] *
                                   x[(cin * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
                        }
                    }
                }
                y[(o * OH + oy) * OW + ox] = acc;
            }
    }
    return y;
}

template <class T>
std::vector<T> pool_forward(const std::vector<T>& x, const Shape& in, const MaxPool2D& p, const Shape& out) {
    const std::size_t C = in[0], H = in[1], W = in[2], OH = out[1], OW = out[2];
    std::vector<T> y(C * OH * OW);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
                T m = std::numeric_limits<T>::lowest();
                for (std::size_t ky = 0; ky < p.window[0]; ++ky) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * p.stride[0] + ky) - static_cast<std::ptrdiff_t>(p.padding[0]);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t kx = 0; kx < p.window[1]; ++kx) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * p.stride[1] + kx) - static_cast<std::ptrdiff_t>(p.padding[1]);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                        m = std::max(m, x[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)]);
                    }
                }
                y[(c * OH + oy) * OW + ox] = m;
            }
    return y;
}

std::vector<double> bn_scale(const BatchNorm& bn) {
    std::vector<double> g(bn.gamma.numel());
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = bn.gamma.value(c) / std::sqrt(bn.variance.value(c) + bn.epsilon);
    return g;
}

std::vector<double> bn_shift(const BatchNorm& bn, const std::vector<double>& g) {
    std::vector<double> b(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) b[c] = bn.beta.value(c) - bn.mean.value(c) * g[c];
    return b;
}

Tensor eval_real(const NetworkModel& model, const Tensor& input, const ActivationObserver& observe) {
    const auto shapes = layer_shapes(model);
    std::vector<double> x = as_reals(input);
    if (observe) observe("input", max_abs(x));
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const Layer& layer = model.layers[li];
        const Shape& in = shapes[li];
        const Shape& out = shapes[li + 1];
        std::vector<double> y;
        std::visit(
            overloaded{
                [&](const FullyConnected& fc) {
                    const std::size_t R = fc.weights.dim(0), C = fc.weights.dim(1);
                    y.assign(R, 0.0);
                    for (std::size_t r = 0; r < R; ++r) {
                        double acc = fc.bias.value(r);
                        for (std::size_t c = 0; c < C; ++c) acc += fc.weights.value(r * C + c) * x[c];
                        y[r] = acc;
                    }
                },
                [&](const Conv2D& c) { y = conv_forward(x, in, c, as_reals(c.kernel), as_reals(c.bias), out); },
                [&](const MaxPool2D& p) { y = pool_forward(x, in, p, out); },
                [&](const BatchNorm& bn) {
                    const auto g = bn_scale(bn);
                    const auto b = bn_shift(bn, g);
                    const std::size_t per = shape_numel(in) / in[0];
                    y.resize(x.size());
                    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * g[i / per] + b[i / per];
                },
                [&](const MultiHeadAttention& m) {
                    const std::size_t S = in[0], D = m.d_model, K = m.d_k;
                    const auto wq = as_reals(m.w_q), wk = as_reals(m.w_k), wv = as_reals(m.w_v), wo = as_reals(m.w_o);
                    y.assign(S * D, 0.0);
                    double mq = 0, mk = 0, mv = 0, mh = 0;
                    const double inv = 1.0 / std::sqrt(static_cast<double>(K));
                    for (std::size_t h = 0; h < m.heads; ++h) {
                        std::vector<double> q(S * K), k(S * K), v(S * K), hd(S * K);
                        for (std::size_t t = 0; t < S; ++t)
                            for (std::size_t j = 0; j < K; ++j) {
                                double aq = 0, ak = 0, av = 0;
                                for (std::size_t d = 0; d < D; ++d) {
                                    const std::size_t w = (h * K + j) * D + d;
                                    aq += wq[w] * x[t * D + d];
                                    ak += wk[w] * x[t * D + d];
                                    av += wv[w] * x[t * D + d];
                                }
                                q[t * K + j] = aq;
                                k[t * K + j] = ak;
                                v[t * K + j] = av;
                            }
                        mq = std::max(mq, max_abs(q));
                        mk = std::max(mk, max_abs(k));
                        mv = std::max(mv, max_abs(v));
                        for (std::size_t t = 0; t < S; ++t) {
                            std::vector<double> s(S);
                            for (std::size_t u = 0; u < S; ++u) {
                                double a = 0;
                                for (std::size_t j = 0; j < K; ++j) a += q[t * K + j] * k[u * K + j];
                                s[u] = a * inv;
                            }
                            const double top = *std::max_element(s.begin(), s.end());
                            double sum = 0;
                            for (auto& e : s) sum += (e = std::exp(e - top));
                            for (std::size_t j = 0; j < K; ++j) {
                                double a = 0;
                                for (std::size_t u = 0; u < S; ++u) a += s[u] / sum * v[u * K + j];
                                hd[t * K + j] = a;
                            }
                        }
                        mh = std::max(mh, max_abs(hd));
                        for (std::size_t t = 0; t < S; ++t)
                            for (std::size_t d = 0; d < D; ++d) {
                                double a = 0;
                                for (std::size_t j = 0; j < K; ++j) a += wo[(h * D + d) * K + j] * hd[t * K + j];
                                y[t * D + d] += a;
                            }
                    }
                    if (observe) {
                        observe(layer.name + "/q", mq);
                        observe(layer.name + "/k", mk);
                        observe(layer.name + "/v", mv);
                        observe(layer.name + "/head", mh);
                    }
                },
                [&](const ReLU&) {
                    y = x;
                    for (auto& e : y) e = std::max(e, 0.0);
                }},
            layer.op);
        x = std::move(y);
        if (observe) observe(layer.name, max_abs(x));
    }
    return Tensor::real(shapes.back(), std::move(x));
}

Tensor eval_quant(const NetworkModel& model, const Tensor& input, const QuantSpec& quant) {
    const auto shapes = layer_shapes(model);
    const int ab = quant.activation_bits;
    const Tensor q_in = quantize_input(input, quant);
    std::vector<std::int64_t> x(q_in.ints().begin(), q_in.ints().end());
    double s = quant.input_scale;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const Layer& layer = model.layers[li];
        const Shape& in = shapes[li];
        const Shape& out = shapes[li + 1];
        std::vector<std::int64_t> y;
        std::visit(
            overloaded{
                [&](const FullyConnected& fc) {
                    const LayerQuant& lq = quant.layer(layer.name);
                    const double acc_scale = lq.weight_scale * s;
                    const auto w = weight_ints(fc.weights, lq);
                    const auto b = bias_ints(fc.bias, acc_scale);
                    const std::size_t R = fc.weights.dim(0), C = fc.weights.dim(1);
                    y.assign(R, 0);
                    for (std::size_t r = 0; r < R; ++r) {
                        std::int64_t acc = b[r];
                        for (std::size_t c = 0; c < C; ++c) acc += w[r * C + c] * x[c];
                        y[r] = requantize(acc, acc_scale, lq.output_scale, ab, false);
                    }
                    s = lq.output_scale;
                },
                [&](const Conv2D& c) {
                    const LayerQuant& lq = quant.layer(layer.name);
                    const double acc_scale = lq.weight_scale * s;
                    auto acc = conv_forward(x, in, c, weight_ints(c.kernel, lq), bias_ints(c.bias, acc_scale), out);
                    y.resize(acc.size());
                    for (std::size_t i = 0; i < acc.size(); ++i)
                        y[i] = requantize(acc[i], acc_scale, lq.output_scale, ab, false);
                    s = lq.output_scale;
                },
                [&](const MaxPool2D& p) { y = pool_forward(x, in, p, out); },
                [&](const BatchNorm& bn) {
                    const LayerQuant& lq = quant.layer(layer.name);
                    const double acc_scale = lq.weight_scale * s;
                    const auto g = bn_scale(bn);
                    const auto sh = bn_shift(bn, g);
                    const std::size_t per = shape_numel(in) / in[0];
                    y.resize(x.size());
                    for (std::size_t i = 0; i < x.size(); ++i) {
                        const std::size_t c = i / per;
                        const std::int64_t acc = lq.weight_int(g[c]) * x[i] + bias_int(sh[c], acc_scale);
                        y[i] = requantize(acc, acc_scale, lq.output_scale, ab, false);
                    }
                    s = lq.output_scale;
                },
                [&](const MultiHeadAttention& m) {
                    const LayerQuant& lq = quant.layer(layer.name);
                    const std::size_t S = in[0], D = m.d_model, K = m.d_k;
                    const auto wq = weight_ints(m.w_q, lq), wk = weight_ints(m.w_k, lq), wv = weight_ints(m.w_v, lq),
                               wo = weight_ints(m.w_o, lq);
                    const double proj_scale = lq.weight_scale * s;
                    const double score_scale = lq.q_scale * lq.k_scale / std::sqrt(static_cast<double>(K));
                    const double p_scale = softmax_prob_scale(ab);
                    std::vector<std::int64_t> acc_out(S * D, 0);
                    for (std::size_t h = 0; h < m.heads; ++h) {
                        std::vector<std::int64_t> q(S * K), k(S * K), v(S * K), hd(S * K);
                        for (std::size_t t = 0; t < S; ++t)
                            for (std::size_t j = 0; j < K; ++j) {
                                std::int64_t aq = 0, ak = 0, av = 0;
                                for (std::size_t d = 0; d < D; ++d) {
                                    const std::size_t w = (h * K + j) * D + d;
                                    aq += wq[w] * x[t * D + d];
                                    ak += wk[w] * x[t * D + d];
                                    av += wv[w] * x[t * D + d];
                                }
                                q[t * K + j] = requantize(aq, proj_scale, lq.q_scale, ab, false);
                                k[t * K + j] = requantize(ak, proj_scale, lq.k_scale, ab, false);
                                v[t * K + j] = requantize(av, proj_scale, lq.v_scale, ab, false);
                            }
                        for (std::size_t t = 0; t < S; ++t) {
                            std::vector<std::int64_t> sc(S);
                            for (std::size_t u = 0; u < S; ++u) {
                                std::int64_t a = 0;
                                for (std::size_t j = 0; j < K; ++j) a += q[t * K + j] * k[u * K + j];
                                sc[u] = a;
                            }
                            const auto p = softmax_codes(sc, score_scale, ab);
                            for (std::size_t j = 0; j < K; ++j) {
                                std::int64_t a = 0;
                                for (std::size_t u = 0; u < S; ++u) a += p[u] * v[u * K + j];
                                hd[t * K + j] = requantize(a, p_scale * lq.v_scale, lq.head_scale, ab, false);
                            }
                        }
                        for (std::size_t t = 0; t < S; ++t)
                            for (std::size_t d = 0; d < D; ++d) {
                                std::int64_t a = 0;
                                for (std::size_t j = 0; j < K; ++j) a += wo[(h * D + d) * K + j] * hd[t * K + j];
                                acc_out[t * D + d] += a;
                            }
                    }
                    y.resize(S * D);
                    for (std::size_t i = 0; i < y.size(); ++i)
                        y[i] = requantize(acc_out[i], lq.weight_scale * lq.head_scale, lq.output_scale, ab, false);
                    s = lq.output_scale;
                },
                [&](const ReLU&) {
                    y = x;
                    for (auto& e : y) e = std::max<std::int64_t>(e, 0);
                }},
            layer.op);
        x = std::move(y);
    }
    return Tensor::integer(shapes.back(), std::move(x), ab);
}

}  // namespace

Tensor quantize_input(const Tensor& input, const QuantSpec& quant) {
    const int ab = quant.activation_bits;
    if (input.is_int()) {
        for (auto v : input.ints())
            if (!fits_signed(v, ab)) throw InputError("integer input code " + std::to_string(v) + " does not fit int" + std::to_string(ab));
        std::vector<std::int64_t> v(input.ints().begin(), input.ints().end());
        return Tensor::integer(input.shape(), std::move(v), ab);
    }
    const auto q = quant.activation(quant.input_scale);
    std::vector<std::int64_t> v(input.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = quantize_value(input.reals()[i], q).code;
    return Tensor::integer(input.shape(), std::move(v), ab);
}

Tensor reference_eval(const NetworkModel& model, const Tensor& input, const QuantSpec* quant,
                      const ActivationObserver& observe) {
    if (!input.has_data()) throw InputError("reference_eval needs input values");
    if (shape_numel(input.shape()) != shape_numel(model.input_shape) ||
        (input.shape() != model.input_shape && input.rank() != 1))
        throw ShapeError("input shape " + shape_str(input.shape()) + " does not match model input " +
                         shape_str(model.input_shape));
    const Tensor in = input.reshaped(model.input_shape);
    if (!quant) return eval_real(model, in, observe);
    return eval_quant(model, in, *quant);
}

}  // namespace apu::ir
