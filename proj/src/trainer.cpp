// Copyright (C) 2026 The apu authors
// SPDX-License-Identifier: Apache-2.0

#include "apu/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "apu/error.hpp"
#include "apu/rng.hpp"

namespace apu::prune {

Dataset make_spiral(std::size_t per_class, std::uint64_t seed, double noise, double turns) {
    Rng rng(seed);
    Dataset d;
    d.num_classes = 2;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(per_class);
            const double r = 0.15 + 0.85 * t;
            const double th = 2.0 * std::numbers::pi * turns * t + static_cast<double>(c) * std::numbers::pi;
            d.inputs.push_back({r * std::cos(th) + noise * rng.normal(), r * std::sin(th) + noise * rng.normal()});
            d.labels.push_back(c);
        }
    return d;
}

Dataset make_linear_separable(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double nx = std::cos(angle), ny = std::sin(angle);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 2;
        const double side = c ? 1.0 : -1.0;
        const double along = rng.uniform(-1.0, 1.0);
        const double off = side * (0.3 + 0.5 * rng.uniform());
        d.inputs.push_back({off * nx - along * ny, off * ny + along * nx});
        d.labels.push_back(c);
    }
    return d;
}

ir::NetworkModel make_mlp(const std::string& name, const std::vector<std::size_t>& sizes, std::uint64_t seed) {
    if (sizes.size() < 2) throw InputError("an MLP needs at least input and output sizes");
    Rng rng(seed);
    ir::NetworkModel m;
    m.name = name;
    m.input_shape = {sizes[0]};
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const std::size_t in = sizes[i], out = sizes[i + 1];
        const double lim = std::sqrt(6.0 / static_cast<double>(in));
        std::vector<double> w(out * in);
        for (auto& x : w) x = rng.uniform(-lim, lim);
        m.layers.push_back({"fc" + std::to_string(i + 1), ir::FullyConnected{Tensor::real({out, in}, std::move(w)),
                                                                              Tensor::real_zeros({out})}});
        if (i + 2 < sizes.size()) m.layers.push_back({"relu" + std::to_string(i + 1), ir::ReLU{}});
    }
    return m;
}

namespace {

struct Dense {
    std::string name;
    std::size_t in = 0, out = 0;
    std::vector<double> w, b;
    std::vector<double> vw, vb;  // momentum
    std::vector<std::uint8_t> mask;  // empty = dense
    std::vector<double> wq;          // forward weights (quantized copy or == w)
    Quantizer q;
    bool relu_after = false;
};

void project_mask(Dense& d) {
    if (d.mask.empty()) return;
    for (std::size_t i = 0; i < d.w.size(); ++i)
        if (!d.mask[i]) {
            d.w[i] = 0.0;
            d.vw[i] = 0.0;
        }
}

void refresh_forward(Dense& d, const QuantSpec* quant, std::uint64_t seed, bool refit) {
    if (!quant) {
        d.wq = d.w;
        return;
    }
    if (quant->scheme == QuantScheme::UniformSymmetric) {
        double peak = 0.0;
        for (double x : d.w) peak = std::max(peak, std::abs(x));
        const double qmax = static_cast<double>((std::int64_t{1} << (quant->weight_bits - 1)) - 1);
        d.q = Quantizer::uniform(quant->weight_bits, peak > 0.0 ? peak / qmax : 1.0);
    } else if (refit || d.q.codebook.empty()) {
        d.q = Quantizer::from_codebook(fit_layer_codebook(d.w, quant->weight_bits, seed));
    }
    d.wq.resize(d.w.size());
    for (std::size_t i = 0; i < d.w.size(); ++i) d.wq[i] = quantize_value(d.w[i], d.q).value;
}

}  // namespace

TrainResult train_structured(const ir::NetworkModel& model, const Dataset& data,
                             const std::map<std::string, BlockMask>& masks, const QuantSpec* quant,
                             const TrainOptions& opts, const StepObserver& observer) {
    if (data.size() == 0) throw InputError("training set is empty");
    if (opts.batch_size == 0) throw InputError("batch size must be positive");
    ir::validate(model);
    if (quant) quant->validate();

    std::vector<Dense> layers;
    for (const auto& l : model.layers) {
        if (const auto* fc = std::get_if<ir::FullyConnected>(&l.op)) {
            Dense d;
            d.name = l.name;
            d.out = fc->weights.dim(0);
            d.in = fc->weights.dim(1);
            d.w.resize(d.out * d.in);
            d.b.resize(d.out);
            for (std::size_t i = 0; i < d.w.size(); ++i) d.w[i] = fc->weights.value(i);
            for (std::size_t i = 0; i < d.out; ++i) d.b[i] = fc->bias.value(i);
            d.vw.assign(d.w.size(), 0.0);
            d.vb.assign(d.out, 0.0);
            if (auto it = masks.find(l.name); it != masks.end()) {
                if (it->second.rows() != d.out || it->second.cols() != d.in)
                    throw ShapeError("mask for layer '" + l.name + "' does not match its weights");
                d.mask = it->second.dense_bits();
            }
            layers.push_back(std::move(d));
        } else if (std::holds_alternative<ir::ReLU>(l.op)) {
            if (layers.empty()) throw InputError("trainer: ReLU before the first FullyConnected layer");
            layers.back().relu_after = true;
        } else {
            throw InputError("trainer supports FullyConnected/ReLU models only; layer '" + l.name + "' is " + l.type_name());
        }
    }
    for (const auto& [name, m] : masks)
        if (std::none_of(layers.begin(), layers.end(), [&](const Dense& d) { return d.name == name; }))
            throw InputError("mask given for unknown layer '" + name + "'");
    if (layers.back().out != data.num_classes)
        throw ShapeError("model has " + std::to_string(layers.back().out) + " outputs for " +
                         std::to_string(data.num_classes) + " classes");
    for (const auto& x : data.inputs)
        if (x.size() != layers.front().in) throw ShapeError("sample width does not match model input");

    for (std::size_t i = 0; i < layers.size(); ++i) {
        project_mask(layers[i]);
        refresh_forward(layers[i], quant, derive_seed(opts.seed, "codebook/" + layers[i].name), true);
    }

    Rng rng(derive_seed(opts.seed, "shuffle"));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t L = layers.size();
    std::vector<std::vector<double>> act(L + 1), pre(L), grad(L + 1);
    std::vector<std::vector<double>> gw(L), gb(L);
    std::vector<const std::vector<double>*> view;
    for (auto& d : layers) view.push_back(&d.w);

    TrainResult result;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
            const std::size_t end = std::min(order.size(), start + opts.batch_size);
            for (std::size_t l = 0; l < L; ++l) {
                gw[l].assign(layers[l].w.size(), 0.0);
                gb[l].assign(layers[l].out, 0.0);
            }
            double batch_loss = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const std::size_t idx = order[s];
                act[0] = data.inputs[idx];
                for (std::size_t l = 0; l < L; ++l) {
                    const Dense& d = layers[l];
                    pre[l].assign(d.out, 0.0);
                    for (std::size_t r = 0; r < d.out; ++r) {
                        double a = d.b[r];
                        const double* row = &d.wq[r * d.in];
                        for (std::size_t c = 0; c < d.in; ++c) a += row[c] * act[l][c];
                        pre[l][r] = a;
                    }
                    act[l + 1] = pre[l];
                    if (d.relu_after)
                        for (auto& v : act[l + 1]) v = std::max(v, 0.0);
                }
                // Softmax cross-entropy.
                auto& logits = act[L];
                const double top = *std::max_element(logits.begin(), logits.end());
                double sum = 0.0;
                std::vector<double> p(logits.size());
                for (std::size_t k = 0; k < p.size(); ++k) sum += (p[k] = std::exp(logits[k] - top));
                for (auto& v : p) v /= sum;
                const std::size_t y = data.labels[idx];
                batch_loss += -std::log(std::max(p[y], 1e-300));
                grad[L] = p;
                grad[L][y] -= 1.0;
                for (std::size_t l = L; l-- > 0;) {
                    const Dense& d = layers[l];
                    std::vector<double> g = grad[l + 1];
                    if (d.relu_after)
                        for (std::size_t r = 0; r < d.out; ++r)
                            if (pre[l][r] <= 0.0) g[r] = 0.0;
                    grad[l].assign(d.in, 0.0);
                    for (std::size_t r = 0; r < d.out; ++r) {
                        if (g[r] == 0.0) continue;
                        gb[l][r] += g[r];
                        double* gr = &gw[l][r * d.in];
                        const double* row = &d.wq[r * d.in];
                        for (std::size_t c = 0; c < d.in; ++c) {
                            gr[c] += g[r] * act[l][c];
                            grad[l][c] += g[r] * row[c];
                        }
                    }
                }
            }
            const double n = static_cast<double>(end - start);
            if (!std::isfinite(batch_loss))
                throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(step));
            epoch_loss += batch_loss;
            for (std::size_t l = 0; l < L; ++l) {
                Dense& d = layers[l];
                for (std::size_t i = 0; i < d.w.size(); ++i) {
                    d.vw[i] = opts.momentum * d.vw[i] - opts.learning_rate * gw[l][i] / n;
                    d.w[i] += d.vw[i];
                }
                for (std::size_t r = 0; r < d.out; ++r) {
                    d.vb[r] = opts.momentum * d.vb[r] - opts.learning_rate * gb[l][r] / n;
                    d.b[r] += d.vb[r];
                }
                project_mask(d);
                refresh_forward(d, quant, derive_seed(opts.seed, "codebook/" + d.name), false);
            }
            for (const auto& d : layers)
                for (double v : d.w)
                    if (!std::isfinite(v))
                        throw TrainingDiverged("weights became non-finite at epoch " + std::to_string(epoch));
            if (observer) observer(step, view);
            ++step;
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
        if (quant && quant->scheme == QuantScheme::NonuniformCodebook)
            for (auto& d : layers) refresh_forward(d, quant, derive_seed(opts.seed, "codebook/" + d.name), true);
    }

    result.model = model;
    std::size_t li = 0;
    for (auto& l : result.model.layers) {
        if (auto* fc = std::get_if<ir::FullyConnected>(&l.op)) {
            Dense& d = layers[li++];
            fc->weights = Tensor::real({d.out, d.in}, quant ? d.wq : d.w);
            fc->bias = Tensor::real({d.out}, d.b);
        }
    }
    return result;
}

double accuracy(const ir::NetworkModel& model, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor out = ir::reference_eval(model, Tensor::real({data.inputs[i].size()}, data.inputs[i]));
        const auto v = out.reals();
        const auto arg = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
        if (arg == data.labels[i]) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(data.size());
}

}  // namespace apu::prune
