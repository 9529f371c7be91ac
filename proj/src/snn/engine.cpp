#include "snnhdc/snn/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "snnhdc/errors.hpp"
#include "snnhdc/rng.hpp"

namespace snnhdc::snn {

double soft_spike(double membrane, double slope) {
    return 0.5 + std::atan(0.5 * std::numbers::pi * slope * (membrane - LIFParams::threshold)) /
                     std::numbers::pi;
}

double surrogate_grad(double membrane, double slope) {
    const double a = 0.5 * std::numbers::pi * slope * (membrane - LIFParams::threshold);
    return 0.5 * slope / (1.0 + a * a);
}

Gradients Gradients::zeros_like(const Network& net) {
    Gradients g;
    for (const auto& b : net.blocks()) {
        g.blocks.push_back({std::vector<double>(b.weights.size(), 0.0),
                            std::vector<double>(b.bias.size(), 0.0),
                            std::vector<double>(b.bn_gamma.size(), 0.0),
                            std::vector<double>(b.bn_beta.size(), 0.0)});
    }
    return g;
}

double Gradients::squared_norm() const {
    double s = 0.0;
    for (const auto& b : blocks) {
        for (const auto* v : {&b.weights, &b.bias, &b.bn_gamma, &b.bn_beta}) {
            for (double x : *v) s += x * x;
        }
    }
    return s;
}

void Gradients::scale(double factor) {
    for (auto& b : blocks) {
        for (auto* v : {&b.weights, &b.bias, &b.bn_gamma, &b.bn_beta}) {
            for (double& x : *v) x *= factor;
        }
    }
}

namespace {

/// z += W * x for one sample; zero inputs are skipped.
void accumulate_drive(const Block& blk, std::span<const double> x, std::span<double> z) {
    const std::size_t out_c = blk.out_channels();
    if (blk.kind == LayerKind::dense) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double v = x[j];
            if (v == 0.0) continue;
            const double* w = blk.weights.data() + j * out_c;
            for (std::size_t o = 0; o < out_c; ++o) z[o] += v * w[o];
        }
        return;
    }
    const auto& in = blk.in_shape;
    const auto& out = blk.lif_shape;
    const std::size_t k = blk.kernel;
    for (std::size_t y = 0; y < in.height; ++y) {
        for (std::size_t xx = 0; xx < in.width; ++xx) {
            for (std::size_t c = 0; c < in.channels; ++c) {
                const double v = x[(y * in.width + xx) * in.channels + c];
                if (v == 0.0) continue;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(y + blk.pad) - static_cast<std::ptrdiff_t>(ky);
                    if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(out.height)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(xx + blk.pad) - static_cast<std::ptrdiff_t>(kx);
                        if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(out.width)) continue;
                        const double* w = blk.weights.data() + blk.weight_index(c, ky, kx, 0);
                        double* dst = z.data() + (static_cast<std::size_t>(oy) * out.width + static_cast<std::size_t>(ox)) * out_c;
                        for (std::size_t o = 0; o < out_c; ++o) dst[o] += v * w[o];
                    }
                }
            }
        }
    }
}

/// dW += gz (x) x and, when grad_x is non-empty, grad_x = W^T gz.
void backprop_drive(const Block& blk, std::span<const double> x, std::span<const double> gz,
                    std::span<double> dw, std::span<double> grad_x) {
    const std::size_t out_c = blk.out_channels();
    if (blk.kind == LayerKind::dense) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double* w = blk.weights.data() + j * out_c;
            if (!grad_x.empty()) {
                double acc = 0.0;
                for (std::size_t o = 0; o < out_c; ++o) acc += w[o] * gz[o];
                grad_x[j] = acc;
            }
            const double v = x[j];
            if (v == 0.0) continue;
            double* d = dw.data() + j * out_c;
            for (std::size_t o = 0; o < out_c; ++o) d[o] += v * gz[o];
        }
        return;
    }
    const auto& in = blk.in_shape;
    const auto& out = blk.lif_shape;
    const std::size_t k = blk.kernel;
    for (std::size_t y = 0; y < in.height; ++y) {
        for (std::size_t xx = 0; xx < in.width; ++xx) {
            for (std::size_t c = 0; c < in.channels; ++c) {
                const std::size_t xi = (y * in.width + xx) * in.channels + c;
                const double v = x[xi];
                if (v == 0.0 && grad_x.empty()) continue;
                double acc = 0.0;
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(y + blk.pad) - static_cast<std::ptrdiff_t>(ky);
                    if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(out.height)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(xx + blk.pad) - static_cast<std::ptrdiff_t>(kx);
                        if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(out.width)) continue;
                        const std::size_t wi = blk.weight_index(c, ky, kx, 0);
                        const double* g = gz.data() + (static_cast<std::size_t>(oy) * out.width + static_cast<std::size_t>(ox)) * out_c;
                        if (!grad_x.empty()) {
                            const double* w = blk.weights.data() + wi;
                            for (std::size_t o = 0; o < out_c; ++o) acc += w[o] * g[o];
                        }
                        if (v != 0.0) {
                            double* d = dw.data() + wi;
                            for (std::size_t o = 0; o < out_c; ++o) d[o] += v * g[o];
                        }
                    }
                }
                if (!grad_x.empty()) grad_x[xi] = acc;
            }
        }
    }
}

void check_samples(const Network& net, std::span<const events::FrameSequence* const> samples) {
    if (samples.empty()) throw ShapeError("simulate needs at least one sample");
    const auto in = net.input_shape();
    const std::size_t steps = samples.front()->timesteps();
    for (const auto* s : samples) {
        if (s->channels() != in.channels || s->height() != in.height || s->width() != in.width) {
            throw ShapeError(fmt::format("input {}x{}x{} does not match network input {}x{}x{}",
                                         s->channels(), s->height(), s->width(), in.channels,
                                         in.height, in.width));
        }
        if (s->timesteps() != steps) throw ShapeError("batched samples must share T");
    }
}

Tape run(const Network& net, Network* mutable_net,
         std::span<const events::FrameSequence* const> samples, const EngineOptions& opt) {
    check_samples(net, samples);
    const bool train = opt.mode == Mode::train;
    const bool soft = opt.spikes == SpikeMode::soft;
    const double beta = net.lif().beta;
    const auto& blocks = net.blocks();
    const std::size_t B = samples.size();
    const std::size_t T = samples.front()->timesteps();
    const auto in_shape = net.input_shape();
    const std::size_t in_size = in_shape.size();

    Tape tape;
    tape.timesteps = T;
    tape.batch = B;
    tape.input.assign(T * B * in_size, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t b = 0; b < B; ++b) {
            const auto frame = samples[b]->frame(t);
            double* dst = tape.input.data() + (t * B + b) * in_size;
            // CHW counts -> HWC activations.
            for (std::size_t c = 0; c < in_shape.channels; ++c) {
                for (std::size_t p = 0; p < in_shape.height * in_shape.width; ++p) {
                    dst[p * in_shape.channels + c] = frame[c * in_shape.height * in_shape.width + p];
                }
            }
        }
    }

    tape.blocks.resize(blocks.size());
    std::vector<std::vector<double>> membrane(blocks.size());
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& blk = blocks[k];
        auto& bt = tape.blocks[k];
        const std::size_t pop = blk.lif_shape.size();
        const std::size_t out = blk.out_shape.size();
        bt.output.assign(T * B * out, 0.0);
        if (opt.record_tape) {
            bt.membrane.assign(T * B * pop, 0.0);
            if (blk.batchnorm) {
                bt.normalized.assign(T * B * pop, 0.0);
                bt.inv_std.assign(T * blk.out_channels(), 0.0);
            }
            if (blk.pool) bt.pool_arg.assign(T * B * out, 0);
        }
        bt.dropout_scale.assign(B * out, 1.0);
        if (train && blk.dropout > 0.0) {
            for (std::size_t b = 0; b < B; ++b) {
                Rng rng(derive_seed(opt.dropout_seed, b * blocks.size() + k));
                for (std::size_t i = 0; i < out; ++i) {
                    bt.dropout_scale[b * out + i] = rng.bernoulli(blk.dropout) ? 0.0 : 1.0 / (1.0 - blk.dropout);
                }
            }
        }
        membrane[k].assign(B * pop, 0.0);
    }

    std::vector<double> z, y_norm, spikes;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const auto& blk = blocks[k];
            auto& bt = tape.blocks[k];
            const std::size_t pop = blk.lif_shape.size();
            const std::size_t out = blk.out_shape.size();
            const std::size_t oc = blk.out_channels();
            const std::size_t width = k == 0 ? in_size : blocks[k - 1].out_shape.size();

            // Drive: spikes emitted upstream at t-1 arrive now.
            z.assign(B * pop, 0.0);
            for (std::size_t b = 0; b < B; ++b) {
                std::span<double> zb(z.data() + b * pop, pop);
                for (std::size_t i = 0; i < pop; ++i) zb[i] = blk.bias[i % oc];
                if (t == 0) continue;
                const double* src = k == 0 ? tape.input.data() + ((t - 1) * B + b) * in_size
                                           : tape.blocks[k - 1].output.data() + ((t - 1) * B + b) * width;
                accumulate_drive(blk, {src, width}, zb);
            }

            if (blk.batchnorm) {
                const std::size_t per_channel = B * (pop / oc);
                std::vector<double> mean(oc, 0.0), var(oc, 0.0);
                if (train) {
                    for (std::size_t i = 0; i < B * pop; ++i) mean[i % oc] += z[i];
                    for (auto& m : mean) m /= static_cast<double>(per_channel);
                    for (std::size_t i = 0; i < B * pop; ++i) {
                        const double d = z[i] - mean[i % oc];
                        var[i % oc] += d * d;
                    }
                    for (auto& v : var) v /= static_cast<double>(per_channel);
                    if (opt.update_running_stats && mutable_net != nullptr) {
                        auto& mb = mutable_net->blocks()[k];
                        const double m = Network::kBatchNormMomentum;
                        const double unbias = per_channel > 1
                                                  ? static_cast<double>(per_channel) / static_cast<double>(per_channel - 1)
                                                  : 1.0;
                        for (std::size_t c = 0; c < oc; ++c) {
                            mb.bn_mean[c] = (1.0 - m) * mb.bn_mean[c] + m * mean[c];
                            mb.bn_var[c] = (1.0 - m) * mb.bn_var[c] + m * var[c] * unbias;
                        }
                    }
                } else {
                    mean = blk.bn_mean;
                    var = blk.bn_var;
                }
                y_norm.resize(B * pop);
                for (std::size_t c = 0; c < oc; ++c) var[c] = 1.0 / std::sqrt(var[c] + Network::kBatchNormEps);
                for (std::size_t i = 0; i < B * pop; ++i) {
                    const std::size_t c = i % oc;
                    y_norm[i] = (z[i] - mean[c]) * var[c];
                    z[i] = blk.bn_gamma[c] * y_norm[i] + blk.bn_beta[c];
                }
                if (opt.record_tape) {
                    std::copy(y_norm.begin(), y_norm.end(), bt.normalized.begin() + static_cast<std::ptrdiff_t>(t * B * pop));
                    std::copy(var.begin(), var.end(), bt.inv_std.begin() + static_cast<std::ptrdiff_t>(t * oc));
                }
            }

            // LIF update with hard reset to zero.
            spikes.resize(B * pop);
            auto& mem = membrane[k];
            for (std::size_t i = 0; i < B * pop; ++i) {
                const double u = beta * mem[i] + z[i];
                if (!std::isfinite(u)) throw MathError("non-finite membrane drive");
                double s;
                if (soft) {
                    s = soft_spike(u, opt.surrogate_slope);
                    mem[i] = u * (1.0 - s);
                } else {
                    s = u >= LIFParams::threshold ? 1.0 : 0.0;
                    mem[i] = s != 0.0 ? LIFParams::reset_value : u;
                }
                spikes[i] = s;
                if (opt.record_tape) bt.membrane[t * B * pop + i] = u;
            }

            // Pool (max over the window) then dropout.
            for (std::size_t b = 0; b < B; ++b) {
                double* dst = bt.output.data() + (t * B + b) * out;
                const double* s = spikes.data() + b * pop;
                const double* scale = bt.dropout_scale.data() + b * out;
                if (!blk.pool) {
                    for (std::size_t i = 0; i < out; ++i) dst[i] = s[i] * scale[i];
                    continue;
                }
                const auto& ls = blk.lif_shape;
                const auto& os = blk.out_shape;
                for (std::size_t py = 0; py < os.height; ++py) {
                    for (std::size_t px = 0; px < os.width; ++px) {
                        for (std::size_t c = 0; c < oc; ++c) {
                            std::size_t best = ((py * blk.pool) * ls.width + px * blk.pool) * oc + c;
                            for (std::size_t dy = 0; dy < blk.pool; ++dy) {
                                for (std::size_t dx = 0; dx < blk.pool; ++dx) {
                                    const std::size_t idx = ((py * blk.pool + dy) * ls.width + px * blk.pool + dx) * oc + c;
                                    if (s[idx] > s[best]) best = idx;
                                }
                            }
                            const std::size_t o = (py * os.width + px) * oc + c;
                            dst[o] = s[best] * scale[o];
                            if (opt.record_tape) bt.pool_arg[(t * B + b) * out + o] = static_cast<std::uint32_t>(best);
                        }
                    }
                }
            }
        }
    }
    return tape;
}

}  // namespace

Tape simulate(const Network& net, std::span<const events::FrameSequence* const> samples,
              const EngineOptions& options) {
    return run(net, nullptr, samples, options);
}

Tape simulate(Network& net, std::span<const events::FrameSequence* const> samples,
              const EngineOptions& options) {
    return run(net, &net, samples, options);
}

Gradients backward(const Network& net, const Tape& tape, std::span<const double> output_grad,
                   const EngineOptions& opt) {
    const auto& blocks = net.blocks();
    const std::size_t L = blocks.size();
    const std::size_t B = tape.batch;
    const std::size_t T = tape.timesteps;
    const bool soft = opt.spikes == SpikeMode::soft;
    const double beta = net.lif().beta;
    const double k_slope = opt.surrogate_slope;
    const std::size_t in_size = net.input_shape().size();

    if (output_grad.size() != T * B * blocks.back().out_shape.size()) {
        throw ShapeError("output gradient shape does not match the tape");
    }
    if (tape.blocks.empty() || tape.blocks.front().membrane.empty()) {
        throw ShapeError("backward needs a tape recorded with record_tape = true");
    }

    Gradients grads = Gradients::zeros_like(net);
    // Gradient w.r.t. each block's output, double-buffered across time.
    std::vector<std::vector<double>> pending_now(L), pending_prev(L), carry(L);
    for (std::size_t k = 0; k < L; ++k) {
        pending_now[k].assign(B * blocks[k].out_shape.size(), 0.0);
        pending_prev[k].assign(B * blocks[k].out_shape.size(), 0.0);
        carry[k].assign(B * blocks[k].lif_shape.size(), 0.0);
    }

    std::vector<double> g_spike, g_drive, g_norm, grad_x;
    for (std::size_t t = T; t-- > 0;) {
        {
            const std::size_t out = blocks.back().out_shape.size();
            const double* g = output_grad.data() + t * B * out;
            auto& p = pending_now[L - 1];
            for (std::size_t i = 0; i < B * out; ++i) p[i] += g[i];
        }
        for (std::size_t k = L; k-- > 0;) {
            const auto& blk = blocks[k];
            const auto& bt = tape.blocks[k];
            auto& bg = grads.blocks[k];
            const std::size_t pop = blk.lif_shape.size();
            const std::size_t out = blk.out_shape.size();
            const std::size_t oc = blk.out_channels();

            // Through dropout and pooling back onto the LIF spikes.
            g_spike.assign(B * pop, 0.0);
            const auto& gout = pending_now[k];
            for (std::size_t b = 0; b < B; ++b) {
                for (std::size_t o = 0; o < out; ++o) {
                    const double g = gout[b * out + o] * bt.dropout_scale[b * out + o];
                    if (g == 0.0) continue;
                    const std::size_t src = blk.pool ? bt.pool_arg[(t * B + b) * out + o] : o;
                    g_spike[b * pop + src] += g;
                }
            }

            // LIF: U = beta*M_prev + y, S = f(U), M = U * (1 - S).
            g_drive.resize(B * pop);
            auto& c = carry[k];
            for (std::size_t i = 0; i < B * pop; ++i) {
                const double u = bt.membrane[t * B * pop + i];
                const double ds = surrogate_grad(u, k_slope);
                const double s = soft ? soft_spike(u, k_slope) : (u >= LIFParams::threshold ? 1.0 : 0.0);
                double dm_du = 1.0 - s;
                if (!opt.detach_reset) dm_du -= u * ds;
                const double gu = g_spike[i] * ds + c[i] * dm_du;
                g_drive[i] = gu;
                c[i] = beta * gu;
            }

            if (blk.batchnorm) {
                const std::size_t per_channel = B * (pop / oc);
                const double* xhat = bt.normalized.data() + t * B * pop;
                g_norm.assign(B * pop, 0.0);
                if (opt.mode == Mode::train) {
                    std::vector<double> sum_g(oc, 0.0), sum_gx(oc, 0.0);
                    for (std::size_t i = 0; i < B * pop; ++i) {
                        const std::size_t ch = i % oc;
                        bg.bn_beta[ch] += g_drive[i];
                        bg.bn_gamma[ch] += g_drive[i] * xhat[i];
                        const double gx = g_drive[i] * blk.bn_gamma[ch];
                        sum_g[ch] += gx;
                        sum_gx[ch] += gx * xhat[i];
                    }
                    const double n = static_cast<double>(per_channel);
                    for (std::size_t i = 0; i < B * pop; ++i) {
                        const std::size_t ch = i % oc;
                        const double gx = g_drive[i] * blk.bn_gamma[ch];
                        g_norm[i] = bt.inv_std[t * oc + ch] / n * (n * gx - sum_g[ch] - xhat[i] * sum_gx[ch]);
                    }
                } else {
                    for (std::size_t i = 0; i < B * pop; ++i) {
                        const std::size_t ch = i % oc;
                        bg.bn_beta[ch] += g_drive[i];
                        bg.bn_gamma[ch] += g_drive[i] * xhat[i];
                        g_norm[i] = g_drive[i] * blk.bn_gamma[ch] * bt.inv_std[t * oc + ch];
                    }
                }
                g_drive.swap(g_norm);
            }

            for (std::size_t i = 0; i < B * pop; ++i) bg.bias[i % oc] += g_drive[i];
            if (t == 0) continue;  // nothing arrived at t = 0

            const std::size_t width = k == 0 ? in_size : blocks[k - 1].out_shape.size();
            for (std::size_t b = 0; b < B; ++b) {
                const double* src = k == 0 ? tape.input.data() + ((t - 1) * B + b) * in_size
                                           : tape.blocks[k - 1].output.data() + ((t - 1) * B + b) * width;
                std::span<double> gx;
                if (k > 0) gx = {pending_prev[k - 1].data() + b * width, width};
                backprop_drive(blk, {src, width}, {g_drive.data() + b * pop, pop}, bg.weights, gx);
            }
        }
        for (std::size_t k = 0; k < L; ++k) {
            pending_now[k].swap(pending_prev[k]);
            std::fill(pending_prev[k].begin(), pending_prev[k].end(), 0.0);
        }
    }
    return grads;
}

}  // namespace snnhdc::snn
