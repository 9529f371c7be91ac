#include "snnhdc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <map>
#include <set>

#include <fmt/format.h>

#include "snnhdc/decoders.hpp"
#include "snnhdc/errors.hpp"
#include "snnhdc/rng.hpp"

namespace snnhdc::train {

namespace {

void require_output(std::span<const double> output, std::size_t timesteps, std::size_t neurons) {
    if (output.size() != timesteps * neurons) throw ShapeError("output train size does not match T x K");
    if (timesteps == 0) throw ShapeError("output train has no timesteps");
}

void require_class(std::size_t neurons, std::size_t true_class) {
    if (neurons < 2) throw ValidationError("loss needs at least two output neurons");
    if (true_class >= neurons) throw ValidationError("true class outside the output layer");
}

std::vector<double> spike_counts(std::span<const double> output, std::size_t timesteps, std::size_t neurons) {
    std::vector<double> counts(neurons, 0.0);
    for (std::size_t t = 0; t < timesteps; ++t) {
        for (std::size_t n = 0; n < neurons; ++n) counts[n] += output[t * neurons + n];
    }
    return counts;
}

double normalised_time(std::size_t t, std::size_t timesteps) {
    return timesteps > 1 ? static_cast<double>(t) / static_cast<double>(timesteps - 1) : 0.0;
}

}  // namespace

LossKind parse_loss_kind(std::string_view name) {
    if (name == "rate") return LossKind::rate;
    if (name == "latency") return LossKind::latency;
    if (name == "hdc") return LossKind::hdc;
    throw ConfigError(fmt::format("unknown decoder '{}'", name));
}

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::rate: return "rate";
        case LossKind::latency: return "latency";
        case LossKind::hdc: return "hdc";
    }
    return "?";
}

LossResult rate_loss(std::span<const double> output, std::size_t timesteps, std::size_t neurons,
                     std::size_t true_class, RateTarget target) {
    require_output(output, timesteps, neurons);
    require_class(neurons, true_class);
    const auto counts = spike_counts(output, timesteps, neurons);
    const double T = static_cast<double>(timesteps);
    const double K = static_cast<double>(neurons);
    LossResult r;
    r.grad.assign(output.size(), 0.0);
    std::vector<double> dcount(neurons);
    for (std::size_t n = 0; n < neurons; ++n) {
        const double goal = n == true_class ? target.correct_rate : target.incorrect_rate;
        const double diff = counts[n] / T - goal;
        r.value += diff * diff;
        dcount[n] = 2.0 * diff / (K * T);
    }
    r.value /= K;
    for (std::size_t t = 0; t < timesteps; ++t) {
        std::copy(dcount.begin(), dcount.end(), r.grad.begin() + static_cast<std::ptrdiff_t>(t * neurons));
    }
    return r;
}

std::vector<double> first_spike_times(std::span<const double> output, std::size_t timesteps,
                                      std::size_t neurons) {
    require_output(output, timesteps, neurons);
    std::vector<double> times(neurons, 1.0);
    for (std::size_t n = 0; n < neurons; ++n) {
        for (std::size_t t = 0; t < timesteps; ++t) {
            if (output[t * neurons + n] != 0.0) {
                times[n] = normalised_time(t, timesteps);
                break;
            }
        }
    }
    return times;
}

LossResult latency_loss(std::span<const double> output, std::size_t timesteps, std::size_t neurons,
                        std::size_t true_class) {
    require_output(output, timesteps, neurons);
    require_class(neurons, true_class);
    const double K = static_cast<double>(neurons);
    LossResult r;
    r.grad.assign(output.size(), 0.0);
    std::vector<double> survive(timesteps), tail(timesteps);
    for (std::size_t n = 0; n < neurons; ++n) {
        auto s = [&](std::size_t t) { return output[t * neurons + n]; };
        // survive[t] = prod_{u<t} (1 - S_u)
        double q = 1.0;
        double expected = 0.0;
        for (std::size_t t = 0; t < timesteps; ++t) {
            survive[t] = q;
            expected += normalised_time(t, timesteps) * s(t) * q;
            q *= 1.0 - s(t);
        }
        expected += q;
        // tail[t]: expected time given no spike up to and including t.
        tail[timesteps - 1] = 1.0;
        for (std::size_t t = timesteps - 1; t > 0; --t) {
            tail[t - 1] = normalised_time(t, timesteps) * s(t) + (1.0 - s(t)) * tail[t];
        }
        const double goal = n == true_class ? 0.0 : 1.0;
        const double diff = expected - goal;
        r.value += diff * diff / K;
        const double dl = 2.0 * diff / K;
        for (std::size_t t = 0; t < timesteps; ++t) {
            r.grad[t * neurons + n] = dl * survive[t] * (normalised_time(t, timesteps) - tail[t]);
        }
    }
    return r;
}

LossResult hdc_loss(std::span<const double> output, std::size_t timesteps, std::size_t neurons,
                    const hdc::BinaryHypervector& target) {
    require_output(output, timesteps, neurons);
    if (target.dims() != neurons) {
        throw ShapeError(fmt::format("output has {} neurons, target hypervector {} dims", neurons, target.dims()));
    }
    auto h = spike_counts(output, timesteps, neurons);
    const double D = static_cast<double>(neurons);
    LossResult r;
    r.grad.assign(output.size(), 0.0);
    std::vector<double> dh(neurons, 0.0);
    for (std::size_t n = 0; n < neurons; ++n) {
        const double c = target.get(n) ? 1.0 : 0.0;
        bool clamped = false;
        if (c == 1.0 && h[n] > 1.0) {
            h[n] = 1.0;
            clamped = true;
        }
        const double diff = h[n] - c;
        r.value += diff * diff;
        dh[n] = clamped ? 0.0 : 2.0 * diff / D;
    }
    r.value /= D;
    for (std::size_t t = 0; t < timesteps; ++t) {
        std::copy(dh.begin(), dh.end(), r.grad.begin() + static_cast<std::ptrdiff_t>(t * neurons));
    }
    return r;
}

LossResult Objective::loss(std::span<const double> output, std::size_t timesteps, std::size_t neurons,
                           std::size_t true_class) const {
    switch (kind) {
        case LossKind::rate: return rate_loss(output, timesteps, neurons, true_class);
        case LossKind::latency: return latency_loss(output, timesteps, neurons, true_class);
        case LossKind::hdc:
            if (!codebook) throw ConfigError("hdc objective needs a codebook");
            return hdc_loss(output, timesteps, neurons, (*codebook)[true_class]);
    }
    return {};
}

int Objective::predict(std::span<const double> output, std::size_t timesteps, std::size_t neurons) const {
    snn::SpikeTrain train(timesteps, neurons);
    for (std::size_t t = 0; t < timesteps; ++t) {
        for (std::size_t n = 0; n < neurons; ++n) train.at(t, n) = output[t * neurons + n] >= 0.5 ? 1 : 0;
    }
    switch (kind) {
        case LossKind::rate: return decoders::rate_decode(train).predicted_class;
        case LossKind::latency: return decoders::latency_decode(train).predicted_class;
        case LossKind::hdc:
            if (!codebook) throw ConfigError("hdc objective needs a codebook");
            return decoders::hdc_classify(decoders::hdc_accumulate(train).final, *codebook).predicted_class;
    }
    return decoders::kUnknown;
}

std::string TrainHistory::to_csv() const {
    std::string out = "epoch,train_loss,train_acc,test_acc,wall_time_s\n";
    for (const auto& e : epochs) {
        out += fmt::format("{},{:.8g},{:.6f},{},{:.3f}\n", e.epoch, e.train_loss, e.train_accuracy,
                           e.test_accuracy ? fmt::format("{:.6f}", *e.test_accuracy) : std::string{},
                           e.wall_seconds);
    }
    return out;
}

Adam::Adam(const snn::Network& net, const TrainConfig& cfg)
    : cfg_(cfg), m_(snn::Gradients::zeros_like(net)), v_(snn::Gradients::zeros_like(net)) {}

void Adam::step(snn::Network& net, const snn::Gradients& grads) {
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(steps_));
    auto update = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = cfg_.adam_beta1 * m[i] + (1.0 - cfg_.adam_beta1) * g[i];
            v[i] = cfg_.adam_beta2 * v[i] + (1.0 - cfg_.adam_beta2) * g[i] * g[i];
            param[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_eps);
        }
    };
    auto& blocks = net.blocks();
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& g = grads.blocks[k];
        update(blocks[k].weights, g.weights, m_.blocks[k].weights, v_.blocks[k].weights);
        update(blocks[k].bias, g.bias, m_.blocks[k].bias, v_.blocks[k].bias);
        update(blocks[k].bn_gamma, g.bn_gamma, m_.blocks[k].bn_gamma, v_.blocks[k].bn_gamma);
        update(blocks[k].bn_beta, g.bn_beta, m_.blocks[k].bn_beta, v_.blocks[k].bn_beta);
    }
}

namespace {

std::vector<double> sample_output(const snn::Tape& tape, std::size_t block, std::size_t b, std::size_t width) {
    std::vector<double> out(tape.timesteps * width);
    for (std::size_t t = 0; t < tape.timesteps; ++t) {
        const auto row = tape.output(block, t, b, width);
        std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(t * width));
    }
    return out;
}

}  // namespace

double evaluate_accuracy(const snn::Network& net, std::span<const LabeledSample> data,
                         const Objective& objective, std::size_t batch_size) {
    if (data.empty()) return 0.0;
    snn::EngineOptions opt;
    opt.mode = snn::Mode::eval;
    opt.record_tape = false;
    const std::size_t last = net.blocks().size() - 1;
    const std::size_t K = net.output_shape().size();
    std::size_t correct = 0;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t end = std::min(data.size(), start + batch_size);
        std::vector<const events::FrameSequence*> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(&data[i].frames);
        const auto tape = snn::simulate(net, batch, opt);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const auto out = sample_output(tape, last, b, K);
            const int pred = objective.predict(out, tape.timesteps, K);
            if (pred >= 0 && static_cast<std::size_t>(pred) == data[start + b].label) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainHistory bptt_train(snn::Network& net, std::span<const LabeledSample> data, const TrainConfig& cfg,
                        const Objective& objective, std::span<const LabeledSample> test) {
    if (data.empty()) throw ValidationError("training data is empty");
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (!(cfg.surrogate_slope > 0.0)) throw ConfigError("surrogate slope must be positive");
    const std::size_t K = net.output_shape().size();
    if (objective.kind == LossKind::hdc && (!objective.codebook || objective.codebook->dims() != K)) {
        throw ShapeError("hdc codebook dims must equal the output layer width");
    }

    Adam adam(net, cfg);
    TrainHistory history;
    const std::size_t last = net.blocks().size() - 1;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto started = std::chrono::steady_clock::now();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle(derive_seed(cfg.seed, 1'000'000 + epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const events::FrameSequence*> batch;
            for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]].frames);
            const std::size_t B = batch.size();

            snn::EngineOptions opt;
            opt.mode = snn::Mode::train;
            opt.spikes = cfg.gradient_mode;
            opt.surrogate_slope = cfg.surrogate_slope;
            opt.detach_reset = cfg.detach_reset;
            opt.dropout_seed = derive_seed(cfg.seed, epoch * 100'000 + batch_index);
            opt.update_running_stats = true;
            snn::Tape tape;
            try {
                tape = snn::simulate(net, batch, opt);
            } catch (const MathError& e) {
                throw TrainingError(fmt::format("{} in epoch {}", e.what(), epoch), static_cast<int>(epoch));
            }

            const std::size_t T = tape.timesteps;
            std::vector<double> out_grad(T * B * K, 0.0);
            for (std::size_t b = 0; b < B; ++b) {
                const auto& sample = data[order[start + b]];
                const auto out = sample_output(tape, last, b, K);
                const auto res = objective.loss(out, T, K, sample.label);
                if (!std::isfinite(res.value)) {
                    throw TrainingError(fmt::format("non-finite loss in epoch {}", epoch), static_cast<int>(epoch));
                }
                loss_sum += res.value;
                const int pred = objective.predict(out, T, K);
                if (pred >= 0 && static_cast<std::size_t>(pred) == sample.label) ++correct;
                for (std::size_t t = 0; t < T; ++t) {
                    for (std::size_t n = 0; n < K; ++n) {
                        out_grad[(t * B + b) * K + n] = res.grad[t * K + n] / static_cast<double>(B);
                    }
                }
            }
            auto grads = snn::backward(net, tape, out_grad, opt);
            const double norm = std::sqrt(grads.squared_norm());
            if (!std::isfinite(norm)) {
                throw TrainingError(fmt::format("non-finite gradient in epoch {}", epoch), static_cast<int>(epoch));
            }
            if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) grads.scale(cfg.grad_clip / norm);
            adam.step(net, grads);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(data.size());
        rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
        if (!test.empty()) rec.test_accuracy = evaluate_accuracy(net, test, objective, cfg.batch_size);
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        history.epochs.push_back(rec);
    }
    return history;
}

GradCheckResult soft_gradient_check(const snn::Network& net, const Objective& objective,
                                    const LabeledSample& sample, double step, double surrogate_slope) {
    snn::EngineOptions opt;
    opt.mode = snn::Mode::train;
    opt.spikes = snn::SpikeMode::soft;
    opt.surrogate_slope = surrogate_slope;
    const std::size_t K = net.output_shape().size();
    const std::size_t last = net.blocks().size() - 1;
    const events::FrameSequence* batch[] = {&sample.frames};

    auto loss_of = [&](const snn::Network& n) {
        const auto tape = snn::simulate(n, batch, opt);
        return objective.loss(sample_output(tape, last, 0, K), tape.timesteps, K, sample.label);
    };

    const auto tape = snn::simulate(net, batch, opt);
    const auto base = objective.loss(sample_output(tape, last, 0, K), tape.timesteps, K, sample.label);
    const auto grads = snn::backward(net, tape, base.grad, opt);

    GradCheckResult result;
    snn::Network probe = net;
    for (std::size_t k = 0; k < net.blocks().size(); ++k) {
        auto& blk = probe.blocks()[k];
        const auto& g = grads.blocks[k];
        const std::pair<std::vector<double>*, const std::vector<double>*> params[] = {
            {&blk.weights, &g.weights}, {&blk.bias, &g.bias}, {&blk.bn_gamma, &g.bn_gamma}, {&blk.bn_beta, &g.bn_beta}};
        for (auto [values, analytic] : params) {
            for (std::size_t i = 0; i < values->size(); ++i) {
                const double saved = (*values)[i];
                (*values)[i] = saved + step;
                const double up = loss_of(probe).value;
                (*values)[i] = saved - step;
                const double down = loss_of(probe).value;
                (*values)[i] = saved;
                const double numeric = (up - down) / (2.0 * step);
                const double a = (*analytic)[i];
                const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
                result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
                result.analytic.push_back(a);
                result.numeric.push_back(numeric);
            }
        }
    }
    return result;
}

std::vector<Fold> kfold_split(std::span<const std::string> signers, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ValidationError("kfold_split needs K >= 2");
    std::set<std::string> unique_set;
    for (const auto& s : signers) {
        if (s.empty()) throw ValidationError("every sample needs a signer id");
        unique_set.insert(s);
    }
    std::vector<std::string> unique(unique_set.begin(), unique_set.end());
    if (unique.size() < folds) {
        throw ValidationError(fmt::format("{} signers cannot fill {} folds", unique.size(), folds));
    }
    Rng rng(seed);
    for (std::size_t i = unique.size(); i > 1; --i) std::swap(unique[i - 1], unique[rng.below(i)]);

    std::map<std::string, std::size_t> group;
    for (std::size_t i = 0; i < unique.size(); ++i) group[unique[i]] = i % folds;

    std::vector<Fold> out(folds);
    for (std::size_t i = 0; i < signers.size(); ++i) {
        const std::size_t g = group.at(signers[i]);
        for (std::size_t f = 0; f < folds; ++f) (f == g ? out[f].test : out[f].train).push_back(i);
    }
    return out;
}

}  // namespace snnhdc::train
