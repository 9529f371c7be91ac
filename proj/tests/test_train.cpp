#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "snnhdc/errors.hpp"
#include "snnhdc/rng.hpp"
#include "snnhdc/train.hpp"

using namespace snnhdc;
using namespace snnhdc::train;

namespace {

events::FrameSequence random_frames(std::uint64_t seed, std::size_t t, std::size_t h, std::size_t w,
                                    double density) {
    Rng rng(seed);
    events::FrameSequence f(t, h, w, events::Duration{1000});
    for (std::size_t s = 0; s < t; ++s)
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    if (rng.bernoulli(density)) f.at(s, c, y, x) = 1 + static_cast<std::uint32_t>(rng.below(2));
    return f;
}

std::vector<double> random_binary(Rng& rng, std::size_t n, double p) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.bernoulli(p) ? 1.0 : 0.0;
    return v;
}

// Mean squared error of hard first-spike times against 0/1 targets.
double first_spike_oracle(const std::vector<double>& out, std::size_t T, std::size_t K, std::size_t cls) {
    double sum = 0.0;
    for (std::size_t n = 0; n < K; ++n) {
        double l = 1.0;
        for (std::size_t t = 0; t < T; ++t) {
            if (out[t * K + n] > 0.5) {
                l = static_cast<double>(t) / static_cast<double>(T - 1);
                break;
            }
        }
        const double target = n == cls ? 0.0 : 1.0;
        sum += (l - target) * (l - target);
    }
    return sum / static_cast<double>(K);
}

template <class F>
void check_loss_gradient(F loss, std::vector<double> out) {
    const auto base = loss(out);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double saved = out[i];
        out[i] = saved + 1e-6;
        const double up = loss(out).value;
        out[i] = saved - 1e-6;
        const double down = loss(out).value;
        out[i] = saved;
        CHECK(base.grad[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-5).scale(1e-3));
    }
}

}  // namespace

TEST_CASE("loss kind names") {
    CHECK(parse_loss_kind("rate") == LossKind::rate);
    CHECK(parse_loss_kind("latency") == LossKind::latency);
    CHECK(parse_loss_kind("hdc") == LossKind::hdc);
    CHECK(to_string(LossKind::hdc) == "hdc");
    CHECK_THROWS_AS(parse_loss_kind("population"), ConfigError);
}

TEST_CASE("hdc loss hand-evaluated values") {
    const auto c = hdc::BinaryHypervector::from_bits(std::vector<int>{1, 0, 1});
    // One timestep carrying the whole count per neuron.
    const std::vector<double> a{2, 0, 3};
    CHECK(hdc_loss(a, 1, 3, c).value == 0.0);
    const std::vector<double> b{0, 2, 1};
    CHECK(hdc_loss(b, 1, 3, c).value == doctest::Approx(5.0 / 3.0));
    // Counts spread over several timesteps give the same result.
    const std::vector<double> spread{1, 0, 1, 1, 0, 1, 0, 0, 1};
    CHECK(hdc_loss(spread, 3, 3, c).value == 0.0);

    const auto target = hdc::generate(64, 3);
    const std::vector<double> silent(10 * 64, 0.0);
    CHECK(hdc_loss(silent, 10, 64, target).value ==
          doctest::Approx(static_cast<double>(target.popcount()) / 64.0));
    CHECK_THROWS_AS(hdc_loss(silent, 10, 64, hdc::generate(65, 3)), ShapeError);
}

TEST_CASE("silent-output rate and latency losses for eleven classes") {
    const std::vector<double> silent(40 * 11, 0.0);
    CHECK(rate_loss(silent, 40, 11, 3).value == doctest::Approx((0.64 + 10 * 0.04) / 11.0).epsilon(1e-15));
    CHECK(latency_loss(silent, 40, 11, 3).value == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
}

TEST_CASE("losses vanish at their perfect outputs") {
    const std::size_t T = 10, K = 4;
    std::vector<double> rate(T * K, 0.0);
    for (std::size_t t = 0; t < 8; ++t) rate[t * K + 1] = 1.0;
    for (std::size_t n : {0u, 2u, 3u})
        for (std::size_t t = 0; t < 2; ++t) rate[(5 + t) * K + n] = 1.0;
    CHECK(rate_loss(rate, T, K, 1).value == doctest::Approx(0.0).scale(1.0));

    std::vector<double> lat(T * K, 0.0);
    lat[0 * K + 2] = 1.0;
    CHECK(latency_loss(lat, T, K, 2).value == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("rate loss depends only on counts") {
    Rng rng(3);
    const std::size_t T = 12, K = 5;
    for (int i = 0; i < 50; ++i) {
        auto out = random_binary(rng, T * K, 0.4);
        auto reversed = out;
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t n = 0; n < K; ++n) reversed[t * K + n] = out[(T - 1 - t) * K + n];
        CHECK(rate_loss(out, T, K, 2).value == doctest::Approx(rate_loss(reversed, T, K, 2).value));
    }
}

TEST_CASE("latency loss equals hard first-spike times on binary trains") {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const std::size_t T = 2 + rng.below(20), K = 2 + rng.below(8);
        const auto out = random_binary(rng, T * K, rng.uniform(0.0, 0.3));
        const std::size_t cls = rng.below(K);
        CHECK(latency_loss(out, T, K, cls).value == doctest::Approx(first_spike_oracle(out, T, K, cls)));
        const auto times = first_spike_times(out, T, K);
        for (double t : times) CHECK((t >= 0.0 && t <= 1.0));
    }
}

TEST_CASE("delaying the true neuron's first spike raises the latency loss") {
    const std::size_t T = 10, K = 3;
    double prev = -1.0;
    for (std::size_t first = 0; first < T; ++first) {
        std::vector<double> out(T * K, 0.0);
        out[first * K + 0] = 1.0;
        const double loss = latency_loss(out, T, K, 0).value;
        CHECK(loss > prev);
        prev = loss;
    }
}

TEST_CASE("rate and latency losses are equivariant in the other neurons") {
    Rng rng(17);
    const std::size_t T = 15, K = 4;
    for (int i = 0; i < 50; ++i) {
        const auto out = random_binary(rng, T * K, 0.2);
        auto swapped = out;
        for (std::size_t t = 0; t < T; ++t) std::swap(swapped[t * K + 1], swapped[t * K + 3]);
        CHECK(rate_loss(out, T, K, 0).value == doctest::Approx(rate_loss(swapped, T, K, 0).value));
        CHECK(latency_loss(out, T, K, 0).value == doctest::Approx(latency_loss(swapped, T, K, 0).value));
    }
}

TEST_CASE("hdc loss clamp and penalty properties") {
    Rng rng(23);
    const auto target = hdc::generate(32, 4);
    const std::size_t T = 6;
    for (int i = 0; i < 50; ++i) {
        auto out = random_binary(rng, T * 32, 0.2);
        const double base = hdc_loss(out, T, 32, target).value;
        CHECK(base >= 0.0);
        const std::size_t bit = rng.below(32);
        // Make sure the neuron has fired at least once before adding more.
        auto more = out;
        bool fired = false;
        for (std::size_t t = 0; t < T; ++t) fired |= more[t * 32 + bit] > 0.5;
        if (!fired) continue;
        for (std::size_t t = 0; t < T; ++t) more[t * 32 + bit] = 1.0;
        const double after = hdc_loss(more, T, 32, target).value;
        if (target.get(bit)) {
            CHECK(after == doctest::Approx(base));
        } else if (more != out) {
            CHECK(after > base);
        }
    }
}

TEST_CASE("loss gradients match finite differences of the loss") {
    Rng rng(5);
    const std::size_t T = 7, K = 5;
    std::vector<double> soft(T * K);
    for (auto& v : soft) v = rng.uniform(0.05, 0.45);
    check_loss_gradient([&](const std::vector<double>& o) { return rate_loss(o, T, K, 2); }, soft);
    check_loss_gradient([&](const std::vector<double>& o) { return latency_loss(o, T, K, 2); }, soft);
    const auto target = hdc::BinaryHypervector::from_bits(std::vector<int>{1, 0, 1, 1, 0});
    // Keep sums on target-on dims away from the clamp at 1 on both sides.
    auto low = soft;
    for (auto& v : low) v *= 0.2;
    check_loss_gradient([&](const std::vector<double>& o) { return hdc_loss(o, T, K, target); }, low);
    auto high = soft;
    for (auto& v : high) v += 0.3;
    check_loss_gradient([&](const std::vector<double>& o) { return hdc_loss(o, T, K, target); }, high);
}

TEST_CASE("clamped hdc entries pass no gradient") {
    const auto c = hdc::BinaryHypervector::from_bits(std::vector<int>{1, 0});
    const std::vector<double> out{1, 1, 1, 0};
    const auto res = hdc_loss(out, 2, 2, c);
    CHECK(res.grad[0] == 0.0);
    CHECK(res.grad[2] == 0.0);
    CHECK(res.grad[1] > 0.0);
}

TEST_CASE("objective decoding") {
    const std::size_t T = 5, K = 3;
    std::vector<double> out(T * K, 0.0);
    out[1 * K + 2] = 1.0;
    out[3 * K + 0] = 1.0;
    out[4 * K + 0] = 1.0;
    CHECK(Objective{LossKind::rate, std::nullopt}.predict(out, T, K) == 0);
    CHECK(Objective{LossKind::latency, std::nullopt}.predict(out, T, K) == 2);
    const std::vector<double> silent(T * K, 0.0);
    CHECK(Objective{LossKind::latency, std::nullopt}.predict(silent, T, K) == -1);
}

namespace {

struct Toy {
    const char* arch;
    snn::Shape input;
};

GradCheckResult check_toy(const Toy& toy, LossKind kind, std::uint64_t seed, double step = 1e-5) {
    const snn::Network net(toy.arch, toy.input, snn::Padding::valid, {0.8}, seed);
    const std::size_t K = net.output_shape().size();
    Objective obj{kind, std::nullopt};
    if (kind == LossKind::hdc) obj.codebook = hdc::ClassCodebook(3, K, seed + 1);
    const LabeledSample sample{random_frames(seed, 12, toy.input.height, toy.input.width, 0.3), seed % 3, "s"};
    return soft_gradient_check(net, obj, sample, step);
}

}  // namespace

TEST_CASE("soft-mode gradients match finite differences") {
    const Toy toys[] = {{"3-4", {2, 2, 2}}, {"2c3-bn-2p-6", {2, 4, 4}}, {"2c3-2p-0.3d-5-6", {2, 4, 4}}};
    for (const auto& toy : toys) {
        for (auto kind : {LossKind::rate, LossKind::latency, LossKind::hdc}) {
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                const auto r = check_toy(toy, kind, seed);
                INFO(std::string(toy.arch), " ", to_string(kind), " seed ", seed);
                CHECK(r.analytic.size() < 500);
                CHECK(r.max_relative_error <= 1e-4);
            }
        }
    }
}

TEST_CASE("zero input gives exactly zero first-layer weight gradients") {
    const snn::Network net("3-4", {2, 2, 2}, snn::Padding::valid, {0.9}, 1);
    const LabeledSample sample{events::FrameSequence(10, 2, 2, events::Duration{1000}), 1, "s"};
    const auto r = soft_gradient_check(net, Objective{LossKind::rate, std::nullopt}, sample);
    const std::size_t first_weights = net.blocks()[0].weights.size();
    for (std::size_t i = 0; i < first_weights; ++i) {
        CHECK(r.analytic[i] == 0.0);
        CHECK(r.numeric[i] == 0.0);
    }
}

TEST_CASE("finite-difference error grows with the step") {
    const Toy toy{"2c3-2p-5", {2, 4, 4}};
    double prev = 0.0;
    for (double step : {1e-5, 1e-4, 1e-3, 1e-2}) {
        const double err = check_toy(toy, LossKind::rate, 4, step).max_relative_error;
        CHECK(err > prev);
        prev = err;
    }
    CHECK(prev < 0.1);
}

TEST_CASE("adam first step moves each parameter by about the learning rate") {
    snn::Network net("2", {1, 1, 1}, snn::Padding::valid, {0.9}, 0);
    const auto before = net.blocks()[0].weights;
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    Adam adam(net, cfg);
    auto g = snn::Gradients::zeros_like(net);
    g.blocks[0].weights = {0.5, -2.0};
    g.blocks[0].bias = {0.0, 1e-3};
    adam.step(net, g);
    // With bias correction the first update is lr * g / (|g| + eps).
    CHECK(net.blocks()[0].weights[0] == doctest::Approx(before[0] - 0.01 * 0.5 / (0.5 + 1e-8)));
    CHECK(net.blocks()[0].weights[1] == doctest::Approx(before[1] + 0.01 * 2.0 / (2.0 + 1e-8)));
    CHECK(net.blocks()[0].bias[0] == 0.0);
    CHECK(net.blocks()[0].bias[1] == doctest::Approx(-0.01 * 1e-3 / (1e-3 + 1e-8)));
}

namespace {

std::vector<LabeledSample> channel_task(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledSample> data;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % 2;
        events::FrameSequence f(15, 2, 2, events::Duration{1000});
        for (std::size_t t = 0; t < 15; ++t)
            for (std::size_t y = 0; y < 2; ++y)
                for (std::size_t x = 0; x < 2; ++x)
                    if (rng.bernoulli(0.4)) f.at(t, label, y, x) = 1;
        data.push_back({f, label, "s" + std::to_string(i % 3)});
    }
    return data;
}

}  // namespace

TEST_CASE("training learns a channel-separable task and is deterministic") {
    const auto data = channel_task(24, 1);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.02;
    cfg.epochs = 30;
    cfg.seed = 5;
    for (auto kind : {LossKind::rate, LossKind::latency, LossKind::hdc}) {
        const std::string arch = kind == LossKind::hdc ? "16" : "2";
        Objective obj{kind, std::nullopt};
        if (kind == LossKind::hdc) obj.codebook = hdc::ClassCodebook(2, 16, 3);
        snn::Network a(arch, {2, 2, 2}, snn::Padding::valid, {0.9}, 2);
        snn::Network b = a;
        const auto ha = bptt_train(a, data, cfg, obj, data);
        const auto hb = bptt_train(b, data, cfg, obj);
        INFO(to_string(kind));
        CHECK(ha.epochs.back().train_accuracy >= 0.9);
        CHECK(*ha.epochs.back().test_accuracy >= 0.9);
        CHECK(evaluate_accuracy(a, data, obj) == *ha.epochs.back().test_accuracy);
        CHECK(a.blocks()[0].weights == b.blocks()[0].weights);
        for (std::size_t e = 0; e < cfg.epochs; ++e) CHECK(ha.epochs[e].train_loss == hb.epochs[e].train_loss);
    }
}

TEST_CASE("zero loss leaves the weights untouched") {
    snn::Network net("4", {2, 1, 1}, snn::Padding::valid, {0.9}, 0);
    net.blocks()[0].weights = {2.0, -2.0, 2.0, -2.0, 0.0, 0.0, 0.0, 0.0};
    const auto before = net.blocks()[0].weights;
    events::FrameSequence f(6, 1, 1, events::Duration{1000});
    for (std::size_t t = 0; t < 6; ++t) f.at(t, 0, 0, 0) = 1;
    const std::vector<LabeledSample> data{{f, 0, "a"}};
    Objective obj{LossKind::hdc, hdc::ClassCodebook({hdc::BinaryHypervector::from_bits(std::vector<int>{1, 0, 1, 0})}, 0)};
    TrainConfig cfg;
    cfg.epochs = 1;
    const auto h = bptt_train(net, data, cfg, obj);
    CHECK(h.epochs[0].train_loss == 0.0);
    CHECK(net.blocks()[0].weights == before);
}

TEST_CASE("divergence is reported with its epoch") {
    snn::Network net("2", {2, 2, 2}, snn::Padding::valid, {0.9}, 0);
    net.blocks()[0].weights[0] = std::nan("");
    const auto data = channel_task(4, 2);
    TrainConfig cfg;
    cfg.epochs = 2;
    try {
        bptt_train(net, data, cfg, Objective{LossKind::rate, std::nullopt});
        FAIL("expected a TrainingError");
    } catch (const TrainingError& e) {
        CHECK(e.epoch == 0);
    }
}

TEST_CASE("training input validation") {
    snn::Network net("4", {2, 2, 2}, snn::Padding::valid, {0.9}, 0);
    TrainConfig cfg;
    CHECK_THROWS_AS(bptt_train(net, {}, cfg, Objective{}), ValidationError);
    const auto data = channel_task(2, 0);
    CHECK_THROWS_AS(bptt_train(net, data, cfg, Objective{LossKind::hdc, hdc::ClassCodebook(2, 8, 0)}), ShapeError);
}

TEST_CASE("history export") {
    TrainHistory h;
    h.epochs.push_back({0, 0.5, 0.75, 0.5, 1.25});
    h.epochs.push_back({1, 0.25, 1.0, std::nullopt, 2.0});
    CHECK(h.to_csv() ==
          "epoch,train_loss,train_acc,test_acc,wall_time_s\n0,0.5,0.750000,0.500000,1.250\n1,0.25,1.000000,,2.000\n");
}

TEST_CASE("leave-signers-out folds") {
    SUBCASE("one signer per fold") {
        const std::vector<std::string> signers{"a", "b", "c", "d", "a", "b", "c", "d", "a"};
        const auto folds = kfold_split(signers, 4, 1);
        REQUIRE(folds.size() == 4);
        std::set<std::size_t> tested;
        for (const auto& f : folds) {
            std::set<std::string> test_signers;
            for (auto i : f.test) test_signers.insert(signers[i]);
            CHECK(test_signers.size() == 1);
            for (auto i : f.train) CHECK_FALSE(test_signers.contains(signers[i]));
            CHECK(f.train.size() + f.test.size() == signers.size());
            for (auto i : f.test) CHECK(tested.insert(i).second);
        }
        CHECK(tested.size() == signers.size());
    }
    SUBCASE("balanced groups") {
        std::vector<std::string> signers;
        for (int s = 0; s < 59; ++s)
            for (int r = 0; r < 3; ++r) signers.push_back("signer" + std::to_string(s));
        const auto folds = kfold_split(signers, 4, 7);
        std::vector<std::size_t> groups;
        for (const auto& f : folds) {
            std::set<std::string> ids;
            for (auto i : f.test) ids.insert(signers[i]);
            groups.push_back(ids.size());
        }
        CHECK(*std::max_element(groups.begin(), groups.end()) - *std::min_element(groups.begin(), groups.end()) <= 1);
        CHECK(kfold_split(signers, 4, 7)[2].test == folds[2].test);
    }
    SUBCASE("errors") {
        const std::vector<std::string> three{"a", "b", "c"};
        CHECK_THROWS_AS(kfold_split(three, 4, 0), ValidationError);
        CHECK_THROWS_AS(kfold_split(three, 1, 0), ValidationError);
        const std::vector<std::string> blank{"a", ""};
        CHECK_THROWS_AS(kfold_split(blank, 2, 0), ValidationError);
    }
}
