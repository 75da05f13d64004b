#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ostb/adam.hpp"
#include "ostb/gradcheck.hpp"
#include "ostb/rng.hpp"
#include "ostb/tensor.hpp"

using namespace ostb;

namespace {

// Random projection to a scalar so per-coordinate gradients stay visible.
TensorPtr<double> make_projection(int n, Rng& rng) {
    auto w = make_tensor<double>({n, 1});
    for (auto& v : w->data) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.0);
    return w;
}

TensorPtr<double> scalarize(Tape<double>& tape, TensorPtr<double> x, TensorPtr<double> proj,
                            TensorPtr<double> zero_bias) {
    return dense(tape, flatten(tape, x), proj, zero_bias);
}

void fill_uniform(Tensor<double>& t, Rng& rng, double lo, double hi) {
    for (auto& v : t.data) v = rng.uniform(lo, hi);
}

// Values with pairwise gaps well above the finite-difference step, so
// maxpool/relu/abs kinks cannot flip under perturbation.
void fill_separated(Tensor<double>& t, Rng& rng) {
    std::vector<int> order(t.data.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(static_cast<uint64_t>(i) + 1)]);
    for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] = 0.01 * order[i] - 0.005 * static_cast<double>(t.data.size()) + rng.uniform(0.0, 0.002);
}

}  // namespace

TEST_CASE("conv2d: 1x1 unit kernel is the identity") {
    Tape<float> tape;
    auto in = make_tensor<float>({3, 3, 1});
    for (int i = 0; i < 9; ++i) in->data[i] = static_cast<float>(i) * 0.25f - 1.0f;
    auto k = make_tensor<float>({1, 1, 1, 1});
    k->data[0] = 1.0f;
    auto b = make_tensor<float>({1});
    auto out = conv2d(tape, in, k, b);
    CHECK(out->shape == std::vector<int>{3, 3, 1});
    CHECK(out->data == in->data);
}

TEST_CASE("conv2d: 2x2 ones kernel sums each patch") {
    Tape<float> tape;
    auto in = make_tensor<float>({3, 3, 1});
    for (int i = 0; i < 9; ++i) in->data[i] = static_cast<float>(i + 1);
    auto k = make_tensor<float>({2, 2, 1, 1});
    std::fill(k->data.begin(), k->data.end(), 1.0f);
    auto b = make_tensor<float>({1});
    auto out = conv2d(tape, in, k, b);
    // Direct-sum oracle on the 3x3 grid 1..9.
    CHECK(out->data[0] == 1 + 2 + 4 + 5);
    CHECK(out->data[1] == 2 + 3 + 5 + 6);
    CHECK(out->data[2] == 4 + 5 + 7 + 8);
    CHECK(out->data[3] == 5 + 6 + 8 + 9);
}

TEST_CASE("conv2d: full-size input shape law 224 -> 215 with 64 kernels") {
    Tape<float> tape;
    auto in = make_tensor<float>({224, 224, 3});
    auto k = make_tensor<float>({10, 10, 3, 64});
    auto b = make_tensor<float>({64});
    auto out = conv2d(tape, in, k, b);
    CHECK(out->shape == std::vector<int>{215, 215, 64});
}

TEST_CASE("conv2d rejects bad shapes") {
    Tape<float> tape;
    auto in = make_tensor<float>({4, 4, 2});
    auto k_big = make_tensor<float>({5, 5, 2, 1});
    auto k_chan = make_tensor<float>({3, 3, 3, 1});
    auto b = make_tensor<float>({1});
    CHECK_THROWS_AS(conv2d(tape, in, k_big, b), DataError);
    CHECK_THROWS_AS(conv2d(tape, in, k_chan, b), DataError);
}

TEST_CASE("maxpool2: constants, the 2x2 block, and the floor law") {
    Tape<float> tape;
    auto c = make_tensor<float>({4, 4, 1});
    std::fill(c->data.begin(), c->data.end(), 0.7f);
    auto pc = maxpool2(tape, c);
    for (float v : pc->data) CHECK(v == 0.7f);

    auto blk = make_tensor<float>({2, 2, 1});
    blk->data = {1, 2, 3, 4};
    CHECK(maxpool2(tape, blk)->data[0] == 4.0f);

    auto odd = make_tensor<float>({215, 5, 1});
    CHECK(maxpool2(tape, odd)->shape == std::vector<int>{107, 2, 1});

    auto tiny = make_tensor<float>({1, 4, 1});
    CHECK_THROWS_AS(maxpool2(tape, tiny), DataError);
}

TEST_CASE("shape laws hold across a sweep") {
    Tape<float> tape;
    for (int h : {6, 9, 16})
        for (int w : {6, 11})
            for (int k : {1, 3, 5}) {
                auto in = make_tensor<float>({h, w, 2});
                auto kn = make_tensor<float>({k, k, 2, 3});
                auto b = make_tensor<float>({3});
                auto out = conv2d(tape, in, kn, b);
                CHECK(out->shape == std::vector<int>{h - k + 1, w - k + 1, 3});
                if (out->shape[0] >= 2 && out->shape[1] >= 2) {
                    auto p = maxpool2(tape, out);
                    CHECK(p->shape == std::vector<int>{(h - k + 1) / 2, (w - k + 1) / 2, 3});
                }
            }
}

TEST_CASE("dense: identity weights and dot-product oracle") {
    Tape<double> tape;
    auto in = make_tensor<double>({3});
    in->data = {0.3, -0.7, 1.1};
    auto w = make_tensor<double>({3, 3});
    for (int i = 0; i < 3; ++i) w->data[i * 3 + i] = 1.0;
    auto b = make_tensor<double>({3});
    CHECK(dense(tape, in, w, b)->data == in->data);

    Rng rng(17);
    auto in5 = make_tensor<double>({5});
    auto w53 = make_tensor<double>({5, 3});
    auto b3 = make_tensor<double>({3});
    fill_uniform(*in5, rng, -1.0, 1.0);
    fill_uniform(*w53, rng, -1.0, 1.0);
    fill_uniform(*b3, rng, -1.0, 1.0);
    auto out = dense(tape, in5, w53, b3);
    for (int j = 0; j < 3; ++j) {
        double expect = b3->data[j];
        for (int i = 0; i < 5; ++i) expect += in5->data[i] * w53->data[i * 3 + j];
        CHECK(std::abs(out->data[j] - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
    }

    // 102400 -> 4096 affine map: n*m + m.
    CHECK(102400LL * 4096 + 4096 == 419'434'496LL);
}

TEST_CASE("activations: relu and sigmoid basics, saturation stays finite") {
    Tape<double> tape;
    auto x = make_tensor<double>({4}, true);
    x->data = {-1.0, 2.0, 40.0, -40.0};
    auto r = relu(tape, x);
    CHECK(r->data[0] == 0.0);
    CHECK(r->data[1] == 2.0);

    auto s = sigmoid(tape, x);
    CHECK(stable_sigmoid(0.0) == 0.5);
    CHECK(s->data[2] > 0.0);
    CHECK(s->data[2] < 1.0);
    CHECK(s->data[3] > 0.0);
    CHECK(s->data[3] < 1.0);

    Tape<double> t2;
    auto proj = make_projection(4, *[] { static Rng r(5); return &r; }());
    auto zb = make_tensor<double>({1});
    auto out = dense(t2, sigmoid(t2, x), proj, zb);
    t2.backward(*out);
    for (double g : x->grad) CHECK(std::isfinite(g));
}

TEST_CASE("dropout: identity cases and binomial bounds") {
    Rng rng(23);
    Tape<float> tape;
    auto x = make_tensor<float>({10000});
    for (auto& v : x->data) v = 1.0f;

    auto same = dropout(tape, x, 0.0, true, rng);
    CHECK(same->data == x->data);
    auto inference = dropout(tape, x, 0.9, false, rng);
    CHECK(inference->data == x->data);
    CHECK_THROWS_AS(dropout(tape, x, 1.0, true, rng), ConfigError);

    auto dropped = dropout(tape, x, 0.5, true, rng);
    int survivors = 0;
    double sum = 0.0;
    for (float v : dropped->data) {
        if (v != 0.0f) ++survivors;
        sum += v;
    }
    const double fraction = survivors / 10000.0;
    CHECK(fraction == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +- 0.02
    CHECK(sum / 10000.0 == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("bce_loss: perfect prediction, ln 2, and the finite-difference oracle") {
    Tape<double> tape;
    auto p = make_tensor<double>({1});
    p->data[0] = 1.0 - 1e-7;
    CHECK(bce_loss(tape, p, 1.0)->data[0] == doctest::Approx(1e-7).epsilon(1e-3));

    p->data[0] = 0.5;
    CHECK(bce_loss(tape, p, 1.0)->data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss(tape, p, 0.0)->data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(bce_loss(tape, p, 0.5), DataError);

    auto pred = make_tensor<double>({1}, true);
    pred->data[0] = 0.3;
    const double err = grad_check(
        [&](Tape<double>& t) { return bce_loss(t, pred, 1.0); }, {pred}, 1e-6);
    CHECK(err <= 1e-6);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    auto p = make_tensor<float>({4}, true);
    p->data = {1.0f, -2.0f, 3.0f, 0.5f};
    p->ensure_grad();
    const auto before = p->data;
    AdamState<float> opt(6e-4);
    std::vector<TensorPtr<float>> params = {p};
    opt.attach(params);
    opt.step(params);
    CHECK(p->data == before);
}

TEST_CASE("adam: first step moves by -lr * sign(g)") {
    auto p = make_tensor<double>({3}, true);
    p->data = {1.0, 1.0, 1.0};
    p->ensure_grad();
    p->grad = {0.5, -2.0, 0.01};
    const double lr = 6e-4;
    AdamState<double> opt(lr);
    std::vector<TensorPtr<double>> params = {p};
    opt.attach(params);
    opt.step(params);
    for (int i = 0; i < 3; ++i) {
        const double delta = p->data[i] - 1.0;
        const double expect = -lr * (p->grad[i] > 0 ? 1.0 : -1.0);
        CHECK(std::abs(delta - expect) <= 1e-6 * lr);
    }
}

TEST_CASE("adam: lr = 0 is the identity for any gradients") {
    Rng rng(37);
    auto p = make_tensor<float>({64}, true);
    for (auto& v : p->data) v = static_cast<float>(rng.normal());
    p->ensure_grad();
    for (auto& g : p->grad) g = static_cast<float>(rng.normal(0.0, 10.0));
    const auto before = p->data;
    AdamState<float> opt(0.0);
    std::vector<TensorPtr<float>> params = {p};
    opt.attach(params);
    for (int i = 0; i < 5; ++i) opt.step(params);
    CHECK(p->data == before);
}

TEST_CASE("adam: missing gradient is an error") {
    auto p = make_tensor<float>({4}, true);
    AdamState<float> opt(1e-3);
    std::vector<TensorPtr<float>> params = {p};
    opt.attach(params);
    CHECK_THROWS_AS(opt.step(params), DataError);
}

TEST_CASE("grad_check: dense+sigmoid+bce micro-graph at 1e-6") {
    Rng rng(41);
    auto in = make_tensor<double>({6}, true);
    auto w = make_tensor<double>({6, 1}, true);
    auto b = make_tensor<double>({1}, true);
    fill_uniform(*in, rng, -0.5, 0.5);
    fill_uniform(*w, rng, -0.5, 0.5);
    fill_uniform(*b, rng, -0.1, 0.1);

    const double err = grad_check(
        [&](Tape<double>& t) { return bce_loss(t, sigmoid(t, dense(t, in, w, b)), 1.0); },
        {in, w, b}, 1e-6);
    CHECK(err <= 1e-6);
}

TEST_CASE("grad_check: conv+maxpool+relu micro-graph at 1e-5") {
    Rng rng(43);
    auto in = make_tensor<double>({8, 8, 2}, true);
    auto k = make_tensor<double>({3, 3, 2, 2}, true);
    auto b = make_tensor<double>({2}, true);
    fill_separated(*in, rng);  // nudged off pool/relu kinks
    fill_uniform(*k, rng, -0.4, 0.4);
    fill_uniform(*b, rng, -0.1, 0.1);

    auto proj = make_projection(3 * 3 * 2, rng);
    auto zb = make_tensor<double>({1});
    const double err = grad_check(
        [&](Tape<double>& t) {
            return scalarize(t, relu(t, maxpool2(t, conv2d(t, in, k, b))), proj, zb);
        },
        {in, k, b}, 1e-5);
    CHECK(err <= 1e-5);
}

TEST_CASE("grad_check: gradient of a plain sum is exactly one") {
    auto in = make_tensor<double>({12}, true);
    for (int i = 0; i < 12; ++i) in->data[i] = 0.1 * i - 0.55;
    auto ones = make_tensor<double>({12, 1});
    std::fill(ones->data.begin(), ones->data.end(), 1.0);
    auto zb = make_tensor<double>({1});

    Tape<double> tape;
    auto out = dense(tape, in, ones, zb);
    tape.backward(*out);
    for (double g : in->grad) CHECK(g == 1.0);
}

TEST_CASE("property: every differentiable op passes grad_check on random shapes") {
    Rng rng(47);
    int trials = 0;

    for (int rep = 0; rep < 15; ++rep) {
        // conv2d (+ bias): random spatial size, channels, kernel.
        {
            const int h = 4 + static_cast<int>(rng.below(4));
            const int w = 4 + static_cast<int>(rng.below(4));
            const int cin = 1 + static_cast<int>(rng.below(2));
            const int cout = 1 + static_cast<int>(rng.below(2));
            const int k = 1 + static_cast<int>(rng.below(3));
            auto in = make_tensor<double>({h, w, cin}, true);
            auto kn = make_tensor<double>({k, k, cin, cout}, true);
            auto b = make_tensor<double>({cout}, true);
            fill_uniform(*in, rng, -0.5, 0.5);
            fill_uniform(*kn, rng, -0.5, 0.5);
            fill_uniform(*b, rng, -0.2, 0.2);
            auto proj = make_projection((h - k + 1) * (w - k + 1) * cout, rng);
            auto zb = make_tensor<double>({1});
            const double err = grad_check(
                [&](Tape<double>& t) { return scalarize(t, conv2d(t, in, kn, b), proj, zb); },
                {in, kn, b}, 1e-5);
            CHECK(err <= 1e-5);
            ++trials;
        }
        // pad2d
        {
            auto in = make_tensor<double>({3, 4, 2}, true);
            fill_uniform(*in, rng, -0.5, 0.5);
            auto proj = make_projection(5 * 6 * 2, rng);
            auto zb = make_tensor<double>({1});
            const double err = grad_check(
                [&](Tape<double>& t) { return scalarize(t, pad2d(t, in, 1), proj, zb); }, {in}, 1e-5);
            CHECK(err <= 1e-5);
            ++trials;
        }
        // maxpool2 with separated values
        {
            const int h = 4 + 2 * static_cast<int>(rng.below(3));
            auto in = make_tensor<double>({h, h, 2}, true);
            fill_separated(*in, rng);
            auto proj = make_projection((h / 2) * (h / 2) * 2, rng);
            auto zb = make_tensor<double>({1});
            const double err = grad_check(
                [&](Tape<double>& t) { return scalarize(t, maxpool2(t, in), proj, zb); }, {in}, 1e-5);
            CHECK(err <= 1e-5);
            ++trials;
        }
        // dense
        {
            const int n = 3 + static_cast<int>(rng.below(5));
            const int m = 1 + static_cast<int>(rng.below(4));
            auto in = make_tensor<double>({n}, true);
            auto w = make_tensor<double>({n, m}, true);
            auto b = make_tensor<double>({m}, true);
            fill_uniform(*in, rng, -0.5, 0.5);
            fill_uniform(*w, rng, -0.5, 0.5);
            fill_uniform(*b, rng, -0.2, 0.2);
            auto proj = make_projection(m, rng);
            auto zb = make_tensor<double>({1});
            const double err = grad_check(
                [&](Tape<double>& t) { return scalarize(t, dense(t, in, w, b), proj, zb); },
                {in, w, b}, 1e-5);
            CHECK(err <= 1e-5);
            ++trials;
        }
        // relu away from the kink
        {
            auto in = make_tensor<double>({10}, true);
            for (auto& v : in->data) {
                const double mag = rng.uniform(0.05, 0.5);
                v = rng.uniform() < 0.5 ? -mag : mag;
            }
            auto proj = make_projection(10, rng);
            auto zb = make_tensor<double>({1});
            const double err = grad_check(
                [&](Tape<double>& t) { return scalarize(t, relu(t, in), proj, zb); }, {in}, 1e-5);
            CHECK(err <= 1e-5);
            ++trials;
        }
        // sigmoid
        {
            auto in = make_tensor<double>({10}, true);
            fill_uniform(*in, rng, -2.0, 2.0);
            auto proj = make_projection(10, rng);
            auto zb = make_tensor<double>({1});
            const double err = grad_check(
                [&](Tape<double>& t) { return scalarize(t, sigmoid(t, in), proj, zb); }, {in}, 1e-5);
            CHECK(err <= 1e-5);
            ++trials;
        }
        // dropout with a rebuild-stable mask
        {
            auto in = make_tensor<double>({12}, true);
            fill_uniform(*in, rng, -0.5, 0.5);
            auto proj = make_projection(12, rng);
            auto zb = make_tensor<double>({1});
            const uint64_t mask_seed = rng.next_u64();
            const double err = grad_check(
                [&, mask_seed](Tape<double>& t) {
                    Rng mask_rng(mask_seed);
                    return scalarize(t, dropout(t, in, 0.3, true, mask_rng), proj, zb);
                },
                {in}, 1e-5);
            CHECK(err <= 1e-5);
            ++trials;
        }
        // add and abs_diff with separated operands
        {
            auto a = make_tensor<double>({9}, true);
            auto b = make_tensor<double>({9}, true);
            fill_uniform(*a, rng, -0.5, 0.5);
            for (int i = 0; i < 9; ++i) {
                const double gap = rng.uniform(0.05, 0.4);
                b->data[i] = a->data[i] + (rng.uniform() < 0.5 ? -gap : gap);
            }
            auto proj = make_projection(9, rng);
            auto zb = make_tensor<double>({1});
            const double err_add = grad_check(
                [&](Tape<double>& t) { return scalarize(t, add(t, a, b), proj, zb); }, {a, b}, 1e-5);
            const double err_abs = grad_check(
                [&](Tape<double>& t) { return scalarize(t, abs_diff(t, a, b), proj, zb); }, {a, b}, 1e-5);
            CHECK(err_add <= 1e-5);
            CHECK(err_abs <= 1e-5);
            trials += 2;
        }
    }
    CHECK(trials >= 100);
}

TEST_CASE("determinism: same seed gives bit-identical forwards and gradients") {
    const auto run = [](uint64_t seed) {
        Rng rng(seed);
        auto in = make_tensor<float>({6, 6, 2}, true);
        auto k = make_tensor<float>({3, 3, 2, 2}, true);
        auto b = make_tensor<float>({2}, true);
        for (auto& v : in->data) v = static_cast<float>(rng.normal());
        for (auto& v : k->data) v = static_cast<float>(rng.normal(0.0, 0.1));
        for (auto& v : b->data) v = static_cast<float>(rng.normal(0.0, 0.1));

        Tape<float> tape;
        auto h = relu(tape, maxpool2(tape, conv2d(tape, in, k, b)));
        auto flat = flatten(tape, h);
        auto ones = make_tensor<float>({flat->shape[0], 1});
        std::fill(ones->data.begin(), ones->data.end(), 1.0f);
        auto zb = make_tensor<float>({1});
        auto out = dense(tape, flat, ones, zb);
        tape.backward(*out);

        std::vector<float> all;
        all.insert(all.end(), out->data.begin(), out->data.end());
        all.insert(all.end(), in->grad.begin(), in->grad.end());
        all.insert(all.end(), k->grad.begin(), k->grad.end());
        all.insert(all.end(), b->grad.begin(), b->grad.end());
        return all;
    };
    CHECK(run(123) == run(123));
    CHECK(run(123) != run(124));
}
