#include <doctest.h>

#include <cmath>

#include "dcid/gemm.hpp"
#include "dcid/nn.hpp"
#include "dcid/rng.hpp"
#include "gradcheck.hpp"

using namespace dcid;
using namespace dcid::nn;
using dcid::ag::Var;
using dcid::testutil::max_grad_rel_error;
using dcid::testutil::random_tensor;

namespace {

template <typename T>
Tensor<T> random_nchw(std::vector<int> shape, uint64_t seed, double lo = 0.0, double hi = 1.0) {
    RandomEngine rng(seed);
    Tensor<T> t(std::move(shape));
    for (T& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.channels = {8, 12, 16};
    cfg.kpa_groups = 2;
    return cfg;
}

bool all_finite(const Tensor<float>& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

TEST_CASE("encode_w produces the documented shape ladder") {
    DemoireNet<float> net{ModelConfig{}};  // default widths 32/64/128
    auto x = ag::constant(random_nchw<float>({1, 3, 64, 64}, 1));
    const auto levels = net.encode_w(x);
    REQUIRE(levels.size() == 3);
    CHECK(levels[0]->value.shape == std::vector<int>{1, 32, 32, 32});
    CHECK(levels[1]->value.shape == std::vector<int>{1, 64, 16, 16});
    CHECK(levels[2]->value.shape == std::vector<int>{1, 128, 8, 8});
}

TEST_CASE("encoders stay finite on zero input") {
    DemoireNet<float> net{toy_config()};
    auto x = ag::constant(Tensor<float>({1, 3, 32, 32}));
    for (const auto& lv : net.encode_w(x)) CHECK(all_finite(lv->value));
    for (const auto& lv : net.encode_uw(x)) CHECK(all_finite(lv->value));
}

TEST_CASE("encode_w reacts to a single-pixel perturbation at every level") {
    DemoireNet<float> net{toy_config()};
    Tensor<float> base = random_nchw<float>({1, 3, 32, 32}, 3);
    Tensor<float> poked = base;
    poked.data[3 * 32 * 32 / 2 + 17] += 0.5f;
    const auto la = net.encode_w(ag::constant(base));
    const auto lb = net.encode_w(ag::constant(poked));
    for (int s = 0; s < 3; ++s) {
        double diff = 0;
        for (int64_t i = 0; i < la[s]->value.numel(); ++i)
            diff += std::abs(double(la[s]->value.data[i]) - lb[s]->value.data[i]);
        CHECK(diff > 0);
    }
}

TEST_CASE("encode_uw matches encode_w shapes with under a quarter of the parameters") {
    DemoireNet<float> net{ModelConfig{}};
    auto x = ag::constant(random_nchw<float>({2, 3, 64, 64}, 5));
    const auto w_levels = net.encode_w(x);
    const auto uw_levels = net.encode_uw(x);
    for (int s = 0; s < 3; ++s) CHECK(w_levels[s]->value.shape == uw_levels[s]->value.shape);
    CHECK(net.encoder_params(true) * 4 < net.encoder_params(false));
}

TEST_CASE("model rejects non-divisible input dims") {
    DemoireNet<float> net{toy_config()};
    auto x = ag::constant(random_nchw<float>({1, 3, 30, 32}, 7));
    CHECK_THROWS_AS(net.encode_w(x), ArgumentError);
}

TEST_CASE("kpa single-group degeneracy returns the bank exactly") {
    ModelConfig cfg = toy_config();
    cfg.kpa_groups = 1;
    RandomEngine rng(9);
    ParamStore<float> store;
    KpaModule<float> kpa(store, "kpa", 8, 1, 3, rng);
    auto f_m = ag::constant(random_nchw<float>({2, 8, 16, 16}, 11));
    auto f_uw = ag::constant(random_nchw<float>({2, 8, 16, 16}, 13));
    const auto pred = kpa.predict(f_m, f_uw);
    // Softmax over one group is identically 1, so theta = bank for every item.
    for (int b = 0; b < 2; ++b)
        for (int64_t i = 0; i < kpa.bank->value.numel(); ++i)
            CHECK(pred.theta->value.data[b * kpa.bank->value.numel() + i] ==
                  doctest::Approx(kpa.bank->value.data[i]).epsilon(1e-6));
}

TEST_CASE("kpa group weights sum to one over the group axis") {
    RandomEngine rng(15);
    ParamStore<float> store;
    KpaModule<float> kpa(store, "kpa", 8, 4, 3, rng);
    auto f_m = ag::constant(random_nchw<float>({3, 8, 12, 12}, 17, -2, 2));
    auto f_uw = ag::constant(random_nchw<float>({3, 8, 12, 12}, 19, -2, 2));
    const auto pred = kpa.predict(f_m, f_uw);
    const auto& w = pred.group_weights->value;  // (3, 4, 8, 9)
    for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 8; ++c)
            for (int j = 0; j < 9; ++j) {
                double sum = 0;
                for (int g = 0; g < 4; ++g)
                    sum += w.data[((static_cast<int64_t>(b) * 4 + g) * 8 + c) * 9 + j];
                CHECK(std::abs(sum - 1.0) <= 1e-5);
            }
}

TEST_CASE("kpa theta is linear in the parameter bank") {
    RandomEngine rng(21);
    ParamStore<float> store;
    KpaModule<float> kpa(store, "kpa", 4, 3, 3, rng);
    auto f_m = ag::constant(random_nchw<float>({1, 4, 8, 8}, 23));
    auto f_uw = ag::constant(random_nchw<float>({1, 4, 8, 8}, 25));
    const auto before = kpa.predict(f_m, f_uw);

    const float delta = 0.25f;
    const int g = 1, c = 2, j = 5;
    kpa.bank->value.data[(static_cast<int64_t>(g) * 4 + c) * 9 + j] += delta;
    const auto after = kpa.predict(f_m, f_uw);

    for (int64_t i = 0; i < before.theta->value.numel(); ++i) {
        const double expected =
            i == c * 9 + j
                ? delta * before.group_weights->value.data[(static_cast<int64_t>(g) * 4 + c) * 9 + j]
                : 0.0;
        CHECK(std::abs(after.theta->value.data[i] - before.theta->value.data[i] - expected) <=
              1e-6);
    }
}

TEST_CASE("kpa_apply with the delta kernel is the identity") {
    auto f = ag::constant(random_nchw<float>({2, 6, 10, 10}, 27));
    auto theta = ag::constant(KpaModule<float>::identity_theta(2, 6, 3));
    const auto out = KpaModule<float>::apply(f, theta);
    CHECK(out->value.data == f->value.data);
}

TEST_CASE("kpa_apply is linear in the features") {
    auto f = ag::constant(random_nchw<float>({1, 4, 8, 8}, 29, -1, 1));
    auto f2 = ag::constant(f->value);
    for (float& v : f2->value.data) v *= 2.5f;
    auto theta = ag::constant(random_nchw<float>({1, 4, 3, 3}, 31, -1, 1));
    const auto a = KpaModule<float>::apply(f, theta);
    const auto b = KpaModule<float>::apply(f2, theta);
    for (int64_t i = 0; i < a->value.numel(); ++i)
        CHECK(b->value.data[i] == doctest::Approx(2.5f * a->value.data[i]).epsilon(1e-5));
}

TEST_CASE("kpa_apply with a uniform kernel equals a box filter oracle") {
    auto f = ag::constant(random_nchw<float>({1, 2, 9, 9}, 33));
    Tensor<float> theta_t({1, 2, 3, 3}, 1.0f / 9.0f);
    const auto out = KpaModule<float>::apply(f, ag::constant(theta_t));
    // Independent zero-padded box filter.
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 9; ++y)
            for (int x = 0; x < 9; ++x) {
                double acc = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= 9 || xx < 0 || xx >= 9) continue;
                        acc += f->value.data[(static_cast<int64_t>(c) * 9 + yy) * 9 + xx];
                    }
                acc /= 9.0;
                CHECK(out->value.data[(static_cast<int64_t>(c) * 9 + y) * 9 + x] ==
                      doctest::Approx(acc).epsilon(1e-5));
            }
}

TEST_CASE("kpa rejects even kernel sizes at construction") {
    RandomEngine rng(34);
    ParamStore<float> store;
    CHECK_THROWS_AS(KpaModule<float>(store, "kpa", 4, 2, 4, rng), ConfigError);
}

TEST_CASE("fusion gate honors its closed forms") {
    ParamStore<float> store;
    FusionGate<float> gate(store, "fuse", 6);
    auto f_m = ag::constant(random_nchw<float>({2, 6, 8, 8}, 35));
    auto f_uw = ag::constant(random_nchw<float>({2, 6, 8, 8}, 37));

    // alpha = 0 -> bitwise F_m.
    CHECK(gate.forward(f_m, f_uw)->value.data == f_m->value.data);

    // alpha = 1, f_uw = 0 -> F_m.
    for (float& v : gate.alpha->value.data) v = 1.0f;
    auto zeros = ag::constant(Tensor<float>({2, 6, 8, 8}));
    CHECK(gate.forward(f_m, zeros)->value.data == f_m->value.data);

    // alpha = 0.5 -> elementwise a + 0.5 b.
    for (float& v : gate.alpha->value.data) v = 0.5f;
    const auto out = gate.forward(f_m, f_uw);
    for (int64_t i = 0; i < out->value.numel(); ++i)
        CHECK(out->value.data[i] ==
              doctest::Approx(f_m->value.data[i] + 0.5f * f_uw->value.data[i]).epsilon(1e-6));
}

TEST_CASE("forward emits the dyadic output ladder") {
    DemoireNet<float> net{toy_config()};
    auto i_m = ag::constant(random_nchw<float>({1, 3, 64, 64}, 39));
    auto i_uw = ag::constant(random_nchw<float>({1, 3, 64, 64}, 41));
    Tensor<float> mask({1, 1, 64, 64}, 1.0f);
    const auto res = net.forward(i_m, i_uw, mask);
    REQUIRE(res.outputs.size() == 3);
    CHECK(res.outputs[0]->value.shape == std::vector<int>{1, 3, 64, 64});
    CHECK(res.outputs[1]->value.shape == std::vector<int>{1, 3, 32, 32});
    CHECK(res.outputs[2]->value.shape == std::vector<int>{1, 3, 16, 16});
    CHECK(res.group_weights.size() == 3);
}

TEST_CASE("residual path reproduces the input when the full-res head is zeroed") {
    DemoireNet<float> net{toy_config()};
    // Zero the full-resolution prediction head.
    for (size_t i = 0; i < net.params().names().size(); ++i) {
        const std::string& name = net.params().names()[i];
        if (name.rfind("dec.l1.head", 0) == 0)
            for (float& v : net.params().vars()[i]->value.data) v = 0.0f;
    }
    auto i_m = ag::constant(random_nchw<float>({1, 3, 32, 32}, 43));
    auto i_uw = ag::constant(random_nchw<float>({1, 3, 32, 32}, 45));
    Tensor<float> mask({1, 1, 32, 32}, 1.0f);
    const auto res = net.forward(i_m, i_uw, mask);
    CHECK(res.outputs[0]->value.data == i_m->value.data);
}

TEST_CASE("with zero fusion gates the outputs ignore the auxiliary image") {
    DemoireNet<float> net{toy_config()};  // alpha initializes to zero
    auto i_m = ag::constant(random_nchw<float>({1, 3, 32, 32}, 47));
    Tensor<float> mask({1, 1, 32, 32}, 1.0f);
    const auto a = net.forward(i_m, ag::constant(random_nchw<float>({1, 3, 32, 32}, 49)), mask);
    const auto b = net.forward(i_m, ag::constant(random_nchw<float>({1, 3, 32, 32}, 51)), mask);
    for (int s = 0; s < 3; ++s) CHECK(a.outputs[s]->value.data == b.outputs[s]->value.data);
}

TEST_CASE("forward is deterministic") {
    DemoireNet<float> net{toy_config()};
    auto i_m = ag::constant(random_nchw<float>({1, 3, 32, 32}, 53));
    auto i_uw = ag::constant(random_nchw<float>({1, 3, 32, 32}, 55));
    Tensor<float> mask({1, 1, 32, 32}, 1.0f);
    const auto a = net.forward(i_m, i_uw, mask);
    const auto b = net.forward(i_m, i_uw, mask);
    for (int s = 0; s < 3; ++s) CHECK(a.outputs[s]->value.data == b.outputs[s]->value.data);
}

TEST_CASE("coarsest-level perturbation reaches all three outputs") {
    DemoireNet<float> net{toy_config()};
    auto i_m = ag::constant(random_nchw<float>({1, 3, 32, 32}, 57));
    const auto f = net.encode_w(i_m);
    std::vector<Var<float>> fused{f[0], f[1], f[2]};
    const auto base = net.decode(fused, i_m);
    auto poked = ag::constant(f[2]->value);
    poked->value.data[7] += 1.0f;
    fused[2] = poked;
    const auto after = net.decode(fused, i_m);
    for (int s = 0; s < 3; ++s) {
        double diff = 0;
        for (int64_t i = 0; i < base[s]->value.numel(); ++i)
            diff += std::abs(double(base[s]->value.data[i]) - after[s]->value.data[i]);
        CHECK(diff > 0);
    }
}

// ---------------------------------------------------------------------------
// Gradient checks (double precision, toy tensors)
// ---------------------------------------------------------------------------

TEST_CASE("gradcheck: kpa_predict") {
    RandomEngine rng(61);
    ParamStore<double> store;
    KpaModule<double> kpa(store, "kpa", 4, 2, 3, rng);
    auto f_m = ag::parameter(random_tensor({1, 4, 8, 8}, rng));
    auto f_uw = ag::parameter(random_tensor({1, 4, 8, 8}, rng));
    auto target = random_tensor({1, 4, 3, 3}, rng);

    auto build = [&]() {
        const auto pred = kpa.predict(f_m, f_uw);
        return ag::mean_abs_diff(pred.theta, ag::constant(target));
    };
    std::vector<Var<double>> checked{f_m, f_uw, kpa.bank, kpa.reduce.w, kpa.expand.w,
                                     kpa.reduce.b, kpa.expand.b};
    CHECK(max_grad_rel_error(build, checked) <= 1e-4);
}

TEST_CASE("gradcheck: kpa_apply") {
    RandomEngine rng(63);
    auto f = ag::parameter(random_tensor({1, 4, 8, 8}, rng));
    auto theta = ag::parameter(random_tensor({1, 4, 3, 3}, rng));
    auto target = random_tensor({1, 4, 8, 8}, rng);
    auto build = [&]() {
        return ag::mean_abs_diff(KpaModule<double>::apply(f, theta), ag::constant(target));
    };
    CHECK(max_grad_rel_error(build, {f, theta}) <= 1e-4);
}

TEST_CASE("gradcheck: fuse") {
    RandomEngine rng(65);
    ParamStore<double> store;
    FusionGate<double> gate(store, "fuse", 4);
    for (double& v : gate.alpha->value.data) v = rng.uniform(-0.5, 0.5);
    auto f_m = ag::parameter(random_tensor({1, 4, 8, 8}, rng));
    auto f_uw = ag::parameter(random_tensor({1, 4, 8, 8}, rng));
    auto target = random_tensor({1, 4, 8, 8}, rng);
    auto build = [&]() { return ag::mean_abs_diff(gate.forward(f_m, f_uw), ag::constant(target)); };
    CHECK(max_grad_rel_error(build, {f_m, f_uw, gate.alpha}) <= 1e-4);
}

TEST_CASE("gradcheck: one encoder block") {
    RandomEngine rng(67);
    ParamStore<double> store;
    EncoderLevel<double> level(store, "enc", 3, 8, 3, rng);
    auto x = ag::parameter(random_tensor({1, 3, 8, 8}, rng));
    auto target = random_tensor({1, 8, 4, 4}, rng);
    auto build = [&]() { return ag::mean_abs_diff(level.forward(x), ag::constant(target)); };
    std::vector<Var<double>> checked{x};
    for (const auto& v : store.vars()) checked.push_back(v);
    CHECK(max_grad_rel_error(build, checked, 1e-6, 3) <= 1e-4);
}

TEST_CASE("gradcheck: one decoder block") {
    RandomEngine rng(69);
    ParamStore<double> store;
    DecoderLevel<double> level(store, "dec", 12, 8, 3, rng);
    auto x = ag::parameter(random_tensor({1, 12, 8, 8}, rng));
    auto target = random_tensor({1, 3, 8, 8}, rng);
    auto build = [&]() {
        const auto out = level.forward(x);
        return ag::mean_abs_diff(out.prediction, ag::constant(target));
    };
    std::vector<Var<double>> checked{x};
    for (const auto& v : store.vars()) checked.push_back(v);
    CHECK(max_grad_rel_error(build, checked, 1e-6, 3) <= 1e-4);
}

TEST_CASE("gradcheck: full model loss w.r.t. a kernel bank entry") {
    ModelConfig cfg = toy_config();
    DemoireNet<double> net{cfg};
    RandomEngine rng(71);
    auto i_m = ag::constant(random_tensor({1, 3, 16, 16}, rng, 0, 1));
    auto i_uw = ag::constant(random_tensor({1, 3, 16, 16}, rng, 0, 1));
    Tensor<double> mask({1, 1, 16, 16}, 1.0);
    auto target1 = random_tensor({1, 3, 16, 16}, rng, 0, 1);

    const Var<double> bank = net.params().find("kpa.l1.bank");
    // Make the fusion path live so the bank influences the loss.
    for (const auto& name : {"fusion.l1.alpha", "fusion.l2.alpha", "fusion.l3.alpha"})
        for (double& v : net.params().find(name)->value.data) v = 0.37;

    auto build = [&]() {
        const auto res = net.forward(i_m, i_uw, mask);
        return ag::mean_abs_diff(res.outputs[0], ag::constant(target1));
    };
    CHECK(max_grad_rel_error(build, {bank}, 1e-6, 7) <= 1e-4);
}

TEST_CASE("gemm wrapper matches a naive reference at awkward shapes") {
    // Guards against the broken dgemm kernels in the bundled OpenBLAS; the
    // double path is routed through Eigen for this reason.
    auto check = [](auto tag, bool ta, bool tb) {
        using S = decltype(tag);
        const int m = 8, n = 216, k = 16;
        RandomEngine rng(1234);
        std::vector<S> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(n) * k * 4),
            c(static_cast<size_t>(m) * n, S(0));
        for (auto& v : a) v = static_cast<S>(rng.uniform(-1, 1));
        for (auto& v : b) v = static_cast<S>(rng.uniform(-1, 1));
        const int lda = ta ? m : k;
        const int ldb = tb ? k : n;
        gemm<S>(ta, tb, m, n, k, S(1), a.data(), lda, b.data(), ldb, S(0), c.data(), n);
        double worst = 0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0;
                for (int p = 0; p < k; ++p) {
                    const double av = ta ? a[p * m + i] : a[i * k + p];
                    const double bv = tb ? b[j * k + p] : b[p * n + j];
                    acc += av * bv;
                }
                worst = std::max(worst, std::abs(acc - double(c[i * n + j])));
            }
        return worst;
    };
    CHECK(check(float(0), false, false) <= 1e-4);
    CHECK(check(float(0), false, true) <= 1e-4);
    CHECK(check(double(0), false, false) <= 1e-10);
    CHECK(check(double(0), false, true) <= 1e-10);
    CHECK(check(double(0), true, false) <= 1e-10);
}
