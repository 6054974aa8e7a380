#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gradcheck.hpp"
#include "map2seq/errors.hpp"
#include "map2seq/tensor/checkpoint.hpp"
#include "map2seq/tensor/kernels.hpp"
#include "map2seq/tensor/optim.hpp"

namespace tt = map2seq::tensor;
namespace kn = map2seq::tensor::kernels;
using map2seq::CounterRng;
using testutil::gradcheck;
using testutil::random_away_from_zero;
using testutil::random_tensor;
using testutil::TD;
using TF = tt::Tensor<float>;

namespace {

constexpr double kGradTol = 1e-4;
constexpr int kTrials = 25;

std::size_t dim(CounterRng& rng) { return 1 + rng.below(8); }

template <typename T>
std::vector<T> random_vec(CounterRng& rng, std::size_t n) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(-1, 1));
    return v;
}

}  // namespace

TEST_CASE("kernel tables agree with the scalar reference") {
    if (!kn::isa_available(kn::Isa::kAvx2)) {
        MESSAGE("AVX2 unavailable, only the scalar table is exercised");
        return;
    }
    CounterRng rng(11);
    auto run = [&]<typename T>(T tol) {
        const auto& ref = kn::table<T>(kn::Isa::kScalar);
        const auto& simd = kn::table<T>(kn::Isa::kAvx2);
        for (int trial = 0; trial < 60; ++trial) {
            const std::size_t m = 1 + rng.below(37), n = 1 + rng.below(37), k = 1 + rng.below(37);
            auto a = random_vec<T>(rng, m * k), at = random_vec<T>(rng, k * m);
            auto b = random_vec<T>(rng, k * n), bt = random_vec<T>(rng, n * k);
            auto c0 = random_vec<T>(rng, m * n);
            auto check = [&](auto fn_ref, auto fn_simd, const T* x, const T* y) {
                auto c1 = c0, c2 = c0;
                fn_ref(m, n, k, x, y, c1.data());
                fn_simd(m, n, k, x, y, c2.data());
                for (std::size_t i = 0; i < c1.size(); ++i)
                    REQUIRE(std::abs(c1[i] - c2[i]) <= tol * (1 + std::abs(c1[i])));
            };
            check(ref.gemm_nn, simd.gemm_nn, a.data(), b.data());
            check(ref.gemm_nt, simd.gemm_nt, a.data(), bt.data());
            check(ref.gemm_tn, simd.gemm_tn, at.data(), b.data());

            const std::size_t len = 1 + rng.below(70);
            auto x = random_vec<T>(rng, len), y = random_vec<T>(rng, len);
            CHECK(std::abs(ref.dot(len, x.data(), y.data()) - simd.dot(len, x.data(), y.data())) <=
                  tol * (1 + len));
            auto y1 = y, y2 = y;
            ref.axpy(len, T(0.7), x.data(), y1.data());
            simd.axpy(len, T(0.7), x.data(), y2.data());
            for (std::size_t i = 0; i < len; ++i) REQUIRE(std::abs(y1[i] - y2[i]) <= tol);
            y1 = y, y2 = y;
            ref.add_inplace(len, x.data(), y1.data());
            simd.add_inplace(len, x.data(), y2.data());
            CHECK(y1 == y2);
            ref.scale_inplace(len, T(-1.5), y1.data());
            simd.scale_inplace(len, T(-1.5), y2.data());
            CHECK(y1 == y2);
        }
    };
    run(1e-5f);
    run(1e-12);
}

TEST_CASE("derivative of x*x at 3 is 6") {
    TD x = TD::from(1, 1, {3.0}, true);
    TD y = tt::mul(x, x);
    tt::backward(y);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward twice through the same loss is an error") {
    TD x = TD::from(1, 1, {2.0}, true);
    TD y = tt::mul(x, x);
    tt::backward(y);
    CHECK_THROWS_AS(tt::backward(y), map2seq::Error);
}

TEST_CASE("leaf gradients accumulate across losses") {
    TD x = TD::from(1, 1, {2.0}, true);
    for (int i = 0; i < 3; ++i) {
        TD y = tt::scale(x, 5.0);
        tt::backward(y);
    }
    CHECK(x.grad()[0] == doctest::Approx(15.0));
}

TEST_CASE("no-grad guard stops recording") {
    TD x = TD::from(1, 1, {2.0}, true);
    tt::NoGradGuard guard;
    TD y = tt::mul(x, x);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("shape mismatch names the op and shapes") {
    TD a = TD::zeros(2, 3), b = TD::zeros(2, 3);
    try {
        tt::matmul(a, b);
        FAIL("expected throw");
    } catch (const map2seq::ShapeError& e) {
        const std::string what = e.what();
        CHECK(what.find("matmul") != std::string::npos);
        CHECK(what.find("(2x3)") != std::string::npos);
    }
}

TEST_CASE("softmax basics") {
    TD one = TD::from(1, 1, {4.2});
    CHECK(tt::softmax_rows(one).item() == 1.0);

    TD equal = TD::from(1, 5, {0.3, 0.3, 0.3, 0.3, 0.3});
    TD sm = tt::softmax_rows(equal);
    for (double p : sm.data()) CHECK(p == doctest::Approx(0.2));

    CounterRng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t r = dim(rng), c = dim(rng);
        TD x = random_tensor(rng, r, c, -30, 30, false);
        tt::Mask mask(r * c);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) mask[i * c + j] = rng.uniform() < 0.6;
            mask[i * c + rng.below(c)] = 1;
        }
        TD y = tt::softmax_rows(x, &mask);
        for (std::size_t i = 0; i < r; ++i) {
            double total = 0;
            for (std::size_t j = 0; j < c; ++j) {
                if (!mask[i * c + j]) CHECK(y.at(i, j) == 0.0);
                total += y.at(i, j);
            }
            CHECK(std::abs(total - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("masked logits receive zero gradient") {
    TD x = TD::from(1, 4, {0.1, 0.5, -0.3, 2.0}, true);
    tt::Mask mask{1, 0, 1, 0};
    TD w = TD::from(1, 4, {1.0, 2.0, 3.0, 4.0});
    TD loss = tt::sum_all(tt::mul(tt::softmax_rows(x, &mask), w));
    tt::backward(loss);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[3] == 0.0);
    CHECK(x.grad()[0] != 0.0);
}

TEST_CASE("cross entropy of a confident correct prediction is zero") {
    TD logits = TD::from(1, 3, {0.0, 800.0, 0.0});
    TD target = TD::from(1, 3, {0.0, 1.0, 0.0});
    CHECK(tt::cross_entropy(logits, target).item() == doctest::Approx(0.0));
}

TEST_CASE("per-row ops do not mix rows") {
    CounterRng rng(17);
    TD gamma = random_tensor(rng, 1, 6, 0.5, 1.5, false);
    TD beta = random_tensor(rng, 1, 6, -0.5, 0.5, false);
    TD a = random_tensor(rng, 4, 6, -1, 1, false);
    TD b = random_tensor(rng, 1, 6, -1, 1, false);
    std::vector<double> joined(a.data().begin(), a.data().end());
    joined.insert(joined.end(), b.data().begin(), b.data().end());
    TD ab = TD::from(5, 6, joined);
    TD full_sm = tt::softmax_rows(ab), single_sm = tt::softmax_rows(b);
    TD full_ln = tt::layer_norm(ab, gamma, beta), single_ln = tt::layer_norm(b, gamma, beta);
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(full_sm.at(4, j) == single_sm.at(0, j));
        CHECK(full_ln.at(4, j) == single_ln.at(0, j));
    }
}

TEST_CASE("finite-difference check of every differentiable op") {
    CounterRng rng(2024);
    using Fn = std::function<TD(const std::vector<TD>&)>;
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
        const std::uint64_t seed = rng.next();
        auto expect_ok = [&](const std::string& name, const Fn& f, std::vector<TD> in) {
            CAPTURE(name);
            CAPTURE(trial);
            CAPTURE(n);
            CHECK(gradcheck(f, std::move(in), seed).worst_relative < kGradTol);
        };

        expect_ok("matmul", [](auto& v) { return tt::matmul(v[0], v[1]); },
                  {random_tensor(rng, m, k), random_tensor(rng, k, n)});
        expect_ok("matmul_nt", [](auto& v) { return tt::matmul_nt(v[0], v[1]); },
                  {random_tensor(rng, m, k), random_tensor(rng, n, k)});
        expect_ok("add", [](auto& v) { return tt::add(v[0], v[1]); },
                  {random_tensor(rng, m, n), random_tensor(rng, m, n)});
        expect_ok("add_row", [](auto& v) { return tt::add_row(v[0], v[1]); },
                  {random_tensor(rng, m, n), random_tensor(rng, 1, n)});
        expect_ok("mul", [](auto& v) { return tt::mul(v[0], v[1]); },
                  {random_tensor(rng, m, n), random_tensor(rng, m, n)});
        expect_ok("mul_col", [](auto& v) { return tt::mul_col(v[0], v[1]); },
                  {random_tensor(rng, m, n), random_tensor(rng, m, 1)});
        expect_ok("affine", [](auto& v) { return tt::affine(v[0], -1.7, 0.4); }, {random_tensor(rng, m, n)});
        expect_ok("relu", [](auto& v) { return tt::relu(v[0]); }, {random_away_from_zero(rng, m, n)});
        expect_ok("leaky_relu", [](auto& v) { return tt::leaky_relu(v[0], 0.2); },
                  {random_away_from_zero(rng, m, n)});
        expect_ok("sigmoid", [](auto& v) { return tt::sigmoid(v[0]); }, {random_tensor(rng, m, n, -4, 4)});
        expect_ok("log", [](auto& v) { return tt::log(v[0]); }, {random_tensor(rng, m, n, 0.2, 3)});
        expect_ok("softmax_rows", [](auto& v) { return tt::softmax_rows(v[0]); }, {random_tensor(rng, m, n, -3, 3)});
        {
            tt::Mask mask(m * n);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) mask[i * n + j] = rng.uniform() < 0.5;
                mask[i * n] = 1;
            }
            expect_ok("softmax_rows masked", [mask](auto& v) { return tt::softmax_rows(v[0], &mask); },
                      {random_tensor(rng, m, n, -3, 3)});
        }
        // With two columns the normalized row is always (+-1, -+1) and the
        // gradient is pure eps noise, below finite-difference resolution.
        if (n > 2)
            expect_ok("layer_norm", [](auto& v) { return tt::layer_norm(v[0], v[1], v[2]); },
                      {random_tensor(rng, m, n, -2, 2), random_tensor(rng, 1, n, 0.5, 1.5),
                       random_tensor(rng, 1, n)});
        {
            std::vector<std::size_t> idx(k);
            for (auto& i : idx) i = rng.below(m);
            expect_ok("gather_rows", [idx](auto& v) { return tt::gather_rows(v[0], idx); },
                      {random_tensor(rng, m, n)});
            expect_ok("scatter_add_rows", [idx, m](auto& v) { return tt::scatter_add_rows(v[0], idx, m); },
                      {random_tensor(rng, k, n)});
            expect_ok("segment_softmax", [idx, m](auto& v) { return tt::segment_softmax(v[0], idx, m); },
                      {random_tensor(rng, k, 1, -3, 3)});
            std::vector<std::size_t> blocks(k);
            for (auto& b : blocks) b = rng.below(3);
            expect_ok("gather_blocks", [idx, blocks, n](auto& v) { return tt::gather_blocks(v[0], idx, blocks, n); },
                      {random_tensor(rng, m, 3 * n)});
        }
        expect_ok("concat_cols", [](auto& v) { return tt::concat_cols(std::vector<TD>{v[0], v[1], v[0]}); },
                  {random_tensor(rng, m, k), random_tensor(rng, m, n)});
        {
            const std::size_t r0 = rng.below(m), c0 = rng.below(n);
            const std::size_t nr = 1 + rng.below(m - r0), nc = 1 + rng.below(n - c0);
            expect_ok("slice", [=](auto& v) { return tt::slice(v[0], r0, nr, c0, nc); }, {random_tensor(rng, m, n)});
        }
        expect_ok("dropout", [seed](auto& v) { return tt::dropout(v[0], 0.3, seed, true); },
                  {random_tensor(rng, m, n)});
        expect_ok("mean_all", [](auto& v) { return tt::mean_all(v[0]); }, {random_tensor(rng, m, n)});
        {
            std::vector<std::size_t> cols(m);
            for (auto& c : cols) c = rng.below(n);
            expect_ok("pick", [cols](auto& v) { return tt::pick(v[0], cols); }, {random_tensor(rng, m, n)});
        }
        {
            TD target = random_tensor(rng, m, n, 0, 1, false);
            expect_ok("cross_entropy", [target](auto& v) { return tt::cross_entropy(v[0], target); },
                      {random_tensor(rng, m, n, -3, 3)});
        }
        // A composite graph with shared subexpressions. Smooth ops only, a
        // kink within eps of a matmul output would break the comparison.
        expect_ok("composite",
                  [](auto& v) {
                      TD h = tt::sigmoid(tt::matmul(v[0], v[1]));
                      TD att = tt::softmax_rows(tt::matmul_nt(h, h));
                      return tt::add(tt::matmul(att, h), tt::sigmoid(h));
                  },
                  {random_tensor(rng, m, k), random_tensor(rng, k, n)});
    }
}

TEST_CASE("dropout is seed-determined and inactive at inference") {
    CounterRng rng(5);
    TD x = random_tensor(rng, 4, 7, -1, 1, false);
    TD a = tt::dropout(x, 0.5, 99, true), b = tt::dropout(x, 0.5, 99, true);
    CHECK(std::vector<double>(a.data().begin(), a.data().end()) ==
          std::vector<double>(b.data().begin(), b.data().end()));
    TD off = tt::dropout(x, 0.5, 99, false);
    CHECK(off.node() == x.node());
}

TEST_CASE("parameter store") {
    tt::ParameterStore<float> ps(7);
    TF w = ps.add("enc.w", 4, 3, tt::Init::kFanIn);
    CHECK_THROWS_AS(ps.add("enc.w", 1, 1, tt::Init::kZeros), map2seq::ConfigError);
    for (float v : w.data()) CHECK(std::abs(v) <= 0.5f);
    CHECK(ps.add("b", 1, 3, tt::Init::kZeros).data()[2] == 0.0f);

    // Registration order does not change a parameter's initial values.
    tt::ParameterStore<float> other(7);
    other.add("z", 2, 2, tt::Init::kFanIn);
    TF w2 = other.add("enc.w", 4, 3, tt::Init::kFanIn);
    CHECK(std::equal(w.data().begin(), w.data().end(), w2.data().begin()));
}

TEST_CASE("adam") {
    SUBCASE("zero gradients leave parameters unchanged") {
        tt::ParameterStore<double> ps(1);
        TD p = ps.add("p", 2, 2, tt::Init::kFanIn);
        std::vector<double> before(p.data().begin(), p.data().end());
        p.grad();
        tt::Adam<double> opt(ps);
        opt.step(0.1);
        CHECK(std::vector<double>(p.data().begin(), p.data().end()) == before);
    }
    SUBCASE("first step with unit gradient moves by the learning rate") {
        tt::ParameterStore<double> ps(1);
        TD p = ps.add("p", 1, 1, tt::Init::kZeros);
        p.grad()[0] = 1.0;
        tt::Adam<double> opt(ps);
        opt.step(0.1);
        // m_hat = 1, v_hat = 1: update = 0.1 / (1 + 1e-9).
        CHECK(p.data()[0] == doctest::Approx(-0.1 / (1.0 + 1e-9)).epsilon(1e-12));
    }
    SUBCASE("non-finite gradient names the parameter") {
        tt::ParameterStore<float> ps(1);
        TF p = ps.add("decoder.out", 1, 2, tt::Init::kZeros);
        p.grad()[1] = std::nanf("");
        tt::Adam<float> opt(ps);
        try {
            opt.step(0.1);
            FAIL("expected throw");
        } catch (const map2seq::NumericError& e) {
            CHECK(std::string(e.what()).find("decoder.out") != std::string::npos);
        }
    }
    SUBCASE("identical runs are bit-identical") {
        auto run = [] {
            tt::ParameterStore<float> ps(3);
            TF w = ps.add("w", 3, 3, tt::Init::kFanIn);
            tt::Adam<float> opt(ps);
            TF x = TF::from(2, 3, {0.1f, -0.2f, 0.3f, 0.5f, 0.4f, -0.6f});
            for (int s = 1; s <= 10; ++s) {
                ps.zero_grad();
                TF loss = tt::mean_all(tt::mul(tt::matmul(x, w), tt::matmul(x, w)));
                tt::backward(loss);
                opt.step(tt::NoamSchedule{0.5, 3, 4, false}.rate(s));
            }
            return std::vector<float>(w.data().begin(), w.data().end());
        };
        CHECK(run() == run());
    }
}

TEST_CASE("noam schedule") {
    tt::NoamSchedule s{1.0, 256, 4000, false};
    CHECK(s.rate(4000) == doctest::Approx(std::pow(256.0, -0.5) * std::pow(4000.0, -0.5)));
    CHECK(s.rate(1) < s.rate(100));
    CHECK(s.rate(10000) < s.rate(4000));
    s.constant = true;
    CHECK(s.rate(7) == 1.0);
}

TEST_CASE("checkpoint round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "map2seq_ckpt_test";
    std::filesystem::remove_all(dir);
    tt::ParameterStore<float> a(4);
    a.add("x", 3, 5, tt::Init::kFanIn);
    a.add("y", 1, 2, tt::Init::kOnes);
    tt::save_checkpoint(dir, a, {{"note", "hi"}});

    tt::ParameterStore<float> b(99);
    b.add("x", 3, 5, tt::Init::kZeros);
    b.add("y", 1, 2, tt::Init::kZeros);
    tt::load_checkpoint(dir, b);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(std::equal(a.tensors()[i].data().begin(), a.tensors()[i].data().end(),
                         b.tensors()[i].data().begin()));
    CHECK(tt::read_checkpoint_meta(dir).at("note") == "hi");

    tt::ParameterStore<float> wrong(1);
    wrong.add("x", 5, 3, tt::Init::kZeros);
    wrong.add("y", 1, 2, tt::Init::kZeros);
    CHECK_THROWS_AS(tt::load_checkpoint(dir, wrong), map2seq::ShapeError);
    std::filesystem::remove_all(dir);
}
