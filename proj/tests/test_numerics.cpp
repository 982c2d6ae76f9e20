#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mevit/numerics.hpp"
#include "mevit/weights.hpp"
#include "oracles.hpp"

using namespace mevit;

TEST_CASE("pseudo-softmax trivial shapes") {
    // equal pair -> exactly one half each
    auto p = pseudo_softmax_row({140, 140});
    CHECK(p[0] == 128);
    CHECK(p[1] == 128);

    // singleton carries all mass, representable exactly as 256
    auto one = pseudo_softmax_row({200});
    CHECK(one[0] == 256);

    // equal inputs map to equal outputs
    auto eq = pseudo_softmax_row({90, 90, 90, 90});
    for (auto v : eq) CHECK(v == eq[0]);
}

TEST_CASE("pseudo-softmax [3,1,0] against wide-arithmetic oracle") {
    // biased by +127
    auto p = pseudo_softmax_row({130, 128, 127});
    auto exact = oracle::base2_softmax({3, 1, 0});  // 8/11, 2/11, 1/11
    REQUIRE(p.size() == exact.size());
    for (size_t i = 0; i < p.size(); ++i)
        CHECK(std::fabs(double(p[i]) / 256.0 - double(exact[i])) <= 1.0 / 256.0);
    // sum state: 8+2+1 = 11 = 2^3 * 1.375
    SoftmaxRowState st = pseudo_softmax_sum({130, 128, 127});
    CHECK(st.exp_sum == 3);  // unbiased exponent of the sum
    CHECK(double(st.mant_bits) / double(1 << 23) == doctest::Approx(0.375));
}

TEST_CASE("pseudo-softmax oracle bound, rows up to 257") {
    std::mt19937 gen(11);
    double max_err = 0;
    for (int trial = 0; trial < 300; ++trial) {
        int n = 2 + int(gen() % 256);
        std::vector<int> xb(static_cast<size_t>(n));
        for (auto& x : xb) x = 96 + int(gen() % 64);
        auto p = pseudo_softmax_row(xb);
        std::vector<int> unbiased;
        for (int x : xb) unbiased.push_back(x - kExpBias);
        auto exact = oracle::base2_softmax(unbiased);
        size_t arg_in = 0, arg_out = 0;
        for (size_t i = 0; i < p.size(); ++i) {
            CHECK(p[i] <= 256);  // outputs in [0, 1]
            max_err = std::max(max_err, std::fabs(double(p[i]) / 256.0 - double(exact[i])));
            if (xb[i] > xb[arg_in]) arg_in = i;
            if (p[i] > p[arg_out]) arg_out = i;
        }
        CHECK(xb[arg_out] == xb[arg_in]);  // argmax preserved (up to ties)
    }
    // measured bound is well under the documented allowance 2^-7
    CHECK(max_err <= 1.0 / 128.0);
    MESSAGE("pseudo-softmax max abs error vs oracle: ", max_err);
}

TEST_CASE("saturating score biasing") {
    CHECK(bias_score(0) == 127);
    CHECK(bias_score(1000) == 255);
    CHECK(bias_score(-1000) == 0);
}

TEST_CASE("layernorm constant row is all zeros") {
    QuantPlan plan;
    std::vector<std::int8_t> row(64, 17), out(64);
    std::vector<std::int8_t> gamma(64, 64), beta(64, 0);
    LayerNormRowState st = layernorm_pass1(row.data(), 64);
    layernorm_pass2(row.data(), 64, st, gamma.data(), plan.gamma_shift, beta.data(),
                    plan.beta_shift, plan.ln_shift, out.data());
    for (auto v : out) CHECK(v == 0);
}

TEST_CASE("layernorm [1,2,3,4] matches the real-arithmetic oracle") {
    QuantPlan plan;
    std::vector<std::int8_t> row{1, 2, 3, 4}, out(4);
    std::vector<std::int8_t> gamma(4, 64), beta(4, 0);
    LayerNormRowState st = layernorm_pass1(row.data(), 4);
    layernorm_pass2(row.data(), 4, st, gamma.data(), plan.gamma_shift, beta.data(),
                    plan.beta_shift, plan.ln_shift, out.data());
    auto exact = oracle::real_layernorm(row, std::pow(2.0, -16));
    CHECK(exact[0] == doctest::Approx(-1.3416).epsilon(1e-3));
    CHECK(exact[3] == doctest::Approx(1.3416).epsilon(1e-3));
    for (int j = 0; j < 4; ++j)
        CHECK(std::fabs(double(out[size_t(j)]) / 32.0 - exact[size_t(j)]) <= 1.0 / 32.0);
}

TEST_CASE("single-pass variance identity holds exactly in integers") {
    // n^2 * sum((x - mean)^2) == n * (n * sq_sum - sum^2), checked without
    // any rounding using the pass-1 accumulators.
    std::mt19937 gen(5);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 8 + int(gen() % 760);
        std::vector<std::int8_t> row(static_cast<size_t>(n));
        for (auto& v : row) v = std::int8_t(gen());
        LayerNormRowState st = layernorm_pass1(row.data(), n);
        std::int64_t sum = 0, sq = 0;
        for (auto v : row) {
            sum += v;
            sq += std::int64_t(v) * v;
        }
        REQUIRE(st.sum == sum);
        REQUIRE(st.sq_sum == sq);
        std::int64_t lhs = 0;
        for (auto v : row) {
            std::int64_t d = std::int64_t(n) * v - sum;  // n * (x - mean)
            lhs += d * d;
        }
        REQUIRE(lhs == std::int64_t(n) * (std::int64_t(n) * sq - sum * sum));
    }
}

TEST_CASE("layernorm output statistics follow gamma/beta") {
    QuantPlan plan;
    std::mt19937 gen(9);
    int n = 768;
    std::vector<std::int8_t> row(static_cast<size_t>(n)), out(static_cast<size_t>(n));
    for (auto& v : row) v = std::int8_t(gen());
    std::vector<std::int8_t> gamma(static_cast<size_t>(n), 96);  // 1.5 at 2^-6
    std::vector<std::int8_t> beta(static_cast<size_t>(n), 32);   // 0.5 at 2^-6
    LayerNormRowState st = layernorm_pass1(row.data(), n);
    layernorm_pass2(row.data(), n, st, gamma.data(), plan.gamma_shift, beta.data(),
                    plan.beta_shift, plan.ln_shift, out.data());
    double mean = 0, var = 0;
    for (auto v : out) mean += double(v) / 32.0;
    mean /= n;
    for (auto v : out) var += (double(v) / 32.0 - mean) * (double(v) / 32.0 - mean);
    var /= n;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.05));
    CHECK(var == doctest::Approx(1.5 * 1.5).epsilon(0.05));
}

TEST_CASE("layernorm random rows stay within one quantization step of oracle") {
    QuantPlan plan;
    std::mt19937 gen(13);
    double max_err = 0;
    for (int trial = 0; trial < 200; ++trial) {
        int n = 32 + int(gen() % 736);
        std::vector<std::int8_t> row(static_cast<size_t>(n)), out(static_cast<size_t>(n));
        for (auto& v : row) v = std::int8_t(gen());
        std::vector<std::int8_t> gamma(static_cast<size_t>(n), 64), beta(static_cast<size_t>(n), 0);
        LayerNormRowState st = layernorm_pass1(row.data(), n);
        layernorm_pass2(row.data(), n, st, gamma.data(), plan.gamma_shift, beta.data(),
                        plan.beta_shift, plan.ln_shift, out.data());
        auto exact = oracle::real_layernorm(row, std::pow(2.0, -16));
        for (int j = 0; j < n; ++j)
            if (std::fabs(exact[size_t(j)]) < 3.9)  // below int8 saturation
                max_err = std::max(max_err,
                                   std::fabs(double(out[size_t(j)]) / 32.0 - exact[size_t(j)]));
    }
    CHECK(max_err <= 1.0 / 32.0);
    MESSAGE("layernorm max abs error vs oracle: ", max_err);
}
