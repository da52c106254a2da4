#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "crickgp/common.hpp"

using namespace crickgp;
using Catch::Approx;

TEST_CASE("log_sum_exp handles ordinary and degenerate inputs", "[common]") {
    CHECK(log_sum_exp(std::log(2.0), std::log(3.0)) == Approx(std::log(5.0)).epsilon(1e-14));
    CHECK(log_sum_exp(neg_inf, 1.5) == 1.5);
    CHECK(log_sum_exp(1.5, neg_inf) == 1.5);
    CHECK(log_sum_exp(-1000.0, -1000.0) == Approx(-1000.0 + std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("log_diff_exp inverts log_sum_exp", "[common]") {
    const double a = std::log(5.0);
    const double b = std::log(3.0);
    CHECK(log_diff_exp(a, b) == Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(log_diff_exp(a, neg_inf) == a);
}

TEST_CASE("Kahan summation beats naive accumulation", "[common]") {
    KahanSum k;
    double naive = 0.0;
    for (int i = 0; i < 10'000'000; ++i) {
        k.add(0.1);
        naive += 0.1;
    }
    CHECK(std::abs(k.value() - 1e6) < 1e-7);
    CHECK(std::abs(k.value() - 1e6) <= std::abs(naive - 1e6));
}

TEST_CASE("normal_cdf and normal_quantile are mutual inverses", "[common]") {
    CHECK(normal_cdf(0.0) == Approx(0.5).epsilon(1e-15));
    CHECK(normal_cdf(1.959963984540054) == Approx(0.975).epsilon(1e-12));
    for (double p : {1e-10, 0.01, 0.16, 0.5, 0.84, 0.99, 1.0 - 1e-10}) {
        CHECK(normal_cdf(normal_quantile(p)) == Approx(p).epsilon(1e-9));
    }
    CHECK(normal_quantile(0.975) == Approx(1.959963984540054).epsilon(1e-12));
}

TEST_CASE("normal_log_pdf matches the closed form", "[common]") {
    CHECK(normal_log_pdf(0.0, 0.0, 1.0) ==
          Approx(-0.9189385332046727).epsilon(1e-14));  // -log sqrt(2 pi)
    CHECK(normal_log_pdf(3.0, 1.0, 2.0) ==
          Approx(-0.5 - std::log(2.0) - 0.9189385332046727).epsilon(1e-14));
}

TEST_CASE("sample_quantile interpolates order statistics", "[common]") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(sample_quantile(v, 0.0) == 1.0);
    CHECK(sample_quantile(v, 1.0) == 4.0);
    CHECK(sample_quantile(v, 0.5) == Approx(2.5));
    CHECK(sample_quantile(v, 1.0 / 3.0) == Approx(2.0).epsilon(1e-12));
    CHECK(sample_quantile({7.5}, 0.3) == 7.5);
    CHECK_THROWS_AS(sample_quantile({}, 0.5), DataError);
}

TEST_CASE("derive_seed separates streams by tag and seed", "[common]") {
    const auto a = derive_seed(42, "alpha");
    CHECK(a == derive_seed(42, "alpha"));
    CHECK(a != derive_seed(42, "beta"));
    CHECK(a != derive_seed(43, "alpha"));
    CHECK(derive_seed(0, "") != 0);
}

TEST_CASE("reflect_unit folds the real line onto [0,1]", "[common]") {
    CHECK(reflect_unit(0.25) == 0.25);
    CHECK(reflect_unit(1.25) == Approx(0.75).epsilon(1e-14));
    CHECK(reflect_unit(-0.25) == Approx(0.25).epsilon(1e-14));
    CHECK(reflect_unit(2.3) == Approx(0.3).epsilon(1e-12));
    CHECK(reflect_unit(-1.7) == Approx(0.3).epsilon(1e-12));
    for (double x : {-7.3, -0.001, 0.0, 0.5, 1.0, 3.75, 1234.56}) {
        const double r = reflect_unit(x);
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
}
