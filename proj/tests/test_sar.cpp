#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "srcnet/errors.hpp"
#include "srcnet/sar.hpp"

using namespace srcnet;
using sar::SceneConfig;
using sar::SeminalDistribution;

TEST_CASE("SplitMix64 matches the published reference sequence") {
    RngStream rng(0);
    CHECK(rng.next_u64() == 0xE220A8397B1DCDAFull);
    CHECK(rng.next_u64() == 0x6E789E6AA1B965F4ull);
    CHECK(rng.next_u64() == 0x06C45D188009454Full);
}

TEST_CASE("uniforms take the top 53 bits") {
    RngStream rng(42);
    RngStream replica(42);
    for (int i = 0; i < 100; ++i) {
        const double expect = static_cast<double>(replica.next_u64() >> 11) * 0x1.0p-53;
        const double got = rng.uniform();
        CHECK(got == expect);
        CHECK(got >= 0.0);
        CHECK(got < 1.0);
    }
}

TEST_CASE("pdf examples") {
    CHECK(sar::pdf(SeminalDistribution(1.0, 1.0), 0.0) == doctest::Approx(1.0));
    CHECK(sar::pdf(SeminalDistribution(2.0, 0.5), 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
    CHECK_THROWS_AS(sar::pdf(SeminalDistribution(1.0, 1.0), -0.1), DomainError);
}

TEST_CASE("pdf integrates to one over its support") {
    RngStream rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const SeminalDistribution dist(0.25 + 2.0 * rng.uniform(), 0.25 + 2.0 * rng.uniform());
        // composite Simpson over [0, 50 k_s sigma]
        const double hi = 50.0 * dist.mean();
        const int n = 20000;  // even
        const double h = hi / n;
        double acc = sar::pdf(dist, 0.0) + sar::pdf(dist, hi);
        for (int i = 1; i < n; ++i) acc += sar::pdf(dist, i * h) * (i % 2 == 1 ? 4.0 : 2.0);
        acc *= h / 3.0;
        CHECK(acc == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("log_pdf examples and composition") {
    CHECK(sar::log_pdf(SeminalDistribution(1.0, 1.0), 0.0) == doctest::Approx(0.0));
    CHECK(sar::log_pdf(SeminalDistribution(1.0, 1.0), 2.0) == doctest::Approx(-2.0));
    RngStream rng(13);
    for (int i = 0; i < 50; ++i) {
        const SeminalDistribution dist(0.5 + rng.uniform(), 0.5 + rng.uniform());
        const double x = 5.0 * rng.uniform();
        CHECK(sar::log_pdf(dist, x) == doctest::Approx(std::log(sar::pdf(dist, x))).epsilon(1e-9));
    }
}

TEST_CASE("sampling follows the inverse CDF on the documented stream") {
    SUBCASE("u = 0 maps to 0 and u = 1 - 1/e maps to the mean") {
        CHECK(-3.0 * std::log1p(-0.0) == 0.0);
        CHECK(-3.0 * std::log1p(-(1.0 - std::exp(-1.0))) == doctest::Approx(3.0).epsilon(1e-12));
    }
    SUBCASE("draws equal -mean*ln(1-u) for the same stream position") {
        RngStream rng(5);
        RngStream replica(5);
        SeminalDistribution dist(1.5, 2.0);
        for (int i = 0; i < 20; ++i) {
            const double expect = -dist.mean() * std::log1p(-replica.uniform());
            CHECK(sar::sample(dist, rng) == expect);
        }
    }
    SUBCASE("field sampling consumes the stream row-major over per-pixel distributions") {
        RngStream rng(6);
        RngStream replica(6);
        Tensor field = Tensor::zeros({1, 1, 2, 3});
        for (std::size_t i = 0; i < field.data.size(); ++i) field.data[i] = 0.5f + static_cast<float>(i);
        const Tensor draws = sar::sample_field(2.0, field, rng);
        for (std::size_t i = 0; i < field.data.size(); ++i) {
            SeminalDistribution d(2.0, field.data[i]);
            CHECK(draws.data[i] == static_cast<float>(sar::sample(d, replica)));
        }
        CHECK_THROWS_AS(sar::sample_field(2.0, Tensor::zeros({1, 1, 2, 2}), rng), ContractError);
    }
    SUBCASE("sample mean of 1e5 draws at mean 3 with seed 42") {
        RngStream rng(42);
        SeminalDistribution dist(1.0, 3.0);
        double acc = 0.0;
        for (int i = 0; i < 100000; ++i) acc += sar::sample(dist, rng);
        const double mean = acc / 1e5;
        // frozen from the reference run of this exact stream
        CHECK(mean == doctest::Approx(2.9800821847).epsilon(1e-6));
        CHECK(mean > 2.97);
        CHECK(mean < 3.03);
    }
}

TEST_CASE("fit_mle examples") {
    CHECK(sar::fit_mle({5.0}, 1.0).sigma == doctest::Approx(5.0));
    CHECK(sar::fit_mle({2.0, 4.0}, 2.0).sigma == doctest::Approx(1.5));
    CHECK_THROWS_AS(sar::fit_mle({}, 1.0), EstimationError);
    CHECK_THROWS_AS(sar::fit_mle({0.0, 0.0}, 1.0), EstimationError);

    SUBCASE("recovers sigma within 1% from 1e5 draws") {
        RngStream rng(77);
        SeminalDistribution truth(1.0, 3.0);
        std::vector<double> draws(100000);
        for (auto& d : draws) d = sar::sample(truth, rng);
        const auto fitted = sar::fit_mle(draws, 1.0);
        CHECK(std::abs(fitted.sigma / truth.sigma - 1.0) < 0.01);
    }
}

TEST_CASE("sample-mean consistency bound") {
    RngStream rng(101);
    for (int trial = 0; trial < 3; ++trial) {
        const SeminalDistribution dist(0.5 + rng.uniform(), 0.5 + 2.0 * rng.uniform());
        const int n = 10000;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += sar::sample(dist, rng);
        CHECK(std::abs(acc / n / dist.mean() - 1.0) < 4.0 / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("estimate_sigma_map") {
    SUBCASE("constant image gives a constant map") {
        const Tensor img = Tensor::full({1, 1, 6, 6}, 4.0f);
        const Tensor map = sar::estimate_sigma_map(img, 3, 2.0);
        for (float v : map.data) CHECK(v == doctest::Approx(2.0f));
    }
    SUBCASE("window 1 divides by k_s exactly") {
        RngStream rng(3);
        Tensor img = Tensor::zeros({1, 1, 4, 4});
        for (auto& v : img.data) v = static_cast<float>(rng.uniform() * 5.0);
        const Tensor map = sar::estimate_sigma_map(img, 1, 2.0);
        for (std::size_t i = 0; i < img.data.size(); ++i)
            CHECK(map.data[i] == doctest::Approx(img.data[i] / 2.0f));
    }
    SUBCASE("interior pixel equals the 3x3 mean") {
        RngStream rng(9);
        Tensor img = Tensor::zeros({1, 1, 5, 5});
        for (auto& v : img.data) v = static_cast<float>(rng.uniform());
        const Tensor map = sar::estimate_sigma_map(img, 3, 1.0);
        double expect = 0.0;
        for (int y = 1; y <= 3; ++y)
            for (int x = 1; x <= 3; ++x) expect += img.at4(0, 0, y, x);
        expect /= 9.0;
        CHECK(map.at4(0, 0, 2, 2) == doctest::Approx(expect).epsilon(1e-6));
    }
    SUBCASE("even window is rejected") {
        CHECK_THROWS_AS(sar::estimate_sigma_map(Tensor::zeros({1, 1, 4, 4}), 2, 1.0), ContractError);
    }
}

TEST_CASE("synthesize_scene") {
    SceneConfig cfg;
    cfg.seed = 42;

    SUBCASE("mask fraction tracks spill_fraction") {
        const auto scene = sar::synthesize_scene(cfg);
        double frac = 0.0;
        for (float v : scene.mask.data) {
            CHECK((v == 0.0f || v == 1.0f));
            frac += v;
        }
        frac /= static_cast<double>(scene.mask.numel());
        CHECK(frac > 0.15);
        CHECK(frac < 0.25);
    }
    SUBCASE("intensity is nonnegative and finite") {
        const auto scene = sar::synthesize_scene(cfg);
        for (float v : scene.intensity.data) {
            CHECK(v >= 0.0f);
            CHECK(std::isfinite(v));
        }
    }
    SUBCASE("identical config is bitwise deterministic") {
        const auto a = sar::synthesize_scene(cfg);
        const auto b = sar::synthesize_scene(cfg);
        CHECK(bitwise_equal(a.intensity, b.intensity));
        CHECK(bitwise_equal(a.mask, b.mask));
        CHECK(bitwise_equal(a.sigma_field, b.sigma_field));
    }
    SUBCASE("sea/oil mean intensity ratio approaches contrast_ratio over 20 seeds") {
        double sea_sum = 0.0, oil_sum = 0.0;
        std::int64_t sea_n = 0, oil_n = 0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            SceneConfig c = cfg;
            c.seed = derive_seed(1000, s);
            const auto scene = sar::synthesize_scene(c);
            for (std::size_t i = 0; i < scene.mask.data.size(); ++i) {
                if (scene.mask.data[i] == 1.0f) {
                    oil_sum += scene.intensity.data[i];
                    ++oil_n;
                } else {
                    sea_sum += scene.intensity.data[i];
                    ++sea_n;
                }
            }
        }
        const double ratio = (sea_sum / sea_n) / (oil_sum / oil_n);
        CHECK(ratio > 4.5);
        CHECK(ratio < 5.5);
    }
    SUBCASE("contrast just above 1 nearly equalizes the two regions") {
        SceneConfig c = cfg;
        c.contrast_ratio = 1.0001;
        double sea_sum = 0.0, oil_sum = 0.0;
        std::int64_t sea_n = 0, oil_n = 0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            c.seed = derive_seed(2000, s);
            const auto scene = sar::synthesize_scene(c);
            for (std::size_t i = 0; i < scene.mask.data.size(); ++i) {
                if (scene.mask.data[i] == 1.0f) {
                    oil_sum += scene.intensity.data[i];
                    ++oil_n;
                } else {
                    sea_sum += scene.intensity.data[i];
                    ++sea_n;
                }
            }
        }
        CHECK(std::abs((sea_sum / sea_n) / (oil_sum / oil_n) - 1.0) < 0.05);
    }
    SUBCASE("config violations propagate") {
        SceneConfig bad = cfg;
        bad.spill_fraction = 0.0;
        CHECK_THROWS_AS(sar::synthesize_scene(bad), ContractError);
        bad = cfg;
        bad.contrast_ratio = 1.0;
        CHECK_THROWS_AS(sar::synthesize_scene(bad), ContractError);
    }
}

TEST_CASE("derived scene seeds do not collide over 1e4 indices") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(42, i));
    CHECK(seen.size() == 10000);
}
