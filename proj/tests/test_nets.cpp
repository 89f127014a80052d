#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "srcnet/errors.hpp"
#include "srcnet/nets.hpp"
#include "support/gradcheck.hpp"
#include "support/reference_nets.hpp"

using namespace srcnet;
namespace ag = srcnet::autograd;
using gradcheck::random_tensor;
using nets::DiscriminatorConfig;
using nets::GeneratorConfig;

TEST_CASE("generator structure") {
    SUBCASE("depth 4 base 16 at 64 gives a 4x4 bottleneck") {
        GeneratorConfig cfg;  // defaults: 2ch, base 16, depth 4, 64
        cfg.validate();
        CHECK(cfg.image_size / (1 << cfg.depth) == 4);
        CHECK(cfg.enc_channels(1) == 16);
        CHECK(cfg.enc_channels(4) == 128);
        CHECK(cfg.enc_channels(5) == 128);  // capped at 8*base
    }
    SUBCASE("parameter count matches the closed form for depth 2, base 4") {
        GeneratorConfig cfg;
        cfg.input_channels = 1;
        cfg.base_channels = 4;
        cfg.depth = 2;
        cfg.image_size = 8;
        RngStream rng(1);
        const auto params = nets::init_generator(cfg, rng);
        // enc1: 4*1*16 + 4 + 4; enc2: 8*4*16 + 8 + 8
        // dec1: 8*4*16 + 4 + 4; dec2: (4+4)*4*16 + 4 + 4; head: 4 + 1
        const std::int64_t expect = (64 + 8) + (512 + 16) + (512 + 8) + (512 + 8) + 5;
        CHECK(params.parameter_count() == expect);
    }
    SUBCASE("same seed, same bits") {
        const auto a = nets::make_generator(GeneratorConfig{}, 7);
        const auto b = nets::make_generator(GeneratorConfig{}, 7);
        REQUIRE(a.params.entries.size() == b.params.entries.size());
        for (std::size_t i = 0; i < a.params.entries.size(); ++i)
            CHECK(bitwise_equal(a.params.entries[i].value, b.params.entries[i].value));
        const auto c = nets::make_generator(GeneratorConfig{}, 8);
        CHECK(!bitwise_equal(a.params.entries[0].value, c.params.entries[0].value));
    }
    SUBCASE("config violations are rejected") {
        GeneratorConfig bad;
        bad.image_size = 48;
        CHECK_THROWS_AS(bad.validate(), ContractError);
        bad = GeneratorConfig{};
        bad.depth = 7;  // 2^7 > 64
        CHECK_THROWS_AS(bad.validate(), ContractError);
    }
}

TEST_CASE("generator forward") {
    GeneratorConfig cfg;
    cfg.input_channels = 2;
    cfg.base_channels = 4;
    cfg.depth = 3;
    cfg.image_size = 16;
    const auto gen = nets::make_generator(cfg, 42);
    RngStream rng(5);
    const Tensor input = random_tensor({2, 2, 16, 16}, rng, 0.0f, 2.0f);

    SUBCASE("output shape and open range") {
        const Tensor out = nets::generator_predict(gen, input);
        CHECK(out.dims == std::vector<int>{2, 1, 16, 16});
        for (float v : out.data) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
    SUBCASE("matches the double-precision mirror") {
        const Tensor out = nets::generator_predict(gen, input);
        const ref::RTensor rout =
            ref::generator_forward(cfg, ref::param_map(gen.params), ref::from_float(input));
        REQUIRE(out.dims == rout.dims);
        for (std::size_t i = 0; i < out.data.size(); ++i)
            CHECK(gradcheck::mixed_err(out.data[i], rout.data[i]) < 1e-5);
    }
    SUBCASE("every skip connection is a live path") {
        const auto pm = ref::param_map(gen.params);
        const ref::RTensor base = ref::generator_forward(cfg, pm, ref::from_float(input));
        for (int level = 1; level < cfg.depth; ++level) {
            const ref::RTensor ablated = ref::generator_forward(cfg, pm, ref::from_float(input), level);
            double max_delta = 0.0;
            for (std::size_t i = 0; i < base.data.size(); ++i)
                max_delta = std::max(max_delta, std::abs(base.data[i] - ablated.data[i]));
            INFO("skip level ", level);
            CHECK(max_delta > 1e-4);
        }
    }
    SUBCASE("wrong spatial size is a shape error") {
        RngStream rng2(6);
        CHECK_THROWS_AS(nets::generator_predict(gen, random_tensor({1, 2, 8, 8}, rng2)), ShapeError);
    }
    SUBCASE("structural mirror: decoder inputs meet their encoder skips at every depth") {
        for (int depth = 2; depth <= 4; ++depth) {
            GeneratorConfig c;
            c.input_channels = 1;
            c.base_channels = 2;
            c.depth = depth;
            c.image_size = 32;
            const auto g = nets::make_generator(c, 3);
            RngStream r(depth);
            // forward succeeds only if every concat pairs identical spatial dims
            const Tensor out = nets::generator_predict(g, random_tensor({1, 1, 32, 32}, r));
            CHECK(out.dims == std::vector<int>{1, 1, 32, 32});
        }
    }
}

TEST_CASE("discriminator forward") {
    DiscriminatorConfig cfg;
    cfg.base_channels = 4;
    cfg.depth = 2;
    const auto disc = nets::make_discriminator(cfg, 11);
    RngStream rng(12);
    const Tensor masks = random_tensor({3, 1, 16, 16}, rng, 0.0f, 1.0f);

    SUBCASE("one probability per sample, strictly inside (0,1)") {
        const Tensor out = nets::discriminator_predict(disc, masks);
        REQUIRE(out.dims == std::vector<int>{3});
        for (float v : out.data) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
    SUBCASE("same seed determinism") {
        const auto again = nets::make_discriminator(cfg, 11);
        CHECK(bitwise_equal(nets::discriminator_predict(disc, masks),
                            nets::discriminator_predict(again, masks)));
    }
    SUBCASE("permuting the batch permutes the outputs") {
        const Tensor out = nets::discriminator_predict(disc, masks);
        Tensor permuted = Tensor::zeros({3, 1, 16, 16});
        const int order[3] = {2, 0, 1};
        for (int n = 0; n < 3; ++n)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) permuted.at4(n, 0, y, x) = masks.at4(order[n], 0, y, x);
        const Tensor out2 = nets::discriminator_predict(disc, permuted);
        for (int n = 0; n < 3; ++n) CHECK(out2.data[static_cast<std::size_t>(n)] == out.data[order[n]]);
    }
    SUBCASE("conditioning presence must match the config") {
        const Tensor cond = random_tensor({3, 1, 16, 16}, rng);
        CHECK_THROWS_AS(nets::discriminator_predict(disc, masks, &cond), ContractError);
        DiscriminatorConfig cfg2 = cfg;
        cfg2.input_channels = 2;
        const auto disc2 = nets::make_discriminator(cfg2, 11);
        CHECK_THROWS_AS(nets::discriminator_predict(disc2, masks), ContractError);
        const Tensor out = nets::discriminator_predict(disc2, masks, &cond);
        CHECK(out.dims == std::vector<int>{3});
    }
    SUBCASE("matches the double-precision mirror") {
        const Tensor out = nets::discriminator_predict(disc, masks);
        const ref::RTensor rout =
            ref::discriminator_forward(cfg, ref::param_map(disc.params), ref::from_float(masks));
        for (std::size_t i = 0; i < out.data.size(); ++i)
            CHECK(gradcheck::mixed_err(out.data[i], rout.data[i]) < 1e-5);
    }
}

TEST_CASE("discriminator gradient w.r.t. the mask passes a finite-difference check") {
    DiscriminatorConfig cfg;
    cfg.base_channels = 2;
    cfg.depth = 2;
    const auto disc = nets::make_discriminator(cfg, 21);
    RngStream rng(22);
    const Tensor mask = random_tensor({1, 1, 8, 8}, rng, 0.1f, 0.9f);

    ag::Tape tape;
    const auto binding = nets::bind_params(tape, disc.params, false);
    auto vmask = tape.leaf(mask, true);
    auto out = nets::discriminator_forward(tape, cfg, binding, vmask);
    tape.backward(ag::mean(out));
    const Tensor analytic = tape.grad_of(vmask);

    const auto pm = ref::param_map(disc.params);
    ref::RTensor rmask = ref::from_float(mask);
    const double h = 1e-3;
    for (std::size_t i = 0; i < rmask.data.size(); ++i) {
        const double saved = rmask.data[i];
        rmask.data[i] = saved + h;
        const double up = ref::mean(ref::discriminator_forward(cfg, pm, rmask));
        rmask.data[i] = saved - h;
        const double down = ref::mean(ref::discriminator_forward(cfg, pm, rmask));
        rmask.data[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        CHECK(gradcheck::mixed_err(fd, analytic.data[i]) < 1e-4);
    }
}

TEST_CASE("end-to-end gradient check on a tiny pair of nets") {
    GeneratorConfig gc;
    gc.input_channels = 1;
    gc.base_channels = 2;
    gc.depth = 2;
    gc.image_size = 8;
    DiscriminatorConfig dc;
    dc.base_channels = 2;
    dc.depth = 2;
    const auto gen = nets::make_generator(gc, 31);
    const auto disc = nets::make_discriminator(dc, 32);
    RngStream rng(33);
    const Tensor x = random_tensor({1, 1, 8, 8}, rng, 0.0f, 2.0f);
    const Tensor y = random_tensor({1, 1, 8, 8}, rng, 0.0f, 1.0f);

    // L = mean(log(1 - D(G(x)))) + 10 * mse(G(x), y), both nets trainable
    ag::Tape tape;
    const auto bg = nets::bind_params(tape, gen.params, true);
    const auto bd = nets::bind_params(tape, disc.params, true);
    auto fake = nets::generator_forward(tape, gc, bg, tape.constant(x));
    auto dfake = nets::discriminator_forward(tape, dc, bd, fake);
    auto loss = ag::add(ag::mean(ag::log(ag::const_minus(1.0f, dfake), 1e-7f)),
                        ag::mul_const(ag::mse(fake, tape.constant(y)), 10.0f));
    tape.backward(loss);
    const ag::GradMap grads = tape.named_gradients();

    auto ref_loss = [&](const ref::ParamMap& gp, const ref::ParamMap& dp) {
        const ref::RTensor fake_r = ref::generator_forward(gc, gp, ref::from_float(x));
        const ref::RTensor dfake_r = ref::discriminator_forward(dc, dp, fake_r);
        double mse = 0.0;
        for (std::size_t i = 0; i < fake_r.data.size(); ++i) {
            const double d = fake_r.data[i] - static_cast<double>(y.data[i]);
            mse += d * d;
        }
        mse /= static_cast<double>(fake_r.data.size());
        double adv = 0.0;
        for (double v : dfake_r.data) adv += std::log(1.0 - v);
        adv /= static_cast<double>(dfake_r.data.size());
        return adv + 10.0 * mse;
    };

    ref::ParamMap gp = ref::param_map(gen.params);
    ref::ParamMap dp = ref::param_map(disc.params);
    // A smaller step than the per-op checks: the normalization statistics give
    // the composed function a large third derivative, and the double-precision
    // reference path keeps rounding far below the truncation this removes.
    const double h = 1e-4;
    int checked = 0;
    auto check_params = [&](ref::ParamMap& target, const std::string& /*side*/) {
        for (auto& [name, tensor] : target) {
            REQUIRE(grads.count(name) == 1);
            const Tensor& analytic = grads.at(name);
            for (std::size_t i = 0; i < tensor.data.size(); ++i) {
                const double saved = tensor.data[i];
                tensor.data[i] = saved + h;
                const double up = ref_loss(gp, dp);
                tensor.data[i] = saved - h;
                const double down = ref_loss(gp, dp);
                tensor.data[i] = saved;
                const double fd = (up - down) / (2.0 * h);
                INFO(name, "[", i, "]");
                CHECK(gradcheck::mixed_err(fd, analytic.data[i]) < 1e-3);
                ++checked;
            }
        }
    };
    check_params(gp, "gen");
    check_params(dp, "disc");
    CHECK(checked > 500);  // the sweep really covered both nets
}
