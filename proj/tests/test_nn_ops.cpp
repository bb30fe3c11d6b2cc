#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "csattn/gradcheck.hpp"
#include "csattn/nn.hpp"

using namespace csattn;

namespace {

// Independent erf via its Maclaurin series, for the GELU oracle.
double erf_series(double z) {
    const double two_over_sqrt_pi = 1.1283791670955125739;
    double term = z, sum = z;
    for (int n = 1; n < 40; ++n) {
        term *= -z * z / static_cast<double>(n);
        sum += term / static_cast<double>(2 * n + 1);
    }
    return two_over_sqrt_pi * sum;
}

}  // namespace

TEST_CASE("pointwise conv identity and summation") {
    Tape<double> tape;
    Rng rng(1);
    Tensor<double> x = rng.uniform_tensor<double>({1, 2, 3, 3}, -1, 1);
    Var<double> xv = tape.leaf(x);

    // identity weight, zero bias -> unchanged
    Tensor<double> wid(Shape{2, 2, 1, 1}, {1, 0, 0, 1});
    Var<double> same = pointwise_conv(xv, tape.leaf(wid), tape.leaf(Tensor<double>::zeros(Shape{2})));
    CHECK(bitwise_equal(tape.val(same), x));

    // all-ones 1 <- 2 channels: per-pixel sum
    Tensor<double> wsum(Shape{1, 2, 1, 1}, {1, 1});
    Tensor<double> two(Shape{1, 2, 1, 1}, {1, 2});
    Var<double> summed = pointwise_conv(tape.leaf(two), tape.leaf(wsum));
    CHECK(tape.val(summed)[0] == 3.0);

    Tensor<double> wbad(Shape{1, 3, 1, 1}, {1, 1, 1});
    CHECK_THROWS(pointwise_conv(xv, tape.leaf(wbad)));
}

TEST_CASE("pointwise conv gradient vs finite differences") {
    Rng rng(2);
    Tensor<double> x = rng.uniform_tensor<double>({1, 3, 4, 4}, -1, 1);
    Tensor<double> w = rng.uniform_tensor<double>({2, 3, 1, 1}, -1, 1);
    Tensor<double> b = rng.uniform_tensor<double>({2}, -1, 1);
    Tensor<double> probe = rng.uniform_tensor<double>({1, 2, 4, 4}, -1, 1);
    auto f = [w, b, probe](Tape<double>& t, Var<double> v) {
        return sum_all(mul(pointwise_conv(v, t.leaf(w), t.leaf(b)), t.leaf(probe)));
    };
    CHECK(grad_check(f, x, 1e-5, 1e-4).passed);
}

TEST_CASE("depthwise conv delta kernel and zero-padded counting") {
    Tape<double> tape;
    Rng rng(3);
    Tensor<double> x = rng.uniform_tensor<double>({1, 2, 4, 4}, -1, 1);

    Tensor<double> delta = Tensor<double>::zeros(Shape{2, 1, 3, 3});
    delta[4] = 1.0;      // center of channel 0
    delta[9 + 4] = 1.0;  // center of channel 1
    Var<double> same = depthwise_conv3x3(tape.leaf(x), tape.leaf(delta));
    CHECK(bitwise_equal(tape.val(same), x));

    Tensor<double> ones_k = Tensor<double>::ones(Shape{1, 1, 3, 3});
    Var<double> counted = depthwise_conv3x3(tape.leaf(Tensor<double>::ones(Shape{1, 1, 4, 4})), tape.leaf(ones_k));
    const Tensor<double>& c = tape.val(counted);
    CHECK(c[0] == 4.0);          // corner: 2x2 window inside the image
    CHECK(c[1 * 4 + 1] == 9.0);  // interior

    CHECK_THROWS(depthwise_conv3x3(tape.leaf(x), tape.leaf(ones_k)));  // channel mismatch
}

TEST_CASE("depthwise conv gradient vs finite differences") {
    Rng rng(4);
    Tensor<double> x = rng.uniform_tensor<double>({1, 2, 5, 5}, -1, 1);
    Tensor<double> w = rng.uniform_tensor<double>({2, 1, 3, 3}, -1, 1);
    Tensor<double> probe = rng.uniform_tensor<double>({1, 2, 5, 5}, -1, 1);
    auto f = [w, probe](Tape<double>& t, Var<double> v) {
        return sum_all(mul(depthwise_conv3x3(v, t.leaf(w)), t.leaf(probe)));
    };
    CHECK(grad_check(f, x, 1e-5, 1e-4).passed);
}

TEST_CASE("conv3x3 stride handling") {
    Tape<double> tape;
    Rng rng(5);
    Tensor<double> x = rng.uniform_tensor<double>({1, 2, 8, 8}, -1, 1);
    Tensor<double> w = rng.uniform_tensor<double>({4, 2, 3, 3}, -1, 1);
    CHECK(tape.val(conv3x3(tape.leaf(x), tape.leaf(w), {}, 2)).shape == Shape{1, 4, 4, 4});
    CHECK(tape.val(conv3x3(tape.leaf(x), tape.leaf(w), {}, 1)).shape == Shape{1, 4, 8, 8});
    CHECK_THROWS(conv3x3(tape.leaf(x), tape.leaf(w), {}, 3));
}

TEST_CASE("layer norm standardizes per location") {
    Tape<double> tape;

    // constant channel vector: zero variance absorbed by epsilon -> zeros
    Tensor<double> flat = Tensor<double>::full(Shape{1, 4, 2, 2}, 0.7);
    Var<double> z = layer_norm_channel(tape.leaf(flat), tape.leaf(Tensor<double>::ones(Shape{4})),
                                       tape.leaf(Tensor<double>::zeros(Shape{4})), 1e-6);
    for (double v : tape.val(z).data) CHECK(std::abs(v) < 1e-9);

    // already standardized input stays put as eps -> 0
    Tensor<double> pm(Shape{1, 2, 1, 1}, {-1.0, 1.0});
    Var<double> kept = layer_norm_channel(tape.leaf(pm), tape.leaf(Tensor<double>::ones(Shape{2})),
                                          tape.leaf(Tensor<double>::zeros(Shape{2})), 1e-12);
    CHECK(tape.val(kept)[0] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(tape.val(kept)[1] == doctest::Approx(1.0).epsilon(1e-9));

    // per-location statistics on random input
    Rng rng(6);
    Tensor<double> x = rng.uniform_tensor<double>({2, 8, 4, 4}, -2, 2);
    Var<double> y = layer_norm_channel(tape.leaf(x), tape.leaf(Tensor<double>::ones(Shape{8})),
                                       tape.leaf(Tensor<double>::zeros(Shape{8})), 1e-6);
    const Tensor<double>& yv = tape.val(y);
    for (std::int64_t n = 0; n < 2; ++n) {
        for (std::int64_t p = 0; p < 16; ++p) {
            double mu = 0, var = 0;
            for (std::int64_t c = 0; c < 8; ++c) mu += yv[(n * 8 + c) * 16 + p];
            mu /= 8;
            for (std::int64_t c = 0; c < 8; ++c) {
                const double d = yv[(n * 8 + c) * 16 + p] - mu;
                var += d * d;
            }
            var /= 8;
            CHECK(std::abs(mu) < 1e-6);
            CHECK(std::abs(var - 1.0) < 1e-4);
        }
    }
}

TEST_CASE("activation point values") {
    Tape<double> tape;
    Tensor<double> probe(Shape{4}, {0.0, -1.0, -10.0, 1.0});
    Var<double> x = tape.leaf(probe);

    const Tensor<double>& g = tape.val(activation(Activation::gelu, x));
    CHECK(g[0] == 0.0);
    const Tensor<double>& r = tape.val(activation(Activation::relu, x));
    CHECK(r[1] == 0.0);
    const Tensor<double>& s = tape.val(activation(Activation::silu, x));
    CHECK(s[0] == 0.0);
    const Tensor<double>& l = tape.val(activation(Activation::leaky_relu, x));
    CHECK(l[2] == doctest::Approx(-2.0).epsilon(1e-12));

    // GELU(1) against an independent erf-series evaluation
    const double expected = 0.5 * 1.0 * (1.0 + erf_series(1.0 / std::sqrt(2.0)));
    CHECK(g[3] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(g[3] == doctest::Approx(0.841345).epsilon(1e-5));
}

TEST_CASE("pixel unshuffle follows the stated block convention") {
    Tape<double> tape;
    Tensor<double> x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});  // [[a,b],[c,d]]
    Var<double> y = pixel_unshuffle(tape.leaf(x), 2);
    CHECK(tape.val(y).shape == Shape{1, 4, 1, 1});
    CHECK(tape.val(y).data == std::vector<double>{1, 2, 3, 4});

    Var<double> back = pixel_shuffle(y, 2);
    CHECK(bitwise_equal(tape.val(back), x));

    Tensor<double> odd = Tensor<double>::zeros(Shape{1, 1, 3, 2});
    CHECK_THROWS(pixel_unshuffle(tape.leaf(odd), 2));
}

TEST_CASE("pixel shuffle maps channels back to blocks") {
    Tape<double> tape;
    Tensor<double> x(Shape{1, 4, 1, 1}, {1, 2, 3, 4});
    Var<double> y = pixel_shuffle(tape.leaf(x), 2);
    CHECK(tape.val(y).shape == Shape{1, 1, 2, 2});
    CHECK(tape.val(y).data == std::vector<double>{1, 2, 3, 4});

    // permutation op: gradient of sum is all ones
    Tape<double> t2;
    Var<double> xv = t2.leaf(x, true);
    Var<double> loss = sum_all(pixel_shuffle(xv, 2));
    t2.backward(loss);
    for (double gv : t2.grad(xv).data) CHECK(gv == 1.0);
}

TEST_CASE("shuffle round trips are bitwise and count preserving") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        const std::int64_t n = 1 + rng.uniform_int(2);
        const std::int64_t c = 1 + rng.uniform_int(3);
        const std::int64_t r = 1 + rng.uniform_int(3);
        const std::int64_t h = r * (1 + rng.uniform_int(3));
        const std::int64_t w = r * (1 + rng.uniform_int(3));
        Tensor<double> x = rng.uniform_tensor<double>({n, c, h, w}, -1, 1);
        Tape<double> tape;
        Var<double> down = pixel_unshuffle(tape.leaf(x), r);
        CHECK(tape.val(down).size() == x.size());
        Var<double> up = pixel_shuffle(down, r);
        CHECK(bitwise_equal(tape.val(up), x));
    }
}

TEST_CASE("l2 normalize examples and norm property") {
    Tape<double> tape;
    Tensor<double> v34(Shape{2}, {3, 4});
    const Tensor<double>& y = tape.val(l2_normalize_lastdim(tape.leaf(v34), 1e-12));
    CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(0.8).epsilon(1e-12));

    Tensor<double> zero = Tensor<double>::zeros(Shape{3});
    const Tensor<double>& z = tape.val(l2_normalize_lastdim(tape.leaf(zero), 1e-12));
    for (double val : z.data) CHECK(val == 0.0);

    Rng rng(8);
    Tensor<double> x = rng.uniform_tensor<double>({3, 4, 6}, 0.1, 2.0);
    const Tensor<double>& normed = tape.val(l2_normalize_lastdim(tape.leaf(x), 1e-12));
    for (std::int64_t s = 0; s < 12; ++s) {
        double nrm = 0;
        for (std::int64_t j = 0; j < 6; ++j) nrm += normed[s * 6 + j] * normed[s * 6 + j];
        CHECK(std::abs(std::sqrt(nrm) - 1.0) < 1e-6);
    }
}

TEST_CASE("conv ops preserve spatial extents") {
    Rng rng(9);
    Tape<double> tape;
    Tensor<double> x = rng.uniform_tensor<double>({2, 3, 5, 7}, -1, 1);
    Var<double> xv = tape.leaf(x);
    Var<double> p = pointwise_conv(xv, tape.leaf(rng.uniform_tensor<double>({4, 3, 1, 1}, -1, 1)));
    CHECK(tape.val(p).shape == Shape{2, 4, 5, 7});
    Var<double> d = depthwise_conv3x3(xv, tape.leaf(rng.uniform_tensor<double>({3, 1, 3, 3}, -1, 1)));
    CHECK(tape.val(d).shape == Shape{2, 3, 5, 7});
}

TEST_CASE("downsample area examples") {
    Tape<double> tape;
    Var<double> c = tape.leaf(Tensor<double>::full(Shape{1, 1, 4, 4}, 0.3));
    for (double v : tape.val(downsample_area(c, 2)).data) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));

    Tensor<double> blk(Shape{1, 1, 2, 2}, {0, 0, 1, 1});
    CHECK(tape.val(downsample_area(tape.leaf(blk), 2))[0] == 0.5);

    Rng rng(10);
    Tensor<double> x = rng.uniform_tensor<double>({1, 3, 8, 8}, 0, 1);
    const Tensor<double>& down = tape.val(downsample_area(tape.leaf(x), 2));
    double m1 = 0, m2 = 0;
    for (double v : x.data) m1 += v;
    for (double v : down.data) m2 += v;
    CHECK(std::abs(m1 / static_cast<double>(x.size()) - m2 / static_cast<double>(down.size())) < 1e-6);
}
