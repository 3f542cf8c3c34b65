#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "stnet/error.hpp"
#include "stnet/gradcheck.hpp"
#include "stnet/illum/illum.hpp"
#include "support/gen.hpp"
#include "support/reference.hpp"

using namespace stnet;

namespace {

// Row i averages the frames within radius min(i, half, n-1-i).
Tensor hand_moving_average(std::size_t n, std::size_t w) {
    Tensor m({n, n});
    const long half = static_cast<long>(w / 2);
    for (long i = 0; i < static_cast<long>(n); ++i) {
        const long r = std::min({i, half, static_cast<long>(n) - 1 - i});
        for (long j = i - r; j <= i + r; ++j)
            m.at({static_cast<std::size_t>(i), static_cast<std::size_t>(j)}) = 1.0 / static_cast<double>(2 * r + 1);
    }
    return m;
}

double rel_diff(const Tensor& a, const Tensor& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

Tensor scaled(Tensor t, double c) {
    t *= c;
    return t;
}

}  // namespace

TEST_SUITE("moving average") {
    TEST_CASE("nine frames, window three") {
        const Tensor m = moving_average_weights(9, 3);
        CHECK(m.shape() == Shape{9, 9});
        CHECK(m.at({0, 0}) == 1.0);
        CHECK(m.at({8, 8}) == 1.0);
        for (std::size_t j : {3, 4, 5}) CHECK(m.at({4, j}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        for (std::size_t i = 1; i < 8; ++i) {
            CHECK(m.at({i, i - 1}) == m.at({i, i}));
            CHECK(m.at({i, i + 1}) == m.at({i, i}));
        }
        CHECK(m == hand_moving_average(9, 3));
    }

    TEST_CASE("window one is the identity") {
        for (std::size_t n = 1; n <= 12; ++n) {
            const Tensor m = moving_average_weights(n, 1);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) CHECK(m.at({i, j}) == (i == j ? 1.0 : 0.0));
        }
    }

    TEST_CASE("rows sum to 1 and stay inside the band") {
        for (std::size_t n = 1; n <= 14; ++n)
            for (std::size_t w = 1; w <= 2 * n - 1; w += 2) {
                const Tensor m = moving_average_weights(n, w);
                CHECK(m == hand_moving_average(n, w));
                for (std::size_t i = 0; i < n; ++i) {
                    double total = 0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t gap = i > j ? i - j : j - i;
                        if (gap > w / 2) CHECK(m.at({i, j}) == 0.0);
                        total += m.at({i, j});
                    }
                    CHECK(std::abs(total - 1.0) < 1e-12);
                }
            }
    }

    TEST_CASE("invalid windows") {
        CHECK_THROWS_AS(moving_average_weights(9, 4), ConfigError);
        CHECK_THROWS_AS(moving_average_weights(9, 0), ConfigError);
        CHECK_THROWS_AS(moving_average_weights(3, 7), ConfigError);
    }
}

TEST_SUITE("elementwise") {
    TEST_CASE("abs, log and exp values") {
        CHECK(elementwise_layer({ElementwiseKind::abs}, Tensor::from({-3, 0, 2})) == Tensor::from({3, 0, 2}));
        CHECK(elementwise_layer({ElementwiseKind::log, 1, 1}, Tensor::from({0}))[0] == 0.0);
        const Tensor ones = elementwise_layer({ElementwiseKind::exp, 0, 0}, Tensor::from({-5, 0, 7}));
        CHECK(ones == Tensor::from({1, 1, 1}));
    }

    TEST_CASE("abs subgradient at zero is zero") {
        const Tensor g = elementwise_backward({ElementwiseKind::abs}, Tensor::from({-2, 0, 3}), Tensor::from({1, 1, 1}));
        CHECK(g == Tensor::from({-1, 0, 1}));
    }

    TEST_CASE("log domain violation names the element") {
        try {
            elementwise_layer({ElementwiseKind::log, 1, 0}, Tensor::from({1, 2, -1, 3}));
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(e.index() == 2);
        }
    }

    TEST_CASE("backward matches finite differences") {
        testgen::Gen g(81);
        const std::vector<Elementwise> ops = {
            {ElementwiseKind::abs}, {ElementwiseKind::log, 1.5, 0.5}, {ElementwiseKind::exp, -0.7, 0.3}};
        for (const auto& op : ops) {
            const Tensor x = op.kind == ElementwiseKind::abs ? g.tensor_off_zero({3, 4}, -1, 1, 1e-3)
                                                             : g.tensor({3, 4}, 0.1, 1);
            const Tensor r = g.tensor(x.shape(), -1, 1);
            const auto f = [&](const Tensor& v) { return ref::dot(elementwise_layer(op, v), r); };
            CHECK(compare_gradients(elementwise_backward(op, x, r), finite_diff_grad(f, x)).max_rel_error < 1e-8);
        }
    }

    TEST_CASE("prod") {
        CHECK(prod_layer(Tensor::from({2, 3}), Tensor::from({4, 5})) == Tensor::from({8, 15}));
        CHECK(prod_layer(Tensor::from({2, 3}), Tensor::from({1, 1})) == Tensor::from({2, 3}));
        const auto [g1, g2] = prod_backward(Tensor::from({2, 3}), Tensor::from({4, 5}), Tensor::from({1, -1}));
        CHECK(g1 == Tensor::from({4, -5}));
        CHECK(g2 == Tensor::from({2, -3}));
        CHECK_THROWS_AS(prod_layer(Tensor::from({1}), Tensor::from({1, 2})), ShapeError);
    }

    TEST_CASE("prod backward matches finite differences within 1e-8") {
        testgen::Gen g(82);
        const Tensor a = g.tensor({5}, -1, 1), b = g.tensor({5}, -1, 1), r = g.tensor({5}, -1, 1);
        const auto [ga, gb] = prod_backward(a, b, r);
        const auto fa = [&](const Tensor& v) { return ref::dot(prod_layer(v, b), r); };
        const auto fb = [&](const Tensor& v) { return ref::dot(prod_layer(a, v), r); };
        CHECK(compare_gradients(ga, finite_diff_grad(fa, a)).max_rel_error < 1e-8);
        CHECK(compare_gradients(gb, finite_diff_grad(fb, b)).max_rel_error < 1e-8);
    }
}

TEST_SUITE("illum") {
    TEST_CASE("switch-off is the exact identity") {
        testgen::Gen g(91);
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t t = g.size(1, 9);
            const Tensor x = g.tensor({t, g.size(1, 5), g.size(1, 5)}, -2, 2);
            IllumParams p{g.real(0.1, 3), g.real(0.1, 3), 0.0, 0.0, g.tensor({t, t}, -1, 1)};
            CHECK(illum_forward(x, p) == x);
        }
    }

    TEST_CASE("constant clip of ones with tau = eta = 1 gives one half") {
        const Tensor x({9, 4, 4}, 1.0);
        const Tensor y = illum_forward(x, from_tau_eta({1, 1}, moving_average_weights(9, 3)));
        for (double v : y.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
    }

    TEST_CASE("tau/eta and alpha/beta forms agree to 1e-12") {
        testgen::Gen g(92);
        for (int trial = 0; trial < 30; ++trial) {
            const TauEta te{g.real(0.1, 100), g.real(0.1, 100)};
            const Tensor mix = moving_average_weights(9, 3);
            const Tensor x = g.tensor({9, 3, 3}, 0, 1);
            const IllumParams direct{te.eta / te.tau, 1.0 / te.tau, 1.0, 0.0, mix};
            const Tensor a = illum_forward(x, from_tau_eta(te, mix));
            const Tensor b = illum_forward(x, direct);
            for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * std::max(1.0, std::abs(b[i])));
            // and the reciprocal formula itself
            const Tensor f = temporal_mix(x, mix);
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double expect = te.tau * x[i] / (1.0 + te.eta * std::abs(f[i]));
                CHECK(std::abs(a[i] - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
            }
            const TauEta back = to_tau_eta(direct);
            CHECK(back.tau == doctest::Approx(te.tau).epsilon(1e-12));
            CHECK(back.eta == doctest::Approx(te.eta).epsilon(1e-12));
        }
    }

    TEST_CASE("matches the per-pixel formula") {
        testgen::Gen g(93);
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t t = g.size(2, 9);
            const Tensor x = g.tensor({t, 3, 2}, -1, 1);
            const IllumParams p{g.real(0.2, 2), g.real(0.2, 2), g.real(-2, 2), g.real(-1, 1), g.tensor({t, t}, -1, 1)};
            CHECK(ref::max_abs_diff(illum_forward(x, p),
                                    ref::illum(x, p.mix, p.alpha_scale, p.beta_shift, p.gamma, p.delta)) < 1e-12);
        }
    }

    TEST_CASE("fused form equals the layer chain to 1e-12") {
        testgen::Gen g(94);
        for (int trial = 0; trial < 20; ++trial) {
            const Tensor x = g.tensor({9, 4, 4}, -1, 1);
            const IllumParams p{g.real(0.2, 2), g.real(0.2, 2), g.real(0.5, 2), g.real(-1, 1),
                                moving_average_weights(9, 2 * g.size(0, 4) + 1)};
            CHECK(ref::max_abs_diff(illum_forward(x, p), illum_forward_chain(x, p)) < 1e-12);
        }
    }

    TEST_CASE("backward matches finite differences within 1e-5") {
        testgen::Gen g(95);
        for (int trial = 0; trial < 5; ++trial) {
            const Tensor x = g.tensor({5, 2, 2}, 0.05, 1);
            IllumParams p{0.8, 0.5, 1.2, 0.1, moving_average_weights(5, 3)};
            const Tensor r = g.tensor(x.shape(), -1, 1);
            const IllumGrads d = illum_backward(x, p, r);
            const auto fx = [&](const Tensor& v) { return ref::dot(illum_forward(v, p), r); };
            const auto fm = [&](const Tensor& m) {
                IllumParams q = p;
                q.mix = m;
                return ref::dot(illum_forward(x, q), r);
            };
            CHECK(compare_gradients(d.input, finite_diff_grad(fx, x)).max_rel_error < 1e-5);
            CHECK(compare_gradients(d.mix, finite_diff_grad(fm, p.mix)).max_rel_error < 1e-5);
        }
    }

    TEST_CASE("tiny beta makes the output scale invariant on positive clips") {
        testgen::Gen g(96);
        for (int trial = 0; trial < 10; ++trial) {
            const Tensor x = g.tensor({9, 6, 6}, 0.01, 1);
            const IllumParams p{1.0, 1e-8, 1.0, 0.0, moving_average_weights(9, 3)};
            const Tensor base = illum_forward(x, p);
            for (double c : {0.5, 2.0, 10.0}) CHECK(rel_diff(illum_forward(scaled(x, c), p), base) < 1e-3);
        }
    }

    TEST_CASE("scale discrepancy does not grow with eta") {
        testgen::Gen g(97);
        for (int trial = 0; trial < 10; ++trial) {
            const Tensor x = g.tensor({9, 5, 5}, 0.01, 1);
            const Tensor mix = moving_average_weights(9, 3);
            for (double c : {0.5, 2.0, 10.0}) {
                double previous = std::numeric_limits<double>::infinity();
                for (double eta : {1.0, 10.0, 100.0}) {
                    const IllumParams p = from_tau_eta({1.0, eta}, mix);
                    const double d = rel_diff(illum_forward(scaled(x, c), p), illum_forward(x, p));
                    CHECK(d <= previous);
                    previous = d;
                }
            }
        }
    }

    TEST_CASE("validation") {
        CHECK_THROWS_AS(validate(IllumParams{1, 0, 1, 0, moving_average_weights(9, 3)}, 9), ConfigError);
        CHECK_NOTHROW(validate(IllumParams{1, 0, 0, 0, moving_average_weights(9, 3)}, 9));
        CHECK_THROWS_AS(validate(IllumParams{1, 1, 1, 0, moving_average_weights(8, 3)}, 9), ShapeError);
    }

    TEST_CASE("temporal mix on a channel tensor mixes frames only") {
        const Tensor x({2, 3, 1, 1}, {1, 2, 3, 10, 20, 30});
        const Tensor y = temporal_mix(x, moving_average_weights(3, 3));
        CHECK(y == Tensor({2, 3, 1, 1}, {1, 2, 3, 10, 20, 30}));
        const Tensor swap({3, 3}, {0, 0, 1, 0, 1, 0, 1, 0, 0});
        CHECK(temporal_mix(x, swap) == Tensor({2, 3, 1, 1}, {3, 2, 1, 30, 20, 10}));
    }
}

TEST_SUITE("grid search") {
    TEST_CASE("single point") {
        const std::vector<double> one{3.0};
        const auto r = grid_search_tau_eta(one, one, [](const TauEta&) { return 0.25; });
        CHECK(r.best == TauEta{3, 3});
        CHECK(r.table.size() == 1);
    }

    TEST_CASE("analytic maximum") {
        const std::vector<double> taus{0.5, 1, 2}, etas{1, 2, 4};
        const auto r = grid_search_tau_eta(
            taus, etas, [](const TauEta& p) { return -(p.tau - 1) * (p.tau - 1) - (p.eta - 2) * (p.eta - 2); });
        CHECK(r.best == TauEta{1, 2});
        CHECK(r.best_score == 0.0);
        REQUIRE(r.table.size() == 9);
        CHECK(r.table[1].point == TauEta{0.5, 2});
    }

    TEST_CASE("ties go to the smallest point") {
        const std::vector<double> taus{2, 1}, etas{5, 3};
        const auto r = grid_search_tau_eta(taus, etas, [](const TauEta&) { return 1.0; });
        CHECK(r.best == TauEta{1, 3});
    }

    TEST_CASE("non-finite scores are flagged and never win") {
        const std::vector<double> taus{1, 2}, etas{1};
        const auto r = grid_search_tau_eta(taus, etas, [](const TauEta& p) {
            return p.tau == 1 ? std::numeric_limits<double>::quiet_NaN() : -100.0;
        });
        CHECK(r.best == TauEta{2, 1});
        CHECK(r.table[0].non_finite);
        CHECK_FALSE(r.table[1].non_finite);
    }

    TEST_CASE("empty grid") {
        const std::vector<double> none, one{1};
        CHECK_THROWS_AS(grid_search_tau_eta(none, one, [](const TauEta&) { return 0.0; }), ConfigError);
    }

    TEST_CASE("csv table") {
        const std::vector<double> taus{1, 2}, etas{3};
        const auto r = grid_search_tau_eta(taus, etas, [](const TauEta& p) { return p.tau; });
        std::ostringstream out;
        write_grid_csv(out, r);
        const std::string text = out.str();
        CHECK(text.rfind("tau,eta,score\n", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 3);
    }
}
