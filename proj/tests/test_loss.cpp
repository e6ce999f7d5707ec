#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "stcd/gradcheck.hpp"
#include "stcd/loss.hpp"

using namespace stcd;

namespace {

Tensor logits_from_score(const std::vector<double>& s, int n, int h, int w, bool rg = false) {
    // class-0 plane zero, class-1 plane = s, so score(logits) == s
    std::vector<double> d(static_cast<size_t>(n) * 2 * h * w, 0.0);
    for (int b = 0; b < n; ++b)
        for (int i = 0; i < h * w; ++i) d[(b * 2 + 1) * h * w + i] = s[b * h * w + i];
    return Tensor::from({n, 2, h, w}, d, rg);
}

}  // namespace

TEST_CASE("change score and probability") {
    Tensor logits = Tensor::from({1, 2, 1, 2}, {1.0, -0.5, 3.0, -0.5});
    Tensor s = change_score(logits);
    CHECK(s.shape() == Shape{1, 1, 2});
    CHECK(s.data()[0] == doctest::Approx(2.0));
    CHECK(s.data()[1] == doctest::Approx(0.0));
    CHECK(change_probability(logits).data()[1] == doctest::Approx(0.5));

    CHECK_THROWS_AS(change_score(Tensor::zeros({1, 3, 2, 2})), DimensionError);
}

TEST_CASE("cross entropy unit values") {
    // uniform logits -> p = 0.5 everywhere -> CE = ln 2 regardless of labels
    Tensor logits = Tensor::full({2, 2, 4, 4}, 0.3);
    Tensor y = Tensor::from({2, 4, 4}, [] {
        std::vector<double> v(32, 0.0);
        for (size_t i = 0; i < v.size(); i += 3) v[i] = 1.0;
        return v;
    }());
    CHECK(cross_entropy(logits, y).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // p = 0.75 on a positive pixel
    Tensor l2 = logits_from_score({std::log(3.0)}, 1, 1, 1);
    CHECK(cross_entropy(l2, Tensor::from({1, 1, 1}, {1.0})).item() ==
          doctest::Approx(-std::log(0.75)).epsilon(1e-12));

    // confident wrong prediction stays finite via the 1e-7 clamp
    Tensor l3 = logits_from_score({100.0}, 1, 1, 1);
    double ce = cross_entropy(l3, Tensor::from({1, 1, 1}, {0.0})).item();
    CHECK(std::isfinite(ce));
    CHECK(ce == doctest::Approx(-std::log(1e-7)).epsilon(1e-6));

    CHECK_THROWS_AS(cross_entropy(logits, Tensor::full({2, 4, 4}, 0.5)), DataError);
}

TEST_CASE("dice loss hand cases") {
    Tensor p = Tensor::from({4}, {0.5, 0.5, 0.0, 0.0});
    Tensor y = Tensor::from({4}, {1.0, 0.0, 0.0, 0.0});
    CHECK(dice_loss(p, y).item() == doctest::Approx(0.5).epsilon(1e-5));

    // perfect hard prediction -> 0, total miss -> ~1
    Tensor hard = Tensor::from({4}, {1.0, 0.0, 0.0, 0.0});
    CHECK(dice_loss(hard, y).item() == doctest::Approx(0.0).epsilon(1e-6));
    Tensor miss = Tensor::from({4}, {0.0, 1.0, 1.0, 1.0});
    CHECK(dice_loss(miss, y).item() == doctest::Approx(1.0).epsilon(1e-5));

    // empty prediction and label -> smooth/smooth -> 0
    Tensor z = Tensor::zeros({4});
    CHECK(dice_loss(z, z).item() == doctest::Approx(0.0));

    // bounds on random inputs
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> pv(16), yv(16);
        for (auto& v : pv) v = static_cast<double>(rng() % 1000) / 999.0;
        for (auto& v : yv) v = static_cast<double>(rng() % 2);
        double d = dice_loss(Tensor::from({16}, pv), Tensor::from({16}, yv)).item();
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
    }
}

TEST_CASE("lovasz hinge unit values") {
    // single positive pixel at score 0: error 1, jaccard grad 1 -> loss 1
    CHECK(lovasz_hinge(Tensor::from({1}, {0.0}), Tensor::from({1}, {1.0})).item() ==
          doctest::Approx(1.0).epsilon(1e-12));
    // confident correct single pixel -> hinge inactive
    CHECK(lovasz_hinge(Tensor::from({1}, {2.0}), Tensor::from({1}, {1.0})).item() ==
          doctest::Approx(0.0));
    // all-background ground truth -> 0 by convention
    CHECK(lovasz_hinge(Tensor::from({3}, {5.0, -1.0, 0.0}), Tensor::zeros({3})).item() == 0.0);
}

TEST_CASE("lovasz hinge at indicator errors equals the jaccard loss") {
    // when every hinge error is exactly 0 or 1 the extension must hit the
    // discrete jaccard loss of the corresponding flipped prediction
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const int p = 4 + static_cast<int>(rng() % 12);
        std::vector<double> y(p), s(p);
        bool flipped_any = false;
        int pos = 0;
        for (int i = 0; i < p; ++i) y[i] = static_cast<double>(rng() % 2);
        for (int i = 0; i < p; ++i) pos += y[i] == 1.0;
        if (pos == 0) {
            y[0] = 1.0;
            pos = 1;
        }
        std::vector<int> flip(p);
        for (int i = 0; i < p; ++i) {
            flip[i] = rng() % 3 == 0;
            flipped_any |= flip[i] != 0;
            const double sign = 2.0 * y[i] - 1.0;
            s[i] = flip[i] ? 0.0 : 2.0 * sign;  // error exactly 1 or 0
        }
        int m_fg = 0, m_bg = 0;
        for (int i = 0; i < p; ++i) {
            if (flip[i] && y[i] == 1.0) ++m_fg;
            if (flip[i] && y[i] == 0.0) ++m_bg;
        }
        const double expected =
            flipped_any ? 1.0 - static_cast<double>(pos - m_fg) / (pos + m_bg) : 0.0;
        double got = lovasz_hinge(Tensor::from({p}, s), Tensor::from({p}, y)).item();
        CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("lovasz hinge monotonicity") {
    // raising the score of a positive pixel (or lowering a negative one)
    // never increases the loss
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        const int p = 8;
        std::vector<double> y(p), s(p);
        for (int i = 0; i < p; ++i) y[i] = static_cast<double>(rng() % 2);
        y[0] = 1.0;
        for (auto& v : s) v = static_cast<double>(rng() % 2000) / 500.0 - 2.0;
        Tensor yl = Tensor::from({p}, y);
        const double base = lovasz_hinge(Tensor::from({p}, s), yl).item();
        const int i = static_cast<int>(rng() % p);
        std::vector<double> s2 = s;
        s2[i] += (2.0 * y[i] - 1.0) * 0.5;
        const double moved = lovasz_hinge(Tensor::from({p}, s2), yl).item();
        CHECK(moved <= base + 1e-12);
    }
}

TEST_CASE("lovasz hinge gradient matches finite differences") {
    // scores chosen with hinge margins away from 0 and distinct errors so the
    // sort order is locally stable
    Tensor y = Tensor::from({6}, {1.0, 0.0, 1.0, 1.0, 0.0, 0.0});
    Tensor s = Tensor::from({6}, {0.31, -0.42, 1.57, -0.66, 0.23, -1.84}, true);
    auto f = [&](const Tensor& x) { return lovasz_hinge(x, y); };
    GradCheckOptions opt;
    opt.rtol = 1e-6;
    auto rep = grad_check(f, s, opt);
    INFO(rep.worst);
    CHECK(rep.pass);
    CHECK(rep.checked == 6);
}

TEST_CASE("total loss composition and weights") {
    std::mt19937_64 rng(31);
    std::vector<double> sv(2 * 9), yv(2 * 9);
    for (auto& v : sv) v = static_cast<double>(rng() % 2000) / 500.0 - 2.0;
    for (auto& v : yv) v = static_cast<double>(rng() % 2);
    yv[0] = 1.0;
    yv[9] = 1.0;
    Tensor logits = logits_from_score(sv, 2, 3, 3);
    Tensor y = Tensor::from({2, 3, 3}, yv);

    const double ce = cross_entropy(logits, y).item();
    const double dice = dice_loss(change_probability(logits), y).item();
    double lov = 0.0;
    for (int i = 0; i < 2; ++i)
        lov += lovasz_hinge(Tensor::from({9}, {sv.begin() + 9 * i, sv.begin() + 9 * (i + 1)}),
                            Tensor::from({9}, {yv.begin() + 9 * i, yv.begin() + 9 * (i + 1)}))
                   .item();
    lov /= 2.0;

    LossWeights def;
    CHECK(def.ce == 1.0);
    CHECK(def.lovasz == 0.5);
    CHECK(def.dice == 0.35);
    CHECK(total_loss(logits, y, def).item() ==
          doctest::Approx(1.0 * ce + 0.5 * lov + 0.35 * dice).epsilon(1e-12));

    CHECK(total_loss(logits, y, {1.0, 0.0, 0.0}).item() == doctest::Approx(ce).epsilon(1e-12));
    CHECK(total_loss(logits, y, {0.0, 0.0, 1.0}).item() == doctest::Approx(dice).epsilon(1e-12));
    CHECK(total_loss(logits, y, {0.0, 1.0, 0.0}).item() == doctest::Approx(lov).epsilon(1e-12));

    // batch-level lovasz differs from per-image in general
    const double whole = lovasz_hinge(Tensor::from({18}, sv), Tensor::from({18}, yv)).item();
    CHECK(total_loss(logits, y, {0.0, 1.0, 0.0}, false).item() ==
          doctest::Approx(whole).epsilon(1e-12));
}

TEST_CASE("total loss gradient check") {
    std::mt19937_64 rng(47);
    std::vector<double> yv(2 * 16, 0.0);
    for (auto& v : yv) v = static_cast<double>(rng() % 2);
    yv[3] = 1.0;
    yv[20] = 1.0;
    Tensor y = Tensor::from({2, 4, 4}, yv);
    Tensor logits = random_uniform({2, 2, 4, 4}, 91, -1.5, 1.5, true);
    auto f = [&](const Tensor& x) { return total_loss(x, y, LossWeights{}); };
    GradCheckOptions opt;
    opt.rtol = 1e-4;
    auto rep = grad_check(f, logits, opt);
    INFO(rep.worst);
    CHECK(rep.pass);
    CHECK(rep.checked + rep.skipped == logits.size());
    CHECK(rep.checked > rep.skipped);
}
