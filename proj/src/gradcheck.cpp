#include "stcd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace stcd {

Tensor random_uniform(Shape shape, uint64_t seed, double lo, double hi, bool requires_grad) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> data(static_cast<size_t>(numel(shape)));
    for (auto& v : data) v = dist(rng);
    return Tensor::from(std::move(shape), std::move(data), requires_grad);
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           const GradCheckOptions& opts) {
    GradCheckReport rep;

    // analytic gradient
    Tensor leaf = Tensor::from(x.shape(), x.data(), true);
    std::vector<double> analytic;
    {
        Tape tape;
        Tensor y = f(leaf);
        if (y.size() != 1) throw Error("grad_check: f must produce a scalar");
        tape.backward(y);
        analytic = leaf.grad();
    }

    auto eval = [&](const std::vector<double>& vals) {
        Tensor t = Tensor::from(x.shape(), vals, false);
        Tensor y = f(t);
        return y.item();
    };

    std::vector<int64_t> coords(static_cast<size_t>(x.size()));
    std::iota(coords.begin(), coords.end(), 0);
    if (opts.max_coords > 0 && opts.max_coords < static_cast<int>(coords.size())) {
        std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ull);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(static_cast<size_t>(opts.max_coords));
    }

    std::vector<double> vals = x.data();
    const double h = opts.step;
    const double f0 = eval(vals);
    for (int64_t ci : coords) {
        const double orig = vals[static_cast<size_t>(ci)];
        vals[static_cast<size_t>(ci)] = orig + h;
        const double fp = eval(vals);
        vals[static_cast<size_t>(ci)] = orig - h;
        const double fm = eval(vals);
        vals[static_cast<size_t>(ci)] = orig;

        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            rep.pass = false;
            rep.worst = "non-finite value at coordinate " + std::to_string(ci);
            return rep;
        }

        // one-sided slopes disagreeing marks a kink; skip it
        const double right = (fp - f0) / h;
        const double left = (f0 - fm) / h;
        const double slope_scale = std::max({1.0, std::fabs(left), std::fabs(right)});
        if (std::fabs(right - left) > 1e-3 * slope_scale) {
            ++rep.skipped;
            continue;
        }

        const double fd = (fp - fm) / (2.0 * h);
        const double ad = analytic[static_cast<size_t>(ci)];
        const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-6});
        const double rel = std::fabs(fd - ad) / denom;
        ++rep.checked;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            std::ostringstream os;
            os << "coord " << ci << ": fd=" << fd << " autodiff=" << ad;
            rep.worst = os.str();
        }
    }
    rep.pass = rep.max_rel_err <= opts.rtol;
    return rep;
}

}  // namespace stcd
