#include "stcd/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stcd {

namespace {

void check_label(const Tensor& pred, const Tensor& label) {
    if (label.size() != pred.size())
        throw DimensionError("loss: label size " + shape_str(label.shape()) +
                             " does not match prediction " + shape_str(pred.shape()));
    for (double v : label.data())
        if (v != 0.0 && v != 1.0) throw DataError("loss: labels must be 0/1");
}

}  // namespace

Tensor change_score(const Tensor& logits) {
    if (logits.rank() != 4 || logits.dim(1) != 2)
        throw DimensionError("change_score: expected (N,2,H,W), got " + shape_str(logits.shape()));
    Tensor s = sub(slice(logits, 1, 1, 1), slice(logits, 1, 0, 1));
    return reshape(s, {logits.dim(0), logits.dim(2), logits.dim(3)});
}

Tensor change_probability(const Tensor& logits) { return sigmoid(change_score(logits)); }

Tensor cross_entropy(const Tensor& logits, const Tensor& label, double eps) {
    Tensor p = clamp(change_probability(logits), eps, 1.0 - eps);
    check_label(p, label);
    Tensor y = reshape(label, p.shape());
    Tensor ll = add(mul(y, log(p)), mul(sub(1.0, y), log(sub(1.0, p))));
    return neg(mean(ll));
}

Tensor dice_loss(const Tensor& prob, const Tensor& label, double smooth) {
    check_label(prob, label);
    Tensor y = reshape(label, prob.shape());
    Tensor inter = sum(mul(y, prob));
    Tensor denom = add(sum(y), sum(prob));
    return sub(1.0, div(add(mul(inter, 2.0), smooth), add(denom, smooth)));
}

Tensor lovasz_hinge(const Tensor& scores, const Tensor& label) {
    check_label(scores, label);
    const auto& s = scores.data();
    const std::vector<double> y = label.data();
    const size_t p = s.size();

    double pos = 0.0;
    for (double v : y) pos += v;
    if (pos == 0.0) return mul(sum(scores), 0.0);  // keeps the graph connected

    // hinge errors e_i = max(0, 1 - s_i * sign_i), sign = 2y - 1
    std::vector<double> err(p);
    for (size_t i = 0; i < p; ++i) err[i] = std::max(0.0, 1.0 - s[i] * (2.0 * y[i] - 1.0));

    // descending by error, ties by original index
    std::vector<size_t> order(p);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return err[a] > err[b]; });

    // gradient of the Lovasz extension of the Jaccard loss along the sorted order
    std::vector<double> g(p);
    double inter = pos, uni = pos, prev = 0.0;
    for (size_t k = 0; k < p; ++k) {
        const double yk = y[order[k]];
        inter -= yk;
        uni += 1.0 - yk;
        const double jac = 1.0 - inter / uni;
        g[k] = jac - prev;
        prev = jac;
    }

    double loss = 0.0;
    for (size_t k = 0; k < p; ++k) loss += err[order[k]] * g[k];

    // dL/ds_i = -sign_i * g_rank(i) where the hinge is active; the sort is
    // treated as locally constant.
    std::vector<double> ds(p, 0.0);
    for (size_t k = 0; k < p; ++k) {
        const size_t i = order[k];
        if (err[i] > 0.0) ds[i] = -(2.0 * y[i] - 1.0) * g[k];
    }
    return make_op("lovasz_hinge", {1}, {loss}, {scores}, [scores, ds](TensorNode& n) {
        if (!scores.requires_grad()) return;
        scores.node()->ensure_grad();
        auto& gr = scores.node()->grad;
        for (size_t i = 0; i < ds.size(); ++i) gr[i] += n.grad[0] * ds[i];
    });
}

Tensor total_loss(const Tensor& logits, const Tensor& label, const LossWeights& w,
                  bool per_image_lovasz) {
    Tensor score = change_score(logits);
    Tensor prob = sigmoid(score);
    check_label(prob, label);
    Tensor y = reshape(label, score.shape());

    Tensor loss = mul(cross_entropy(logits, label), w.ce);

    if (w.lovasz != 0.0) {
        Tensor lov;
        if (per_image_lovasz) {
            const int n = score.dim(0);
            for (int i = 0; i < n; ++i) {
                Tensor li = lovasz_hinge(slice(score, 0, i, 1), slice(y, 0, i, 1));
                lov = lov.defined() ? add(lov, li) : li;
            }
            lov = div(lov, static_cast<double>(n));
        } else {
            lov = lovasz_hinge(score, y);
        }
        loss = add(loss, mul(lov, w.lovasz));
    }

    if (w.dice != 0.0) loss = add(loss, mul(dice_loss(prob, y), w.dice));
    return loss;
}

}  // namespace stcd
