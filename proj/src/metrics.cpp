#include "stcd/metrics.hpp"

#include <cstdio>

namespace stcd {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

ConfusionCounts confusion(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& truth) {
    if (pred.size() != truth.size())
        throw DimensionError("confusion: mask sizes differ (" + std::to_string(pred.size()) +
                             " vs " + std::to_string(truth.size()) + ")");
    ConfusionCounts c;
    for (size_t i = 0; i < pred.size(); ++i) {
        const uint8_t p = pred[i], t = truth[i];
        if (p > 1 || t > 1) throw DataError("confusion: masks must be 0/1");
        if (p && t)
            ++c.tp;
        else if (p && !t)
            ++c.fp;
        else if (!p && t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

Metrics compute_metrics(const ConfusionCounts& c) {
    if (c.tp < 0 || c.fp < 0 || c.fn < 0 || c.tn < 0)
        throw DimensionError("compute_metrics: negative counts");
    const double total = static_cast<double>(c.total());
    if (total == 0.0) throw DimensionError("compute_metrics: empty confusion counts");

    Metrics m;
    auto ratio = [&m](double num, double den) {
        if (den == 0.0) {
            m.degenerate = true;
            return 0.0;
        }
        return num / den;
    };
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    m.iou = ratio(tp, tp + fp + fn);
    m.oa = (tp + tn) / total;
    const double pe = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (total * total);
    m.kappa = ratio(m.oa - pe, 1.0 - pe);
    return m;
}

std::string metrics_csv_header() { return "pre,rec,f1,iou,oa,kc"; }

std::string metrics_csv_row(const Metrics& m) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f,%.2f,%.2f,%.2f,%.2f", 100.0 * m.precision,
                  100.0 * m.recall, 100.0 * m.f1, 100.0 * m.iou, 100.0 * m.oa, 100.0 * m.kappa);
    return buf;
}

}  // namespace stcd
