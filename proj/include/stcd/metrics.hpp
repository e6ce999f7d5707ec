#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stcd/tensor.hpp"

namespace stcd {

struct ConfusionCounts {
    int64_t tp = 0;
    int64_t fp = 0;
    int64_t fn = 0;
    int64_t tn = 0;

    int64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o);
};

// pred/truth are 0/1 masks of equal length.
ConfusionCounts confusion(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& truth);

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double iou = 0.0;
    double oa = 0.0;
    double kappa = 0.0;
    bool degenerate = false;  // some ratio had a zero denominator
};

// Throws DimensionError when total() == 0.
Metrics compute_metrics(const ConfusionCounts& c);

// "pre,rec,f1,iou,oa,kc" as percentages with 2 decimals.
std::string metrics_csv_header();
std::string metrics_csv_row(const Metrics& m);

}  // namespace stcd
