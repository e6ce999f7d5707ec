#pragma once

#include "stcd/tensor.hpp"

namespace stcd {

struct LossWeights {
    double ce = 1.0;
    double lovasz = 0.5;
    double dice = 0.35;
};

// Change-class score s = logit_change - logit_nochange, shape (N, H, W).
// For two classes, softmax P(change) == sigmoid(s).
Tensor change_score(const Tensor& logits);
Tensor change_probability(const Tensor& logits);

// Binary cross entropy on P(change), probabilities clamped to [eps, 1-eps].
Tensor cross_entropy(const Tensor& logits, const Tensor& label, double eps = 1e-7);

// 1 - (2 sum(y p) + smooth) / (sum y + sum p + smooth); empty-empty -> 0.
Tensor dice_loss(const Tensor& prob, const Tensor& label, double smooth = 1e-6);

// Binary Lovasz hinge on the change-class scores of one flattened instance.
// All-background ground truth returns 0.
Tensor lovasz_hinge(const Tensor& scores, const Tensor& label);

// ce * CE + lovasz * Lovasz + dice * Dice. Lovasz averaged per image when
// per_image is set, otherwise computed over the flattened batch.
Tensor total_loss(const Tensor& logits, const Tensor& label, const LossWeights& w,
                  bool per_image_lovasz = true);

}  // namespace stcd
