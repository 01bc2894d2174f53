#pragma once

#include <cstdint>

#include "dcv/ops.hpp"

namespace dcv {

// Per-pixel SSIM map (N x C x H x W) with a Gaussian window of odd `window`
// size and sigma 1.5, C1 = (0.01 max_val)^2, C2 = (0.03 max_val)^2, reflect
// border.
Var ssim(const Var& x, const Var& y, std::int64_t window = 11, double max_val = 1.0);
// mean((1 - SSIM) / 2)
Var ssim_loss(const Var& x, const Var& y, std::int64_t window = 11, double max_val = 1.0);

// 10 log10(max_val^2 / MSE) in dB; +inf when the images are equal.
Var psnr(const Var& x, const Var& y, double max_val = 1.0);

// Anisotropic total variation summed over batch, channels and pixels.
Var total_variation(const Var& img);

// pred: N x K x H x W class probabilities; target: N x H x W class ids.
// 1 - mean_k (TP_k + eps) / (TP_k + alpha FP_k + beta FN_k + eps), eps = 1e-6,
// counts summed over the batch.
Var tversky_loss(const Var& pred, const Tensor& target, double alpha, double beta);
Var dice_loss(const Var& pred, const Tensor& target);

// mean of -alpha (1 - p_t)^gamma log p_t with p = softmax(logits) over dim 1.
Var focal_loss(const Var& logits, const Tensor& target, double gamma, double alpha = 1.0);

// Divergences between distributions laid out along the last axis, averaged
// over the remaining axes. Inputs must be non-negative and sum to 1 (1e-6).
Var kl_div(const Var& p, const Var& q);
Var js_div(const Var& p, const Var& q);

// alpha mean|I - R| + (1 - alpha) mean|sobel(I) - sobel(R)|
Var edge_aware_recon_loss(const Var& img, const Var& recon, double alpha);

// mean over pixels of |dx d| exp(-|dx I|_1) + |dy d| exp(-|dy I|_1) with
// forward differences (zero past the last row / column) and the L1 norm
// taken over image channels.
Var smoothness_loss(const Var& depth, const Var& img);

// alpha ssim_loss + (1 - alpha) mean|I_ref - warped| + lambda smoothness(depth, I_ref)
Var multiview_photo_loss(const Var& img_ref, const Var& warped, const Var& depth, double alpha,
                         double lambda);

}  // namespace dcv
