#include "dcv/losses.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "dcv/filters.hpp"
#include "kernels.hpp"

namespace dcv {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

// Forward difference along `dim` (2 = rows, 3 = columns), zero in the last slot.
Var forward_diff(const Var& x, int dim) {
  const std::int64_t n = x.size(dim);
  if (n < 2) return Var(Tensor(x.shape(), x.dtype()));
  const Var d = narrow(x, dim, 1, n - 1) - narrow(x, dim, 0, n - 1);
  Shape zs = x.shape();
  zs[static_cast<std::size_t>(dim)] = 1;
  return concat({d, Var(Tensor(zs, x.dtype()))}, dim);
}

// One-hot N x K x H x W mask from N x H x W ids; throws for ids outside [0, K).
Tensor one_hot(const Tensor& target, std::int64_t n, std::int64_t k, std::int64_t h,
               std::int64_t w, DType dtype) {
  if (target.shape() != Shape{n, h, w}) {
    throw ShapeError("target must be N x H x W, got " + to_string(target.shape()));
  }
  Tensor m(Shape{n, k, h, w}, dtype);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t i = 0; i < h * w; ++i) {
      const double id = target.at(b * h * w + i);
      if (!(id >= 0) || id >= static_cast<double>(k) || id != std::floor(id)) {
        throw ParameterError("class id " + std::to_string(id) + " outside [0, " + std::to_string(k) + ")");
      }
      m.set((b * k + static_cast<std::int64_t>(id)) * h * w + i, 1.0);
    }
  return m;
}

void require_distribution(const Var& p, const char* op) {
  const Tensor& v = p.value();
  const std::int64_t last = v.size(-1);
  for (std::int64_t r = 0; r < v.numel() / last; ++r) {
    double s = 0;
    for (std::int64_t i = 0; i < last; ++i) {
      const double x = v.at(r * last + i);
      if (!(x >= -1e-6)) throw ParameterError(std::string(op) + ": negative probability");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-6) throw ParameterError(std::string(op) + ": distribution does not sum to 1");
  }
}

Var kl_terms(const Var& p, const Var& q) {
  const Var tiny(Tensor::scalar(1e-300, p.dtype()));
  const Var floor_q(Tensor::scalar(1e-12, q.dtype()));
  // p log p -> 0 as p -> 0; the floor keeps log finite and the product exact.
  return p * (log(maximum(p, tiny)) - log(maximum(q, floor_q)));
}

Var kl_reduce(const Var& terms) {
  return mean(sum(terms, {terms.ndim() - 1}));
}

}  // namespace

Var ssim(const Var& x, const Var& y, std::int64_t window, double max_val) {
  require_same_shape(x, y, "ssim");
  kernels::require_4d(x, "ssim");
  if (!(max_val > 0)) throw ParameterError("ssim: max_val must be positive");
  const double c1 = (0.01 * max_val) * (0.01 * max_val);
  const double c2 = (0.03 * max_val) * (0.03 * max_val);
  auto blur = [window](const Var& v) { return gaussian_blur2d(v, window, window, 1.5, 1.5); };
  const Var mx = blur(x), my = blur(y);
  const Var mx2 = mx * mx, my2 = my * my, mxy = mx * my;
  const Var sx = blur(x * x) - mx2, sy = blur(y * y) - my2, sxy = blur(x * y) - mxy;
  return ((2.0 * mxy + c1) * (2.0 * sxy + c2)) / ((mx2 + my2 + c1) * (sx + sy + c2));
}

Var ssim_loss(const Var& x, const Var& y, std::int64_t window, double max_val) {
  return mean((1.0 - ssim(x, y, window, max_val)) * 0.5);
}

Var psnr(const Var& x, const Var& y, double max_val) {
  require_same_shape(x, y, "psnr");
  if (!(max_val > 0)) throw ParameterError("psnr: max_val must be positive");
  const Var mse = mean(square(x - y));
  if (mse.item() == 0.0) return Var(Tensor::scalar(std::numeric_limits<double>::infinity(), x.dtype()));
  return (10.0 / std::numbers::ln10) * (std::log(max_val * max_val) - log(mse));
}

Var total_variation(const Var& img) {
  kernels::require_4d(img, "total_variation");
  Var tv(Tensor::scalar(0.0, img.dtype()));
  const std::int64_t h = img.size(2), w = img.size(3);
  if (h > 1) tv = tv + sum(abs(narrow(img, 2, 1, h - 1) - narrow(img, 2, 0, h - 1)));
  if (w > 1) tv = tv + sum(abs(narrow(img, 3, 1, w - 1) - narrow(img, 3, 0, w - 1)));
  return tv;
}

Var tversky_loss(const Var& pred, const Tensor& target, double alpha, double beta) {
  kernels::require_4d(pred, "tversky_loss");
  if (alpha < 0 || beta < 0) throw ParameterError("tversky_loss: alpha and beta must be >= 0");
  constexpr double kEps = 1e-6;
  const std::int64_t n = pred.size(0), k = pred.size(1), h = pred.size(2), w = pred.size(3);
  const Var onehot(one_hot(target, n, k, h, w, pred.dtype()));
  const Var tp = sum(pred * onehot, {0, 2, 3});
  const Var fp = sum(pred * (1.0 - onehot), {0, 2, 3});
  const Var fn = sum((1.0 - pred) * onehot, {0, 2, 3});
  return 1.0 - mean((tp + kEps) / (tp + alpha * fp + beta * fn + kEps));
}

Var dice_loss(const Var& pred, const Tensor& target) { return tversky_loss(pred, target, 0.5, 0.5); }

Var focal_loss(const Var& logits, const Tensor& target, double gamma, double alpha) {
  kernels::require_4d(logits, "focal_loss");
  if (gamma < 0) throw ParameterError("focal_loss: gamma must be >= 0");
  const std::int64_t n = logits.size(0), k = logits.size(1), h = logits.size(2), w = logits.size(3);
  const Var onehot(one_hot(target, n, k, h, w, logits.dtype()));
  const Var shifted = logits - detach(max(logits, 1, true));
  const Var log_p = shifted - log(sum(exp(shifted), {1}, true));
  const Var log_pt = sum(log_p * onehot, {1});
  Var weight(Tensor::scalar(alpha, logits.dtype()));
  if (gamma != 0.0) weight = alpha * pow(1.0 - exp(log_pt), gamma);
  return mean(-(weight * log_pt));
}

Var kl_div(const Var& p, const Var& q) {
  require_same_shape(p, q, "kl_div");
  require_distribution(p, "kl_div");
  require_distribution(q, "kl_div");
  return kl_reduce(kl_terms(p, q));
}

Var js_div(const Var& p, const Var& q) {
  require_same_shape(p, q, "js_div");
  require_distribution(p, "js_div");
  require_distribution(q, "js_div");
  const Var m = (p + q) * 0.5;
  return 0.5 * kl_reduce(kl_terms(p, m)) + 0.5 * kl_reduce(kl_terms(q, m));
}

Var edge_aware_recon_loss(const Var& img, const Var& recon, double alpha) {
  require_same_shape(img, recon, "edge_aware_recon_loss");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("edge_aware_recon_loss: alpha must be in [0, 1]");
  return alpha * mean(abs(img - recon)) + (1.0 - alpha) * mean(abs(sobel_edges(img) - sobel_edges(recon)));
}

Var smoothness_loss(const Var& depth, const Var& img) {
  kernels::require_4d(depth, "smoothness_loss");
  kernels::require_4d(img, "smoothness_loss");
  if (depth.size(0) != img.size(0) || depth.size(2) != img.size(2) || depth.size(3) != img.size(3)) {
    throw ShapeError("smoothness_loss: depth and image sizes differ");
  }
  const Var wx = exp(-sum(abs(forward_diff(img, 3)), {1}, true));
  const Var wy = exp(-sum(abs(forward_diff(img, 2)), {1}, true));
  return mean(abs(forward_diff(depth, 3)) * wx + abs(forward_diff(depth, 2)) * wy);
}

Var multiview_photo_loss(const Var& img_ref, const Var& warped, const Var& depth, double alpha,
                         double lambda) {
  require_same_shape(img_ref, warped, "multiview_photo_loss");
  return alpha * ssim_loss(img_ref, warped) + (1.0 - alpha) * mean(abs(img_ref - warped)) +
         lambda * smoothness_loss(depth, img_ref);
}

}  // namespace dcv
