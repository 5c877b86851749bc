// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
// Training losses and non-neural evaluation metrics.
//
// Images are in [0, 1]; depth maps in meters. Every loss has a value-only form and,
// where the fitter needs it, a form returning the gradient with respect to the
// predicted arrays.
#pragma once

#include "splat4d/image.hpp"

#include <optional>
#include <vector>

namespace splat4d {

inline constexpr double kDefaultDepthClamp = 10.0;
inline constexpr double kPsnrCap = 99.0;

struct LossWeights {
    double rgb = 1.0;
    double depth = 0.1;
    double rgb_diff = 1.0;
    double kl = 1e-3;
    double lambda1 = 0.5;  ///< weight of the T-frame term in the rgb loss
    double lambda2 = 0.5;  ///< weight of the T-frame term in the depth loss
    double depth_clamp = kDefaultDepthClamp;

    /// Throws DomainError unless every weight is >= 0 and lambda1, lambda2 <= 1.
    void validate() const;
};

struct LossParts {
    double rgb = 0.0;
    double depth = 0.0;
    double rgb_diff = 0.0;
    double kl = 0.0;
};

/// Diagonal Gaussian over a latent vector.
struct LatentGaussian {
    std::vector<double> mean;
    std::vector<double> stddev;

    std::size_t dimension() const { return mean.size(); }
};

/// Boolean mask, 1 byte per pixel.
using PixelMask = std::vector<unsigned char>;

// --- Value-only losses ----------------------------------------------------------

/// Mean absolute difference between the target and predicted temporal differences.
double loss_rgb_diff(const Image& future, const Image& input, const Image& future_pred, const Image& input_pred);

/// Perceptual surrogate D = mean L1 + (1 - SSIM) / 2.
double image_distance(const Image& target, const Image& pred);

/// lambda1 * D(a, a_pred) + (1 - lambda1) * D(b, b_pred).
double loss_rgb(const Image& a, const Image& a_pred, const Image& b, const Image& b_pred, double lambda1);

/// Mean over valid pixels of min(|D - D'| / D, clamp). Throws DomainError on an empty mask.
double mean_relative_error(const Image& truth, const Image& pred, double clamp, const PixelMask& valid);

/// lambda2 * MRE(a) + (1 - lambda2) * MRE(b).
double loss_depth(const Image& a, const Image& a_pred, const PixelMask& valid_a, const Image& b,
                  const Image& b_pred, const PixelMask& valid_b, double lambda2, double clamp);

/// KL(q || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2).
double kl_to_standard_normal(const LatentGaussian& q);

double total_loss(const LossParts& parts, const LossWeights& weights);

/// Mean SSIM over pixels and channels: 11x11 Gaussian window (sigma 1.5),
/// C1 = 0.01^2, C2 = 0.03^2. The window is truncated at the image border and renormalized.
double ssim(const Image& a, const Image& b);

/// Valid pixels: finite truth in (0, far_limit) and, when given, predicted alpha above alpha_floor.
PixelMask depth_valid_mask(const Image& truth, double far_limit, const Image* pred_alpha = nullptr,
                           double alpha_floor = 1e-3);

// --- Gradients with respect to predictions --------------------------------------

struct ValueAndGradient {
    double value = 0.0;
    std::vector<double> grad;  ///< same layout as the predicted image
};

ValueAndGradient ssim_with_gradient(const Image& target, const Image& pred);
ValueAndGradient image_distance_with_gradient(const Image& target, const Image& pred);
ValueAndGradient mean_relative_error_with_gradient(const Image& truth, const Image& pred, double clamp,
                                                   const PixelMask& valid);

struct RgbDiffGradient {
    double value = 0.0;
    std::vector<double> grad_future_pred;
    std::vector<double> grad_input_pred;
};

RgbDiffGradient loss_rgb_diff_with_gradient(const Image& future, const Image& input, const Image& future_pred,
                                            const Image& input_pred);

// --- Metrics ----------------------------------------------------------------------

struct MetricsRecord {
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> depth_mre;
};

/// PSNR with peak 1, capped at kPsnrCap for identical images.
double psnr(const Image& truth, const Image& pred);

/// Image metrics; depth MRE (clamped at kDefaultDepthClamp) when both depth maps are given.
MetricsRecord metrics(const Image& truth, const Image& pred, const Image* depth_truth = nullptr,
                      const Image* depth_pred = nullptr, double far_limit = 1e4);

}  // namespace splat4d
