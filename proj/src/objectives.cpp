// Copyright Contributors to the splat4d Project
// SPDX-License-Identifier: Apache-2.0
//
#include "splat4d/objectives.hpp"

#include "splat4d/error.hpp"

#include <array>
#include <cmath>
#include <string>

namespace splat4d {

namespace {

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::array<double, 2 * kSsimRadius + 1> ssim_kernel() {
    std::array<double, 2 * kSsimRadius + 1> k{};
    for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
        k[i + kSsimRadius] = std::exp(-(i * i) / (2.0 * kSsimSigma * kSsimSigma));
    }
    return k;
}

// Separable convolution with the (unnormalized) SSIM kernel, zero outside the image.
std::vector<double> blur(const std::vector<double>& in, int w, int h) {
    static const auto kernel = ssim_kernel();
    std::vector<double> tmp(in.size(), 0.0);
    std::vector<double> out(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < w) {
                    s += kernel[k + kSsimRadius] * in[static_cast<std::size_t>(y) * w + xx];
                }
            }
            tmp[static_cast<std::size_t>(y) * w + x] = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -kSsimRadius; k <= kSsimRadius; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < h) {
                    s += kernel[k + kSsimRadius] * tmp[static_cast<std::size_t>(yy) * w + x];
                }
            }
            out[static_cast<std::size_t>(y) * w + x] = s;
        }
    }
    return out;
}

std::vector<double> channel(const Image& img, int c) {
    std::vector<double> out(img.pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = img.data[i * img.channels + c];
    }
    return out;
}

struct SsimTerms {
    double mean = 0.0;
    std::vector<double> grad;
};

SsimTerms ssim_impl(const Image& a, const Image& b, bool with_grad) {
    require_same_shape(a, b, "ssim");
    const int w = a.width;
    const int h = a.height;
    const std::size_t n = a.pixel_count();
    const double norm = 1.0 / static_cast<double>(n * a.channels);

    const std::vector<double> ones(n, 1.0);
    const std::vector<double> Z = blur(ones, w, h);

    SsimTerms out;
    if (with_grad) {
        out.grad.assign(a.size(), 0.0);
    }
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        const auto x = channel(a, c);
        const auto y = channel(b, c);
        std::vector<double> xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = blur(x, w, h);
        const auto my = blur(y, w, h);
        const auto mxx = blur(xx, w, h);
        const auto myy = blur(yy, w, h);
        const auto mxy = blur(xy, w, h);

        std::vector<double> d_my, d_myy, d_mxy;
        if (with_grad) {
            d_my.assign(n, 0.0);
            d_myy.assign(n, 0.0);
            d_mxy.assign(n, 0.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double mu_x = mx[i] / Z[i];
            const double mu_y = my[i] / Z[i];
            const double var_x = mxx[i] / Z[i] - mu_x * mu_x;
            const double var_y = myy[i] / Z[i] - mu_y * mu_y;
            const double cov = mxy[i] / Z[i] - mu_x * mu_y;
            const double n1 = 2.0 * mu_x * mu_y + kSsimC1;
            const double n2 = 2.0 * cov + kSsimC2;
            const double d1 = mu_x * mu_x + mu_y * mu_y + kSsimC1;
            const double d2 = var_x + var_y + kSsimC2;
            const double f = (n1 * n2) / (d1 * d2);
            total += f;
            if (with_grad) {
                const double df_dmu = f * (2.0 * mu_x / n1 - 2.0 * mu_y / d1);
                const double df_dcov = f * 2.0 / n2;
                const double df_dvar = -f / d2;
                // Chain through the normalized moments, then divide by Z for the transpose blur.
                d_my[i] = (df_dmu - 2.0 * mu_y * df_dvar - mu_x * df_dcov) / Z[i];
                d_myy[i] = df_dvar / Z[i];
                d_mxy[i] = df_dcov / Z[i];
            }
        }
        if (with_grad) {
            const auto g_my = blur(d_my, w, h);
            const auto g_myy = blur(d_myy, w, h);
            const auto g_mxy = blur(d_mxy, w, h);
            for (std::size_t i = 0; i < n; ++i) {
                out.grad[i * a.channels + c] = norm * (g_my[i] + 2.0 * y[i] * g_myy[i] + x[i] * g_mxy[i]);
            }
        }
    }
    out.mean = total * norm;
    return out;
}

void require_mask(const Image& img, const PixelMask& mask, const std::string& what) {
    if (img.channels != 1 || mask.size() != img.pixel_count()) {
        throw ShapeError(what + ": depth map / mask shape mismatch");
    }
}

}  // namespace

void require_same_shape(const Image& a, const Image& b, const std::string& what) {
    if (!a.same_shape(b)) {
        throw ShapeError(what + ": image shapes differ (" + std::to_string(a.width) + "x" + std::to_string(a.height) +
                         "x" + std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height) + "x" + std::to_string(b.channels) + ")");
    }
}

void LossWeights::validate() const {
    for (const double w : {rgb, depth, rgb_diff, kl, lambda1, lambda2, depth_clamp}) {
        if (!(w >= 0.0)) {
            throw DomainError("loss weights must be non-negative");
        }
    }
    if (lambda1 > 1.0 || lambda2 > 1.0) {
        throw DomainError("lambda1 and lambda2 must lie in [0, 1]");
    }
}

double loss_rgb_diff(const Image& future, const Image& input, const Image& future_pred, const Image& input_pred) {
    return loss_rgb_diff_with_gradient(future, input, future_pred, input_pred).value;
}

RgbDiffGradient loss_rgb_diff_with_gradient(const Image& future, const Image& input, const Image& future_pred,
                                            const Image& input_pred) {
    require_same_shape(future, input, "loss_rgb_diff");
    require_same_shape(future, future_pred, "loss_rgb_diff");
    require_same_shape(future, input_pred, "loss_rgb_diff");
    RgbDiffGradient out;
    const std::size_t n = future.size();
    out.grad_future_pred.assign(n, 0.0);
    out.grad_input_pred.assign(n, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = (future_pred.data[i] - input_pred.data[i]) - (future.data[i] - input.data[i]);
        sum += std::abs(r);
        const double s = r > 0.0 ? inv_n : (r < 0.0 ? -inv_n : 0.0);
        out.grad_future_pred[i] = s;
        out.grad_input_pred[i] = -s;
    }
    out.value = sum * inv_n;
    return out;
}

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, false).mean; }

ValueAndGradient ssim_with_gradient(const Image& target, const Image& pred) {
    auto t = ssim_impl(target, pred, true);
    return {t.mean, std::move(t.grad)};
}

double image_distance(const Image& target, const Image& pred) {
    require_same_shape(target, pred, "image_distance");
    double l1 = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        l1 += std::abs(pred.data[i] - target.data[i]);
    }
    l1 /= static_cast<double>(target.size());
    return l1 + 0.5 * (1.0 - ssim(target, pred));
}

ValueAndGradient image_distance_with_gradient(const Image& target, const Image& pred) {
    require_same_shape(target, pred, "image_distance");
    auto s = ssim_with_gradient(target, pred);
    ValueAndGradient out;
    out.grad.assign(target.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(target.size());
    double l1 = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double r = pred.data[i] - target.data[i];
        l1 += std::abs(r);
        out.grad[i] = (r > 0.0 ? inv_n : (r < 0.0 ? -inv_n : 0.0)) - 0.5 * s.grad[i];
    }
    out.value = l1 * inv_n + 0.5 * (1.0 - s.value);
    return out;
}

double loss_rgb(const Image& a, const Image& a_pred, const Image& b, const Image& b_pred, double lambda1) {
    require_same_shape(a, a_pred, "loss_rgb");
    require_same_shape(b, b_pred, "loss_rgb");
    return lambda1 * image_distance(a, a_pred) + (1.0 - lambda1) * image_distance(b, b_pred);
}

PixelMask depth_valid_mask(const Image& truth, double far_limit, const Image* pred_alpha, double alpha_floor) {
    PixelMask mask(truth.pixel_count(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double d = truth.data[i];
        bool ok = std::isfinite(d) && d > 0.0 && d < far_limit;
        if (ok && pred_alpha != nullptr) {
            ok = pred_alpha->data[i] > alpha_floor;
        }
        mask[i] = ok ? 1 : 0;
    }
    return mask;
}

ValueAndGradient mean_relative_error_with_gradient(const Image& truth, const Image& pred, double clamp,
                                                   const PixelMask& valid) {
    require_same_shape(truth, pred, "mean_relative_error");
    require_mask(truth, valid, "mean_relative_error");
    std::size_t count = 0;
    for (const unsigned char m : valid) {
        count += m != 0;
    }
    if (count == 0) {
        throw DomainError("mean_relative_error: empty valid mask");
    }
    ValueAndGradient out;
    out.grad.assign(truth.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(count);
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!valid[i]) {
            continue;
        }
        const double d = truth.data[i];
        if (!(d > 0.0)) {
            throw DomainError("mean_relative_error: ground-truth depth must be positive on the valid mask");
        }
        const double r = pred.data[i] - d;
        const double rel = std::abs(r) / d;
        if (rel >= clamp) {
            sum += clamp;
            continue;
        }
        sum += rel;
        out.grad[i] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * inv / d;
    }
    out.value = sum * inv;
    return out;
}

double mean_relative_error(const Image& truth, const Image& pred, double clamp, const PixelMask& valid) {
    return mean_relative_error_with_gradient(truth, pred, clamp, valid).value;
}

double loss_depth(const Image& a, const Image& a_pred, const PixelMask& valid_a, const Image& b, const Image& b_pred,
                  const PixelMask& valid_b, double lambda2, double clamp) {
    return lambda2 * mean_relative_error(a, a_pred, clamp, valid_a) +
           (1.0 - lambda2) * mean_relative_error(b, b_pred, clamp, valid_b);
}

double kl_to_standard_normal(const LatentGaussian& q) {
    if (q.mean.size() != q.stddev.size()) {
        throw ShapeError("kl_to_standard_normal: mean and stddev differ in dimension");
    }
    double kl = 0.0;
    for (std::size_t d = 0; d < q.mean.size(); ++d) {
        const double s = q.stddev[d];
        if (!(s > 0.0)) {
            throw DomainError("kl_to_standard_normal: standard deviations must be positive");
        }
        const double var = s * s;
        kl += q.mean[d] * q.mean[d] + var - 1.0 - std::log(var);
    }
    return 0.5 * kl;
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
    return weights.rgb * parts.rgb + weights.depth * parts.depth + weights.rgb_diff * parts.rgb_diff +
           weights.kl * parts.kl;
}

double psnr(const Image& truth, const Image& pred) {
    require_same_shape(truth, pred, "psnr");
    // Neumaier summation keeps the mean exact to rounding for uniform errors.
    double sum = 0.0;
    double carry = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double r = truth.data[i] - pred.data[i];
        const double v = r * r;
        const double t = sum + v;
        carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    const double mse = (sum + carry) / static_cast<double>(truth.size());
    if (mse == 0.0) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

MetricsRecord metrics(const Image& truth, const Image& pred, const Image* depth_truth, const Image* depth_pred,
                      double far_limit) {
    MetricsRecord r;
    r.psnr = psnr(truth, pred);
    r.ssim = ssim(truth, pred);
    if (depth_truth != nullptr && depth_pred != nullptr) {
        PixelMask valid = depth_valid_mask(*depth_truth, far_limit);
        for (std::size_t i = 0; i < valid.size(); ++i) {
            const double p = depth_pred->data[i];
            valid[i] = valid[i] && std::isfinite(p) && p < far_limit;
        }
        bool any = false;
        for (const unsigned char m : valid) {
            any = any || m != 0;
        }
        if (any) {
            r.depth_mre = mean_relative_error(*depth_truth, *depth_pred, kDefaultDepthClamp, valid);
        }
    }
    return r;
}

}  // namespace splat4d
