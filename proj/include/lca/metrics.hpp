#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "lca/error.hpp"
#include "lca/image.hpp"

namespace lca {

// 10 log10(1 / MSE) on [0, 1] values, capped at 99 so identical images give
// a finite number.
inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("psnr: images have different shapes");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data().size());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

// Fixed SSIM luma convention: for color images compare the weighted plane
// 0.26 r + 0.50 g + 0.10 b, for single-channel images the plane itself.
inline std::vector<double> luma_plane(const ImageBuffer& img) {
    std::vector<double> plane(img.pixel_count());
    if (img.channels() == 1) {
        plane.assign(img.data().begin(), img.data().end());
        return plane;
    }
    for (std::size_t i = 0; i < plane.size(); ++i)
        plane[i] = 0.26 * img.data()[3 * i] + 0.50 * img.data()[3 * i + 1] +
                   0.10 * img.data()[3 * i + 2];
    return plane;
}

inline std::array<double, 11> ssim_kernel() {
    std::array<double, 11> k{};
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-mode filtering; output is (h - 10) x (w - 10).
inline std::vector<double> filter_valid(const std::vector<double>& plane,
                                        std::size_t h, std::size_t w,
                                        const std::array<double, 11>& k) {
    const std::size_t ow = w - 10, oh = h - 10;
    std::vector<double> rows(h * ow);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int i = 0; i < 11; ++i) s += k[i] * plane[r * w + c + i];
            rows[r * ow + c] = s;
        }
    std::vector<double> out(oh * ow);
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int i = 0; i < 11; ++i) s += k[i] * rows[(r + i) * ow + c];
            out[r * ow + c] = s;
        }
    return out;
}

} // namespace detail

// Mean structural similarity over all fully covered 11 x 11 windows, with a
// sigma 1.5 Gaussian window, no border padding, and constants for a dynamic
// range of 1. Weighted moments carry no sample-size correction.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("ssim: images have different shapes");
    if (a.width() < 11 || a.height() < 11)
        throw TooSmall("ssim needs images at least 11 x 11");

    const std::vector<double> x = detail::luma_plane(a);
    const std::vector<double> y = detail::luma_plane(b);
    const std::size_t h = a.height(), w = a.width();
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }

    const auto k = detail::ssim_kernel();
    const auto mx = detail::filter_valid(x, h, w, k);
    const auto my = detail::filter_valid(y, h, w, k);
    const auto mxx = detail::filter_valid(xx, h, w, k);
    const auto myy = detail::filter_valid(yy, h, w, k);
    const auto mxy = detail::filter_valid(xy, h, w, k);

    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cov = mxy[i] - mx[i] * my[i];
        total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

// Per-channel 256-bin histogram overlap (sum of binwise minima of the
// normalized histograms), averaged over channels. Quantization matches the
// 8-bit writer, so a round-tripped image scores 1.
inline double histogram_match_score(const ImageBuffer& a, const ImageBuffer& b) {
    if (a.channels() != b.channels())
        throw ShapeMismatch("histogram_match_score: channel counts differ");
    double score = 0.0;
    for (std::size_t ch = 0; ch < a.channels(); ++ch) {
        std::array<double, 256> ha{}, hb{};
        for (std::size_t i = 0; i < a.pixel_count(); ++i)
            ha[detail::quantize_byte(a.data()[i * a.channels() + ch])] +=
                1.0 / static_cast<double>(a.pixel_count());
        for (std::size_t i = 0; i < b.pixel_count(); ++i)
            hb[detail::quantize_byte(b.data()[i * b.channels() + ch])] +=
                1.0 / static_cast<double>(b.pixel_count());
        for (int bin = 0; bin < 256; ++bin) score += std::min(ha[bin], hb[bin]);
    }
    return score / static_cast<double>(a.channels());
}

} // namespace lca
