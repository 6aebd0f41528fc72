#pragma once

#include <cmath>

#include "lca/error.hpp"
#include "lca/image.hpp"

namespace lca {

// Global luminance curve v -> gain * v^gamma, clipped back into [0, 1].
inline ImageBuffer apply_luminance_curve(const ImageBuffer& img, double gain,
                                         double gamma) {
    if (!(gain > 0.0) || !(gamma > 0.0))
        throw DegenerateData("apply_luminance_curve: gain and gamma must be positive");
    ImageBuffer out(img.width(), img.height(), img.channels());
    for (std::size_t r = 0; r < img.height(); ++r)
        for (std::size_t c = 0; c < img.width(); ++c)
            for (std::size_t ch = 0; ch < img.channels(); ++ch)
                out.set(r, c, ch, gain * std::pow(img.at(r, c, ch), gamma));
    return out;
}

struct SynthPair {
    ImageBuffer ground_truth;
    ImageBuffer degraded;
};

// A smooth color scene around warm base levels beta, degraded by the
// luminance curve above. The per-channel modulation amplitudes are chosen
// proportional to phi(beta_c) / phi'(beta_c) with phi(t) = t - gain * t^gamma,
// which is the first-order condition for the pixel differences gt - degraded
// to vary along (approximately) a single non-gray direction: the mean
// difference phi(beta) and its derivative along the modulation line up.
// Faint high-frequency per-channel textures keep the off-direction variance
// nonzero without breaking the near-rank-1 structure. Base levels stay away
// from the curve's clipping point (gain * t^gamma = 1) so the difference is
// smooth everywhere.
inline SynthPair synthesize_pair(std::size_t width, std::size_t height,
                                 double gain = 1.4, double gamma = 1.2) {
    if (width < 2 || height < 2)
        throw TooSmall("synthesize_pair needs at least a 2 x 2 image");
    if (!(gain > 0.0) || !(gamma > 0.0))
        throw DegenerateData("synthesize_pair: gain and gamma must be positive");

    const double beta[3] = {0.60, 0.40, 0.20};
    double alpha[3];
    for (int c = 0; c < 3; ++c) {
        const double phi = beta[c] - gain * std::pow(beta[c], gamma);
        const double dphi = 1.0 - gain * gamma * std::pow(beta[c], gamma - 1.0);
        if (std::fabs(dphi) < 1e-9)
            throw DegenerateData("synthesize_pair: amplitude normalization degenerates");
        alpha[c] = 1.05 * phi / dphi;
    }

    const double tau = 8.0 * std::atan(1.0);
    ImageBuffer gt(width, height, 3);
    for (std::size_t row = 0; row < height; ++row) {
        const double y = static_cast<double>(row) / static_cast<double>(height - 1);
        for (std::size_t col = 0; col < width; ++col) {
            const double x = static_cast<double>(col) / static_cast<double>(width - 1);
            const double u = 0.40 * (0.6 * std::sin(tau * (1.3 * x + 0.7 * y)) +
                                     0.4 * std::cos(tau * (0.9 * x - 1.7 * y + 0.25)));
            double v[3] = {beta[0] + alpha[0] * u, beta[1] + alpha[1] * u,
                           beta[2] + alpha[2] * u};
            v[0] += 0.0008 * std::sin(tau * (5.0 * x + 2.0 * y));
            v[1] += 0.0008 * std::sin(tau * (3.0 * x - 4.0 * y + 0.5));
            v[2] += 0.0008 * std::cos(tau * (2.0 * x + 6.0 * y + 0.1));
            for (int ch = 0; ch < 3; ++ch) gt.set(row, col, ch, v[ch]);
        }
    }
    SynthPair pair{gt, apply_luminance_curve(gt, gain, gamma)};
    return pair;
}

} // namespace lca
