#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "lca/metrics.hpp"
#include "lca/rng.hpp"

using Catch::Approx;
using namespace lca;

namespace {

ImageBuffer flat(std::size_t w, std::size_t h, std::size_t c, double v) {
    ImageBuffer img(w, h, c);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t col = 0; col < w; ++col)
            for (std::size_t ch = 0; ch < c; ++ch) img.set(r, col, ch, v);
    return img;
}

ImageBuffer random_gray(std::uint64_t seed, std::size_t w, std::size_t h) {
    Rng rng(seed);
    ImageBuffer img(w, h, 1);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) img.set(r, c, 0, rng.uniform());
    return img;
}

// direct per-window SSIM, written independently of the library's separable
// filtering: explicit 2D Gaussian weights and one pass per window
double ssim_ref(const ImageBuffer& a, const ImageBuffer& b) {
    const std::size_t h = a.height(), w = a.width();
    double kernel1d[11];
    double ksum = 0.0;
    for (int i = 0; i < 11; ++i) {
        kernel1d[i] = std::exp(-((i - 5.0) * (i - 5.0)) / (2.0 * 2.25));
        ksum += kernel1d[i];
    }
    for (double& v : kernel1d) v /= ksum;

    auto luma = [](const ImageBuffer& img, std::size_t r, std::size_t c) {
        if (img.channels() == 1) return img.at(r, c, 0);
        return 0.26 * img.at(r, c, 0) + 0.50 * img.at(r, c, 1) +
               0.10 * img.at(r, c, 2);
    };

    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t r = 0; r + 11 <= h; ++r)
        for (std::size_t c = 0; c + 11 <= w; ++c) {
            double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double wgt = kernel1d[i] * kernel1d[j];
                    const double x = luma(a, r + i, c + j);
                    const double y = luma(b, r + i, c + j);
                    mx += wgt * x;
                    my += wgt * y;
                    mxx += wgt * x * x;
                    myy += wgt * y * y;
                    mxy += wgt * x * y;
                }
            const double vx = mxx - mx * mx, vy = myy - my * my;
            const double cov = mxy - mx * my;
            total += ((2 * mx * my + 1e-4) * (2 * cov + 9e-4)) /
                     ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
            ++windows;
        }
    return total / static_cast<double>(windows);
}

} // namespace

TEST_CASE("psnr matches hand values and caps at 99") {
    const ImageBuffer a = flat(4, 4, 1, 0.3);
    const ImageBuffer b = flat(4, 4, 1, 0.4);
    // uniform 0.1 error: MSE 0.01, 10 log10(100) = 20
    REQUIRE(psnr(a, b) == Approx(20.0).margin(1e-9));
    REQUIRE(psnr(a, a) == 99.0);

    ImageBuffer c = a;
    c.set(0, 0, 0, 0.3 + 1e-7); // tiny error lands above the cap
    REQUIRE(psnr(a, c) == 99.0);
    REQUIRE_THROWS_AS(psnr(a, flat(5, 4, 1, 0.0)), ShapeMismatch);
}

TEST_CASE("ssim of an image with itself is exactly one") {
    const ImageBuffer img = random_gray(61, 16, 13);
    REQUIRE(ssim(img, img) == 1.0);
}

TEST_CASE("ssim of constant planes has a closed form") {
    // zero variances leave (2 m1 m2 + c1) / (m1^2 + m2^2 + c1)
    const ImageBuffer a = flat(11, 11, 1, 0.3);
    const ImageBuffer b = flat(11, 11, 1, 0.7);
    const double expected = (2.0 * 0.3 * 0.7 + 1e-4) / (0.09 + 0.49 + 1e-4);
    REQUIRE(ssim(a, b) == Approx(expected).margin(1e-9));
}

TEST_CASE("ssim agrees with a direct per-window reference") {
    const ImageBuffer a = random_gray(71, 17, 14);
    ImageBuffer b = a;
    Rng rng(72);
    for (std::size_t r = 0; r < b.height(); ++r)
        for (std::size_t c = 0; c < b.width(); ++c)
            b.set(r, c, 0, b.at(r, c, 0) + rng.uniform(-0.08, 0.08));
    REQUIRE(ssim(a, b) == Approx(ssim_ref(a, b)).margin(1e-12));
    REQUIRE(ssim(a, b) < 1.0);
}

TEST_CASE("ssim compares color images through their luma") {
    Rng rng(73);
    ImageBuffer a(12, 12, 3);
    for (std::size_t r = 0; r < 12; ++r)
        for (std::size_t c = 0; c < 12; ++c) {
            a.set(r, c, 0, rng.uniform(0.3, 0.5));
            a.set(r, c, 1, rng.uniform(0.3, 0.5));
            a.set(r, c, 2, rng.uniform(0.3, 0.5));
        }
    // move red against blue so 0.26 r + 0.10 b is unchanged
    ImageBuffer b = a;
    for (std::size_t r = 0; r < 12; ++r)
        for (std::size_t c = 0; c < 12; ++c) {
            b.set(r, c, 0, a.at(r, c, 0) + 0.05);
            b.set(r, c, 2, a.at(r, c, 2) - 0.05 * 0.26 / 0.10);
        }
    REQUIRE(ssim(a, b) == Approx(1.0).margin(1e-9));
    REQUIRE(psnr(a, b) < 99.0);
}

TEST_CASE("ssim needs a full window") {
    const ImageBuffer small = flat(10, 12, 1, 0.5);
    REQUIRE_THROWS_AS(ssim(small, small), TooSmall);
}

TEST_CASE("histogram_match_score counts bin overlap") {
    const ImageBuffer a = random_gray(81, 9, 9);
    REQUIRE(histogram_match_score(a, a) == Approx(1.0));

    // disjoint histograms
    REQUIRE(histogram_match_score(flat(4, 4, 1, 0.0), flat(4, 4, 1, 1.0)) == 0.0);

    // half the mass overlaps; sizes may differ
    ImageBuffer half(4, 2, 1);
    for (std::size_t c = 0; c < 4; ++c) half.set(1, c, 0, 1.0);
    REQUIRE(histogram_match_score(half, flat(2, 2, 1, 0.0)) == Approx(0.5));

    REQUIRE_THROWS_AS(histogram_match_score(a, flat(4, 4, 3, 0.0)), ShapeMismatch);
}
