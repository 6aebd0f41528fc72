#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lca/error.hpp"
#include "lca/image.hpp"
#include "lca/old.hpp"

namespace lca {

namespace detail {
inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }
inline double clamp255(double v) { return std::min(255.0, std::max(0.0, v)); }
} // namespace detail

// Digital YCbCr with a luma row that weights green at one half; inputs and
// outputs live on the 0..255 scale.
struct Ycbcr {
    double y, cb, cr;
};

inline Ycbcr rgb_to_ycbcr(double r, double g, double b) {
    r = detail::clamp255(r);
    g = detail::clamp255(g);
    b = detail::clamp255(b);
    return Ycbcr{0.26 * r + 0.50 * g + 0.10 * b + 16.0,
                 128.0 - 0.148 * r - 0.291 * g + 0.439 * b,
                 128.0 + 0.439 * r - 0.368 * g - 0.071 * b};
}

struct Hsv {
    double h; // degrees in [0, 360)
    double s;
    double v;
};

// Hexcone model on [0, 1] inputs; hue is 0 by convention when saturation is 0.
inline Hsv rgb_to_hsv(double r, double g, double b) {
    r = detail::clamp01(r);
    g = detail::clamp01(g);
    b = detail::clamp01(b);
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double delta = mx - mn;
    Hsv out{0.0, 0.0, mx};
    if (delta <= 0.0 || mx <= 0.0) return out;
    out.s = delta / mx;
    double h;
    if (mx == r) h = std::fmod((g - b) / delta, 6.0);
    else if (mx == g) h = (b - r) / delta + 2.0;
    else h = (r - g) / delta + 4.0;
    h *= 60.0;
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    out.h = h;
    return out;
}

struct Rgb {
    double r, g, b;
};

inline Rgb hsv_to_rgb(double h, double s, double v) {
    s = detail::clamp01(s);
    v = detail::clamp01(v);
    h = std::fmod(h, 360.0);
    if (h < 0.0) h += 360.0;
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0.0, g = 0.0, b = 0.0;
    if (hp < 1.0) { r = c; g = x; }
    else if (hp < 2.0) { r = x; g = c; }
    else if (hp < 3.0) { g = c; b = x; }
    else if (hp < 4.0) { g = x; b = c; }
    else if (hp < 5.0) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    return Rgb{r + m, g + m, b + m};
}

struct Lab {
    double l, a, b;
};

// sRGB in [0, 1] -> linear light -> XYZ under D65 -> CIE Lab.
inline Lab rgb_to_lab(double r, double g, double b) {
    auto linearize = [](double c) {
        c = detail::clamp01(c);
        return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    };
    const double rl = linearize(r), gl = linearize(g), bl = linearize(b);
    const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
    auto f = [](double t) {
        constexpr double d = 6.0 / 29.0;
        return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
    };
    const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
    return Lab{116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

namespace detail {

// Mirror an index into [0, n); the symmetric reflection repeats the edge
// sample, and folding iterates so radii larger than the plane still land.
inline std::size_t mirror_index(long long i, std::size_t n) {
    const long long nn = static_cast<long long>(n);
    while (i < 0 || i >= nn) {
        if (i < 0) i = -1 - i;
        if (i >= nn) i = 2 * nn - 1 - i;
    }
    return static_cast<std::size_t>(i);
}

inline std::vector<double> gaussian_blur(const std::vector<double>& plane,
                                         std::size_t h, std::size_t w, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        sum += kernel[i + radius];
    }
    for (double& v : kernel) v /= sum;

    std::vector<double> tmp(plane.size()), out(plane.size());
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += kernel[i + radius] *
                     plane[r * w + mirror_index(static_cast<long long>(c) + i, w)];
            tmp[r * w + c] = s;
        }
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += kernel[i + radius] *
                     tmp[mirror_index(static_cast<long long>(r) + i, h) * w + c];
            out[r * w + c] = s;
        }
    return out;
}

} // namespace detail

struct RetinexParts {
    std::vector<double> illumination; // Gaussian estimate of the lighting
    std::vector<double> reflectance;  // log(I + eps) - log(illumination + eps)
};

// Single-scale retinex split of a [0, 1] plane. eps = 1/255 bounds the
// reflectance by ln 256 in magnitude.
inline RetinexParts retinex_decompose(const std::vector<double>& plane,
                                      std::size_t h, std::size_t w,
                                      double sigma = 25.0) {
    if (plane.size() != h * w || h == 0 || w == 0)
        throw ShapeMismatch("retinex_decompose: plane size disagrees with dimensions");
    if (!(sigma > 0.0))
        throw DegenerateData("retinex_decompose: sigma must be positive");
    RetinexParts parts;
    parts.illumination = detail::gaussian_blur(plane, h, w, sigma);
    parts.reflectance.resize(plane.size());
    constexpr double eps = 1.0 / 255.0;
    for (std::size_t i = 0; i < plane.size(); ++i)
        parts.reflectance[i] = std::log(detail::clamp01(plane[i]) + eps) -
                               std::log(detail::clamp01(parts.illumination[i]) + eps);
    return parts;
}

struct Spectrum {
    std::size_t width = 0, height = 0;
    std::vector<double> re, im; // row-major
};

// Naive row-column DFT with exact-period twiddle tables; fine at the plane
// sizes this tool sees.
inline Spectrum dft_2d(const std::vector<double>& plane, std::size_t h, std::size_t w) {
    if (plane.size() != h * w || h == 0 || w == 0)
        throw ShapeMismatch("dft_2d: plane size disagrees with dimensions");
    const double tau = 8.0 * std::atan(1.0);
    std::vector<double> cw(w), sw(w), ch(h), sh(h);
    for (std::size_t i = 0; i < w; ++i) {
        cw[i] = std::cos(tau * i / static_cast<double>(w));
        sw[i] = std::sin(tau * i / static_cast<double>(w));
    }
    for (std::size_t i = 0; i < h; ++i) {
        ch[i] = std::cos(tau * i / static_cast<double>(h));
        sh[i] = std::sin(tau * i / static_cast<double>(h));
    }

    // rows first
    std::vector<double> rre(h * w), rim(h * w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t kx = 0; kx < w; ++kx) {
            double re = 0.0, im = 0.0;
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t t = (kx * x) % w;
                re += plane[r * w + x] * cw[t];
                im -= plane[r * w + x] * sw[t];
            }
            rre[r * w + kx] = re;
            rim[r * w + kx] = im;
        }
    Spectrum s{w, h, std::vector<double>(h * w), std::vector<double>(h * w)};
    for (std::size_t ky = 0; ky < h; ++ky)
        for (std::size_t kx = 0; kx < w; ++kx) {
            double re = 0.0, im = 0.0;
            for (std::size_t y = 0; y < h; ++y) {
                const std::size_t t = (ky * y) % h;
                re += rre[y * w + kx] * ch[t] + rim[y * w + kx] * sh[t];
                im += rim[y * w + kx] * ch[t] - rre[y * w + kx] * sh[t];
            }
            s.re[ky * w + kx] = re;
            s.im[ky * w + kx] = im;
        }
    return s;
}

// Real part of the inverse transform; the imaginary residual of a spectrum
// that came from real data is numerical noise.
inline std::vector<double> idft_2d(const Spectrum& s) {
    const std::size_t h = s.height, w = s.width;
    if (s.re.size() != h * w || s.im.size() != h * w || h == 0 || w == 0)
        throw ShapeMismatch("idft_2d: spectrum size disagrees with dimensions");
    const double tau = 8.0 * std::atan(1.0);
    std::vector<double> cw(w), sw(w), ch(h), sh(h);
    for (std::size_t i = 0; i < w; ++i) {
        cw[i] = std::cos(tau * i / static_cast<double>(w));
        sw[i] = std::sin(tau * i / static_cast<double>(w));
    }
    for (std::size_t i = 0; i < h; ++i) {
        ch[i] = std::cos(tau * i / static_cast<double>(h));
        sh[i] = std::sin(tau * i / static_cast<double>(h));
    }

    std::vector<double> rre(h * w), rim(h * w);
    for (std::size_t ky = 0; ky < h; ++ky)
        for (std::size_t kx = 0; kx < w; ++kx) {
            double re = 0.0, im = 0.0;
            for (std::size_t y = 0; y < h; ++y) {
                const std::size_t t = (ky * y) % h;
                re += s.re[y * w + kx] * ch[t] - s.im[y * w + kx] * sh[t];
                im += s.im[y * w + kx] * ch[t] + s.re[y * w + kx] * sh[t];
            }
            rre[ky * w + kx] = re;
            rim[ky * w + kx] = im;
        }
    std::vector<double> out(h * w);
    const double scale = 1.0 / static_cast<double>(h * w);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t x = 0; x < w; ++x) {
            double re = 0.0;
            for (std::size_t kx = 0; kx < w; ++kx) {
                const std::size_t t = (x * kx) % w;
                re += rre[r * w + kx] * cw[t] - rim[r * w + kx] * sw[t];
            }
            out[r * w + x] = re * scale;
        }
    return out;
}

enum class Method { Ycbcr, Hsv, Lab, Retinex, Fourier };

inline Method parse_method(const std::string& name) {
    if (name == "ycbcr") return Method::Ycbcr;
    if (name == "hsv") return Method::Hsv;
    if (name == "lab") return Method::Lab;
    if (name == "retinex") return Method::Retinex;
    if (name == "fourier") return Method::Fourier;
    throw UnsupportedMethod("unknown analysis method: " + name);
}

inline std::string method_name(Method m) {
    switch (m) {
        case Method::Ycbcr: return "ycbcr";
        case Method::Hsv: return "hsv";
        case Method::Lab: return "lab";
        case Method::Retinex: return "retinex";
        case Method::Fourier: return "fourier";
    }
    return "?";
}

namespace detail {

// The paper-weighted luma of an interleaved [0, 1] image, or the plane
// itself when it is single channel.
inline std::vector<double> gray_plane(const std::vector<double>& data,
                                      std::size_t channels) {
    if (channels == 1) return data;
    std::vector<double> plane(data.size() / 3);
    for (std::size_t i = 0; i < plane.size(); ++i)
        plane[i] = 0.26 * data[3 * i] + 0.50 * data[3 * i + 1] + 0.10 * data[3 * i + 2];
    return plane;
}

} // namespace detail

// How much of the total variance each component of a fixed decomposition
// carries, for the remapped difference (d + 1) / 2. Every component is
// scaled onto a unit-width domain first so the shares compare like with
// like: Y/Cb/Cr by 255, H by 360, L by 100, a/b by 255, reflectance by
// 2 ln 256, amplitude by the sample count, phase by 2 pi. The first
// component of each method is the luminance-related one (V for HSV).
inline VarianceReport baseline_variance_report(Method method, const DifferenceImage& d) {
    const std::size_t n = d.width * d.height;
    if (n == 0) throw ShapeMismatch("baseline_variance_report: empty difference");
    const bool color_method =
        method == Method::Ycbcr || method == Method::Hsv || method == Method::Lab;
    if (color_method && d.channels != 3)
        throw ShapeMismatch("baseline_variance_report: this method needs 3 channels");

    std::vector<double> remapped(d.values.size());
    for (std::size_t i = 0; i < d.values.size(); ++i)
        remapped[i] = detail::clamp01(0.5 * (d.values[i] + 1.0));

    VarianceReport rep;
    rep.method = method_name(method);
    std::vector<std::vector<double>> planes;
    std::size_t luminance_components = 1;

    switch (method) {
        case Method::Ycbcr: {
            planes.assign(3, std::vector<double>(n));
            for (std::size_t i = 0; i < n; ++i) {
                const Ycbcr v = rgb_to_ycbcr(255.0 * remapped[3 * i],
                                             255.0 * remapped[3 * i + 1],
                                             255.0 * remapped[3 * i + 2]);
                planes[0][i] = v.y / 255.0;
                planes[1][i] = v.cb / 255.0;
                planes[2][i] = v.cr / 255.0;
            }
            rep.component_names = {"Y", "Cb", "Cr"};
            break;
        }
        case Method::Hsv: {
            planes.assign(3, std::vector<double>(n));
            for (std::size_t i = 0; i < n; ++i) {
                const Hsv v = rgb_to_hsv(remapped[3 * i], remapped[3 * i + 1],
                                         remapped[3 * i + 2]);
                planes[0][i] = v.v;
                planes[1][i] = v.h / 360.0;
                planes[2][i] = v.s;
            }
            rep.component_names = {"V", "H", "S"};
            break;
        }
        case Method::Lab: {
            planes.assign(3, std::vector<double>(n));
            for (std::size_t i = 0; i < n; ++i) {
                const Lab v = rgb_to_lab(remapped[3 * i], remapped[3 * i + 1],
                                         remapped[3 * i + 2]);
                planes[0][i] = v.l / 100.0;
                planes[1][i] = v.a / 255.0;
                planes[2][i] = v.b / 255.0;
            }
            rep.component_names = {"L", "a", "b"};
            break;
        }
        case Method::Retinex: {
            const RetinexParts parts = retinex_decompose(
                detail::gray_plane(remapped, d.channels), d.height, d.width);
            planes.push_back(parts.illumination);
            planes.emplace_back(n);
            constexpr double scale = 1.0 / (2.0 * 5.545177444479562); // 2 ln 256
            for (std::size_t i = 0; i < n; ++i)
                planes[1][i] = parts.reflectance[i] * scale;
            rep.component_names = {"illumination", "reflectance"};
            break;
        }
        case Method::Fourier: {
            const Spectrum s =
                dft_2d(detail::gray_plane(remapped, d.channels), d.height, d.width);
            planes.assign(2, std::vector<double>(n));
            const double tau = 8.0 * std::atan(1.0);
            for (std::size_t i = 0; i < n; ++i) {
                planes[0][i] = std::hypot(s.re[i], s.im[i]) / static_cast<double>(n);
                planes[1][i] = std::atan2(s.im[i], s.re[i]) / tau;
            }
            rep.component_names = {"amplitude", "phase"};
            break;
        }
    }

    double total = 0.0;
    std::vector<double> vars(planes.size());
    for (std::size_t i = 0; i < planes.size(); ++i) {
        vars[i] = detail::plane_variance(planes[i]);
        total += vars[i];
    }
    if (total < 1e-300)
        throw DegenerateData("baseline_variance_report: difference has no variance");
    for (double v : vars) rep.shares.push_back(v / total);
    for (std::size_t i = 0; i < luminance_components; ++i)
        rep.principal_share += rep.shares[i];
    rep.residual_share = 1.0 - rep.principal_share;
    return rep;
}

} // namespace lca
