#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include <zlib.h>

#include "lca/error.hpp"
#include "lca/fsio.hpp"
#include "lca/matrix.hpp"
#include "lca/old.hpp"

namespace lca {

// Interleaved row-major image with values in [0, 1]. Writes clamp, so the
// invariant survives arithmetic that overshoots the range.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(std::size_t width, std::size_t height, std::size_t channels)
        : w_(width), h_(height), c_(channels), data_(width * height * channels, 0.0) {
        if (w_ < 1 || h_ < 1 || (c_ != 1 && c_ != 3))
            throw ShapeMismatch("ImageBuffer expects positive dimensions and 1 or 3 channels");
    }

    std::size_t width() const { return w_; }
    std::size_t height() const { return h_; }
    std::size_t channels() const { return c_; }
    std::size_t pixel_count() const { return w_ * h_; }
    const std::vector<double>& data() const { return data_; }

    double at(std::size_t row, std::size_t col, std::size_t ch) const {
        return data_[(row * w_ + col) * c_ + ch];
    }

    void set(std::size_t row, std::size_t col, std::size_t ch, double v) {
        if (!std::isfinite(v))
            throw NumericFailure("ImageBuffer::set: value is not finite");
        data_[(row * w_ + col) * c_ + ch] = std::min(1.0, std::max(0.0, v));
    }

    bool same_shape(const ImageBuffer& o) const {
        return w_ == o.w_ && h_ == o.h_ && c_ == o.c_;
    }

private:
    std::size_t w_ = 0, h_ = 0, c_ = 0;
    std::vector<double> data_;
};

namespace detail {

// Round half up; the exact inverse of loading byte / 255.
inline unsigned char quantize_byte(double v) {
    const double c = std::min(1.0, std::max(0.0, v));
    return static_cast<unsigned char>(c * 255.0 + 0.5);
}

inline std::uint32_t be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void push_be32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

inline const unsigned char kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

inline int paeth_predictor(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

inline ImageBuffer image_from_bytes(std::size_t w, std::size_t h, std::size_t c,
                                    const unsigned char* bytes) {
    ImageBuffer img(w, h, c);
    const std::size_t n = w * h * c;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t px = i / c, ch = i % c;
        img.set(px / w, px % w, ch, bytes[i] / 255.0);
    }
    return img;
}

inline ImageBuffer decode_png(const std::string& bytes, const std::string& path) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t n = bytes.size();
    if (n < 8 || std::memcmp(p, kPngSignature, 8) != 0)
        throw CorruptFile("not a PNG file: " + path);

    bool saw_ihdr = false, saw_iend = false;
    std::size_t w = 0, h = 0, channels = 0;
    std::string idat;
    std::size_t off = 8;
    while (!saw_iend) {
        if (off + 12 > n) throw CorruptFile("truncated PNG chunk: " + path);
        const std::uint32_t len = be32(p + off);
        if (len > 0x7fffffffu || off + 12 + len > n)
            throw CorruptFile("truncated PNG chunk: " + path);
        std::uint32_t crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, p + off + 4, len + 4);
        if (crc != be32(p + off + 8 + len))
            throw CorruptFile("PNG chunk CRC mismatch: " + path);
        const std::string type(reinterpret_cast<const char*>(p + off + 4), 4);
        const unsigned char* data = p + off + 8;

        if (!saw_ihdr && type != "IHDR")
            throw CorruptFile("PNG does not start with IHDR: " + path);
        if (type == "IHDR") {
            if (saw_ihdr) throw CorruptFile("duplicate IHDR: " + path);
            if (len != 13) throw CorruptFile("IHDR has the wrong length: " + path);
            w = be32(data);
            h = be32(data + 4);
            const int depth = data[8], color = data[9];
            const int compression = data[10], filter = data[11], interlace = data[12];
            if (w == 0 || h == 0) throw CorruptFile("PNG has a zero dimension: " + path);
            if (depth != 8)
                throw UnsupportedFormat("only 8-bit PNG is supported: " + path);
            if (color == 0) channels = 1;
            else if (color == 2) channels = 3;
            else
                throw UnsupportedFormat(
                    "only grayscale and RGB PNG are supported (color type " +
                    std::to_string(color) + "): " + path);
            if (compression != 0)
                throw UnsupportedFormat("unsupported PNG compression method: " + path);
            if (filter != 0)
                throw UnsupportedFormat("unsupported PNG filter method: " + path);
            if (interlace == 1)
                throw UnsupportedFormat("interlaced PNG is not supported: " + path);
            if (interlace != 0) throw CorruptFile("bad PNG interlace flag: " + path);
            if (static_cast<std::uint64_t>(w) * h * channels > (1ull << 30))
                throw UnsupportedFormat("PNG dimensions are too large: " + path);
            saw_ihdr = true;
        } else if (type == "IDAT") {
            idat.append(reinterpret_cast<const char*>(data), len);
        } else if (type == "IEND") {
            if (len != 0) throw CorruptFile("IEND carries data: " + path);
            saw_iend = true;
        } else if (!(p[off + 4] & 0x20) && type != "PLTE") {
            // unknown critical chunk; PLTE on an RGB image is a suggested
            // palette and safe to ignore
            throw UnsupportedFormat("unsupported critical PNG chunk " + type + ": " + path);
        }
        off += 12 + static_cast<std::size_t>(len);
    }
    if (idat.empty()) throw CorruptFile("PNG has no IDAT: " + path);

    const std::size_t stride = w * channels;
    const std::size_t expected = (stride + 1) * h;
    std::vector<unsigned char> raw(expected);
    uLongf dest_len = static_cast<uLongf>(expected);
    const int zret = uncompress(raw.data(), &dest_len,
                                reinterpret_cast<const Bytef*>(idat.data()),
                                static_cast<uLong>(idat.size()));
    if (zret != Z_OK || dest_len != expected)
        throw CorruptFile("PNG pixel data does not decompress to the expected size: " + path);

    std::vector<unsigned char> img(stride * h);
    const std::size_t bpp = channels;
    for (std::size_t row = 0; row < h; ++row) {
        const unsigned char f = raw[row * (stride + 1)];
        const unsigned char* src = &raw[row * (stride + 1) + 1];
        unsigned char* dst = &img[row * stride];
        const unsigned char* prior = row ? &img[(row - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int left = i >= bpp ? dst[i - bpp] : 0;
            const int above = prior ? prior[i] : 0;
            const int upleft = (prior && i >= bpp) ? prior[i - bpp] : 0;
            int v = src[i];
            switch (f) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += above; break;
                case 3: v += (left + above) / 2; break;
                case 4: v += paeth_predictor(left, above, upleft); break;
                default: throw CorruptFile("bad PNG filter byte: " + path);
            }
            dst[i] = static_cast<unsigned char>(v);
        }
    }
    return image_from_bytes(w, h, channels, img.data());
}

inline void append_png_chunk(std::string& out, const char type[5], const std::string& payload) {
    push_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t type_off = out.size();
    out.append(type, 4);
    out += payload;
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(out.data() + type_off),
                static_cast<uInt>(4 + payload.size()));
    push_be32(out, crc);
}

inline std::string encode_png(const ImageBuffer& img) {
    const std::size_t w = img.width(), h = img.height(), c = img.channels();
    const std::size_t stride = w * c;
    std::vector<unsigned char> raw((stride + 1) * h);
    for (std::size_t row = 0; row < h; ++row) {
        raw[row * (stride + 1)] = 0; // filter: none
        for (std::size_t col = 0; col < w; ++col)
            for (std::size_t ch = 0; ch < c; ++ch)
                raw[row * (stride + 1) + 1 + col * c + ch] =
                    quantize_byte(img.at(row, col, ch));
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> packed(bound);
    if (compress2(packed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK)
        throw IoError("PNG compression failed");

    std::string out(reinterpret_cast<const char*>(kPngSignature), 8);
    std::string ihdr;
    push_be32(ihdr, static_cast<std::uint32_t>(w));
    push_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);                          // bit depth
    ihdr.push_back(c == 1 ? 0 : 2);             // color type
    ihdr.push_back(0);                          // compression
    ihdr.push_back(0);                          // filter method
    ihdr.push_back(0);                          // no interlace
    append_png_chunk(out, "IHDR", ihdr);
    append_png_chunk(out, "IDAT",
                     std::string(reinterpret_cast<const char*>(packed.data()), bound));
    append_png_chunk(out, "IEND", "");
    return out;
}

// P5 and P6, 8-bit binary. Header tokens may be separated by whitespace and
// '#' comments; exactly one whitespace byte separates maxval from the data.
inline ImageBuffer decode_pnm(const std::string& bytes, const std::string& path) {
    if (bytes.size() < 2) throw CorruptFile("truncated PNM header: " + path);
    const std::size_t channels = bytes[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    auto next_token = [&]() -> long long {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
            throw CorruptFile("malformed PNM header: " + path);
        long long v = 0;
        while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > (1ll << 40)) throw CorruptFile("absurd PNM header value: " + path);
            ++pos;
        }
        return v;
    };
    const long long w = next_token();
    const long long h = next_token();
    const long long maxval = next_token();
    if (w < 1 || h < 1) throw CorruptFile("PNM has a zero dimension: " + path);
    if (maxval != 255)
        throw UnsupportedFormat("only maxval 255 PNM is supported: " + path);
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw CorruptFile("malformed PNM header: " + path);
    ++pos;
    const std::uint64_t need = static_cast<std::uint64_t>(w) * h * channels;
    if (need > (1ull << 30)) throw UnsupportedFormat("PNM dimensions are too large: " + path);
    if (bytes.size() - pos < need) throw CorruptFile("PNM pixel data is truncated: " + path);
    return image_from_bytes(static_cast<std::size_t>(w), static_cast<std::size_t>(h),
                            channels,
                            reinterpret_cast<const unsigned char*>(bytes.data() + pos));
}

inline std::string encode_pnm(const ImageBuffer& img) {
    std::string out = img.channels() == 3 ? "P6\n" : "P5\n";
    out += std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    for (std::size_t row = 0; row < img.height(); ++row)
        for (std::size_t col = 0; col < img.width(); ++col)
            for (std::size_t ch = 0; ch < img.channels(); ++ch)
                out.push_back(static_cast<char>(quantize_byte(img.at(row, col, ch))));
    return out;
}

inline bool ends_with_ci(const std::string& s, const std::string& suffix) {
    if (s.size() < suffix.size()) return false;
    for (std::size_t i = 0; i < suffix.size(); ++i) {
        const char a = static_cast<char>(std::tolower(
            static_cast<unsigned char>(s[s.size() - suffix.size() + i])));
        if (a != suffix[i]) return false;
    }
    return true;
}

} // namespace detail

// Format is sniffed from the leading bytes, not the file name.
inline ImageBuffer load_image(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() >= 8 &&
        std::memcmp(bytes.data(), detail::kPngSignature, 8) == 0)
        return detail::decode_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'))
        return detail::decode_pnm(bytes, path);
    throw UnsupportedFormat("unrecognized image format: " + path);
}

// The extension picks the container: .png, .ppm (3 channel), .pgm (1 channel).
inline void save_image(const std::string& path, const ImageBuffer& img) {
    if (detail::ends_with_ci(path, ".png")) {
        write_file_atomic(path, detail::encode_png(img));
        return;
    }
    if (detail::ends_with_ci(path, ".ppm")) {
        if (img.channels() != 3)
            throw UnsupportedFormat("P6 needs a 3-channel image: " + path);
        write_file_atomic(path, detail::encode_pnm(img));
        return;
    }
    if (detail::ends_with_ci(path, ".pgm")) {
        if (img.channels() != 1)
            throw UnsupportedFormat("P5 needs a 1-channel image: " + path);
        write_file_atomic(path, detail::encode_pnm(img));
        return;
    }
    throw UnsupportedFormat("unrecognized image extension: " + path);
}

// Signed per-sample difference, reference minus degraded; values in [-1, 1].
struct DifferenceImage {
    std::size_t width = 0, height = 0, channels = 0;
    std::vector<double> values; // interleaved, same layout as ImageBuffer
};

inline DifferenceImage difference_image(const ImageBuffer& reference,
                                        const ImageBuffer& degraded) {
    if (!reference.same_shape(degraded))
        throw ShapeMismatch("difference_image: images have different shapes");
    DifferenceImage d{reference.width(), reference.height(), reference.channels(), {}};
    d.values.resize(reference.data().size());
    for (std::size_t i = 0; i < d.values.size(); ++i)
        d.values[i] = reference.data()[i] - degraded.data()[i];
    return d;
}

// One column per non-overlapping patch x patch tile, laid out (row, col,
// channel) within the tile; patch 1 gives one column per pixel. Edge pixels
// not covered by a full tile are dropped.
inline Matrix difference_columns(const DifferenceImage& d, std::size_t patch = 1) {
    if (patch < 1) throw ShapeMismatch("difference_columns: patch must be positive");
    const std::size_t ty = d.height / patch, tx = d.width / patch;
    if (ty == 0 || tx == 0)
        throw TooSmall("difference_columns: image is smaller than one patch");
    const std::size_t dim = d.channels * patch * patch;
    Matrix m(dim, tx * ty);
    for (std::size_t t = 0; t < tx * ty; ++t) {
        const std::size_t base_r = (t / tx) * patch, base_c = (t % tx) * patch;
        for (std::size_t dr = 0; dr < patch; ++dr)
            for (std::size_t dc = 0; dc < patch; ++dc)
                for (std::size_t ch = 0; ch < d.channels; ++ch)
                    m((dr * patch + dc) * d.channels + ch, t) =
                        d.values[((base_r + dr) * d.width + base_c + dc) * d.channels + ch];
    }
    return m;
}

inline DifferenceDataset dataset_from_difference(const DifferenceImage& d,
                                                 std::size_t patch = 1) {
    return DifferenceDataset(difference_columns(d, patch));
}

// Same tiling as difference_columns, over raw pixel values.
inline Matrix image_columns(const ImageBuffer& img, std::size_t patch = 1) {
    DifferenceImage d{img.width(), img.height(), img.channels(), img.data()};
    return difference_columns(d, patch);
}

// Inverse of image_columns: write the columns back over their tiles,
// clamping into [0, 1]. Pixels outside the tiling keep their old values.
inline ImageBuffer replace_image_columns(const ImageBuffer& img, const Matrix& cols,
                                         std::size_t patch = 1) {
    const std::size_t ty = img.height() / patch, tx = img.width() / patch;
    if (cols.rows() != img.channels() * patch * patch || cols.cols() != tx * ty)
        throw ShapeMismatch("replace_image_columns: columns do not match the tiling");
    ImageBuffer out = img;
    for (std::size_t t = 0; t < tx * ty; ++t) {
        const std::size_t base_r = (t / tx) * patch, base_c = (t % tx) * patch;
        for (std::size_t dr = 0; dr < patch; ++dr)
            for (std::size_t dc = 0; dc < patch; ++dc)
                for (std::size_t ch = 0; ch < img.channels(); ++ch)
                    out.set(base_r + dr, base_c + dc, ch,
                            cols((dr * patch + dc) * img.channels() + ch, t));
    }
    return out;
}

inline Matrix hconcat(const std::vector<Matrix>& parts) {
    if (parts.empty()) throw ShapeMismatch("hconcat: nothing to concatenate");
    std::size_t total = 0;
    for (const Matrix& p : parts) {
        if (p.rows() != parts.front().rows())
            throw ShapeMismatch("hconcat: row counts disagree");
        total += p.cols();
    }
    Matrix m(parts.front().rows(), total);
    std::size_t off = 0;
    for (const Matrix& p : parts) {
        for (std::size_t r = 0; r < p.rows(); ++r)
            for (std::size_t c = 0; c < p.cols(); ++c)
                m(r, off + c) = p(r, c);
        off += p.cols();
    }
    return m;
}

} // namespace lca
