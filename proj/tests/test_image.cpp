#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <zlib.h>

#include "lca/image.hpp"
#include "lca/rng.hpp"

using Catch::Approx;
using namespace lca;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "lca_image_tests";
    fs::create_directories(dir);
    return dir;
}

ImageBuffer random_image(std::uint64_t seed, std::size_t w, std::size_t h,
                         std::size_t c) {
    Rng rng(seed);
    ImageBuffer img(w, h, c);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t col = 0; col < w; ++col)
            for (std::size_t ch = 0; ch < c; ++ch)
                img.set(r, col, ch, rng.uniform());
    return img;
}

// test-local forward Paeth, the counterpart of the decoder's predictor
int paeth_ref(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

// assemble a PNG from already-filtered scanlines and a hand-rolled IHDR
std::string build_png(std::uint32_t w, std::uint32_t h, int depth, int color,
                      int interlace, const std::vector<unsigned char>& raw) {
    std::string ihdr;
    detail::push_be32(ihdr, w);
    detail::push_be32(ihdr, h);
    ihdr.push_back(static_cast<char>(depth));
    ihdr.push_back(static_cast<char>(color));
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(static_cast<char>(interlace));

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> packed(bound ? bound : 1);
    REQUIRE(compress2(packed.data(), &bound, raw.data(),
                      static_cast<uLong>(raw.size()), 6) == Z_OK);

    std::string out(reinterpret_cast<const char*>(detail::kPngSignature), 8);
    detail::append_png_chunk(out, "IHDR", ihdr);
    detail::append_png_chunk(
        out, "IDAT", std::string(reinterpret_cast<const char*>(packed.data()), bound));
    detail::append_png_chunk(out, "IEND", "");
    return out;
}

} // namespace

TEST_CASE("ImageBuffer clamps writes and validates shape") {
    REQUIRE_THROWS_AS(ImageBuffer(2, 2, 2), ShapeMismatch);
    REQUIRE_THROWS_AS(ImageBuffer(0, 2, 1), ShapeMismatch);
    ImageBuffer img(2, 2, 1);
    img.set(0, 0, 0, 1.5);
    img.set(0, 1, 0, -0.5);
    REQUIRE(img.at(0, 0, 0) == 1.0);
    REQUIRE(img.at(0, 1, 0) == 0.0);
    REQUIRE_THROWS_AS(img.set(0, 0, 0, std::nan("")), NumericFailure);
}

TEST_CASE("quantize_byte inverts byte loading for every value") {
    for (int b = 0; b < 256; ++b)
        REQUIRE(detail::quantize_byte(b / 255.0) == b);
    REQUIRE(detail::quantize_byte(-0.3) == 0);
    REQUIRE(detail::quantize_byte(1.7) == 255);
}

TEST_CASE("png round trip preserves the quantized image") {
    for (const auto& [w, h, c] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 3},
                                  {13, 7, 3},
                                  {8, 5, 1}}) {
        const ImageBuffer img = random_image(100 + w, w, h, c);
        const ImageBuffer back = detail::decode_png(detail::encode_png(img), "mem");
        REQUIRE(back.width() == w);
        REQUIRE(back.height() == h);
        REQUIRE(back.channels() == c);
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t col = 0; col < w; ++col)
                for (std::size_t ch = 0; ch < c; ++ch)
                    REQUIRE(back.at(r, col, ch) ==
                            detail::quantize_byte(img.at(r, col, ch)) / 255.0);
    }
}

TEST_CASE("png decoder undoes all four predictive filters") {
    // 3 x 4 RGB, pixel values chosen to exercise carries
    const std::size_t w = 3, h = 4, stride = 9;
    std::vector<unsigned char> pixels(stride * h);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<unsigned char>((37 * i + 11 * i * i) % 256);

    const unsigned char filters[4] = {1, 2, 3, 4};
    std::vector<unsigned char> raw((stride + 1) * h);
    for (std::size_t row = 0; row < h; ++row) {
        raw[row * (stride + 1)] = filters[row];
        for (std::size_t i = 0; i < stride; ++i) {
            const int cur = pixels[row * stride + i];
            const int left = i >= 3 ? pixels[row * stride + i - 3] : 0;
            const int above = row ? pixels[(row - 1) * stride + i] : 0;
            const int upleft = (row && i >= 3) ? pixels[(row - 1) * stride + i - 3] : 0;
            int pred = 0;
            switch (filters[row]) {
                case 1: pred = left; break;
                case 2: pred = above; break;
                case 3: pred = (left + above) / 2; break;
                case 4: pred = paeth_ref(left, above, upleft); break;
            }
            raw[row * (stride + 1) + 1 + i] =
                static_cast<unsigned char>((cur - pred) & 0xff);
        }
    }

    const ImageBuffer img =
        detail::decode_png(build_png(w, h, 8, 2, 0, raw), "mem");
    for (std::size_t row = 0; row < h; ++row)
        for (std::size_t col = 0; col < w; ++col)
            for (std::size_t ch = 0; ch < 3; ++ch)
                REQUIRE(img.at(row, col, ch) ==
                        pixels[row * stride + col * 3 + ch] / 255.0);
}

TEST_CASE("png decoder rejects corruption") {
    const std::string good = detail::encode_png(random_image(7, 6, 4, 3));

    SECTION("flipped byte inside IDAT fails the CRC") {
        std::string bad = good;
        const std::size_t at = bad.find("IDAT") + 6;
        bad[at] = static_cast<char>(bad[at] ^ 0x5a);
        REQUIRE_THROWS_AS(detail::decode_png(bad, "mem"), CorruptFile);
    }
    SECTION("truncated stream") {
        REQUIRE_THROWS_AS(detail::decode_png(good.substr(0, good.size() / 2), "mem"),
                          CorruptFile);
    }
    SECTION("wrong signature") {
        std::string bad = good;
        bad[0] = 'X';
        REQUIRE_THROWS_AS(detail::decode_png(bad, "mem"), CorruptFile);
    }
    SECTION("bad filter byte") {
        std::vector<unsigned char> raw(4 * 2, 0);
        raw[0] = 9; // no such filter
        REQUIRE_THROWS_AS(detail::decode_png(build_png(1, 2, 8, 2, 0, raw), "mem"),
                          CorruptFile);
    }
    SECTION("pixel data of the wrong size") {
        std::vector<unsigned char> raw(3, 0); // one short scanline for a 1x2 RGB
        REQUIRE_THROWS_AS(detail::decode_png(build_png(1, 2, 8, 2, 0, raw), "mem"),
                          CorruptFile);
    }
    SECTION("zero dimension") {
        std::vector<unsigned char> raw(4, 0);
        REQUIRE_THROWS_AS(detail::decode_png(build_png(0, 1, 8, 2, 0, raw), "mem"),
                          CorruptFile);
    }
}

TEST_CASE("png decoder rejects unsupported variants") {
    const std::vector<unsigned char> raw(8, 0);
    // 16-bit depth, palette, RGBA, gray+alpha, interlaced
    REQUIRE_THROWS_AS(detail::decode_png(build_png(1, 1, 16, 2, 0, raw), "mem"),
                      UnsupportedFormat);
    REQUIRE_THROWS_AS(detail::decode_png(build_png(1, 1, 8, 3, 0, raw), "mem"),
                      UnsupportedFormat);
    REQUIRE_THROWS_AS(detail::decode_png(build_png(1, 1, 8, 6, 0, raw), "mem"),
                      UnsupportedFormat);
    REQUIRE_THROWS_AS(detail::decode_png(build_png(1, 1, 8, 4, 0, raw), "mem"),
                      UnsupportedFormat);
    REQUIRE_THROWS_AS(detail::decode_png(build_png(1, 1, 8, 2, 1, raw), "mem"),
                      UnsupportedFormat);
}

TEST_CASE("png decoder skips ancillary chunks and rejects critical ones") {
    const ImageBuffer img = random_image(9, 3, 3, 3);
    const std::string good = detail::encode_png(img);
    const std::size_t before_iend = good.find("IEND") - 4;

    std::string with_ancillary = good.substr(0, before_iend);
    detail::append_png_chunk(with_ancillary, "teXt", "ignored payload");
    with_ancillary += good.substr(before_iend);
    REQUIRE_NOTHROW(detail::decode_png(with_ancillary, "mem"));

    std::string with_critical = good.substr(0, before_iend);
    detail::append_png_chunk(with_critical, "CRIT", "mystery");
    with_critical += good.substr(before_iend);
    REQUIRE_THROWS_AS(detail::decode_png(with_critical, "mem"), UnsupportedFormat);
}

TEST_CASE("pnm round trip and header parsing") {
    const ImageBuffer color = random_image(3, 5, 4, 3);
    const ImageBuffer back = detail::decode_pnm(detail::encode_pnm(color), "mem");
    REQUIRE(back.same_shape(color));
    for (std::size_t i = 0; i < back.data().size(); ++i)
        REQUIRE(back.data()[i] ==
                detail::quantize_byte(color.data()[i]) / 255.0);

    const ImageBuffer gray = random_image(4, 3, 2, 1);
    const ImageBuffer gback = detail::decode_pnm(detail::encode_pnm(gray), "mem");
    REQUIRE(gback.same_shape(gray));

    // comments and generous whitespace are part of the header grammar
    const ImageBuffer c =
        detail::decode_pnm("P5 # a comment\n 2\n#more\n2\n255\n AAAA", "mem");
    REQUIRE(c.width() == 2);
    REQUIRE(c.height() == 2);
}

TEST_CASE("pnm decoder rejects what it cannot represent") {
    REQUIRE_THROWS_AS(detail::decode_pnm("P5\n2 2\n65535\n", "mem"),
                      UnsupportedFormat);
    REQUIRE_THROWS_AS(detail::decode_pnm("P5\n2 2\n255\nAB", "mem"), CorruptFile);
    REQUIRE_THROWS_AS(detail::decode_pnm("P5\n2 x\n255\n", "mem"), CorruptFile);
    REQUIRE_THROWS_AS(detail::decode_pnm("P5", "mem"), CorruptFile);
    REQUIRE_THROWS_AS(detail::decode_pnm("P6\n0 2\n255\n", "mem"), CorruptFile);
}

TEST_CASE("image files are sniffed by content and saved by extension") {
    const fs::path dir = temp_dir();
    const ImageBuffer img = random_image(21, 6, 5, 3);

    const std::string png_path = (dir / "a.png").string();
    save_image(png_path, img);
    REQUIRE(load_image(png_path).same_shape(img));

    const std::string ppm_path = (dir / "a.ppm").string();
    save_image(ppm_path, img);
    REQUIRE(load_image(ppm_path).same_shape(img));

    // a PNM payload behind a .png name still loads: content wins
    const std::string lying = (dir / "b.png").string();
    write_file_atomic(lying, detail::encode_pnm(img));
    REQUIRE(load_image(lying).same_shape(img));

    const ImageBuffer gray = random_image(22, 4, 4, 1);
    save_image((dir / "g.pgm").string(), gray);
    REQUIRE(load_image((dir / "g.pgm").string()).channels() == 1);

    REQUIRE_THROWS_AS(save_image((dir / "c.ppm").string(), gray), UnsupportedFormat);
    REQUIRE_THROWS_AS(save_image((dir / "c.pgm").string(), img), UnsupportedFormat);
    REQUIRE_THROWS_AS(save_image((dir / "c.bmp").string(), img), UnsupportedFormat);
    REQUIRE_THROWS_AS(load_image((dir / "missing.png").string()), IoError);

    const std::string junk = (dir / "junk.img").string();
    write_file_atomic(junk, "not an image at all");
    REQUIRE_THROWS_AS(load_image(junk), UnsupportedFormat);
}

TEST_CASE("difference_image subtracts pixel for pixel") {
    ImageBuffer gt(2, 1, 1), deg(2, 1, 1);
    gt.set(0, 0, 0, 0.8);
    gt.set(0, 1, 0, 0.2);
    deg.set(0, 0, 0, 0.5);
    deg.set(0, 1, 0, 0.6);
    const DifferenceImage d = difference_image(gt, deg);
    REQUIRE(d.values[0] == Approx(0.3));
    REQUIRE(d.values[1] == Approx(-0.4));
    REQUIRE_THROWS_AS(difference_image(gt, ImageBuffer(3, 1, 1)), ShapeMismatch);
}

TEST_CASE("difference_columns tiles in row-major patch order") {
    DifferenceImage d{3, 2, 1, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}};
    const Matrix m1 = difference_columns(d, 1);
    REQUIRE(m1.rows() == 1);
    REQUIRE(m1.cols() == 6);
    for (std::size_t t = 0; t < 6; ++t) REQUIRE(m1(0, t) == Approx(0.1 * t));

    // 5 x 4 single channel, patch 2: the rightmost column is dropped
    DifferenceImage big{5, 4, 1, std::vector<double>(20)};
    for (std::size_t i = 0; i < 20; ++i) big.values[i] = i / 100.0;
    const Matrix m2 = difference_columns(big, 2);
    REQUIRE(m2.rows() == 4);
    REQUIRE(m2.cols() == 4);
    // tile 1 covers rows 0-1, cols 2-3; entry (dr=1, dc=0) is pixel (1, 2)
    REQUIRE(m2(2, 1) == Approx(0.07));
    // tile 2 covers rows 2-3, cols 0-1; entry (dr=0, dc=1) is pixel (2, 1)
    REQUIRE(m2(1, 2) == Approx(0.11));

    REQUIRE_THROWS_AS(difference_columns(d, 4), TooSmall);
    REQUIRE_THROWS_AS(difference_columns(d, 0), ShapeMismatch);

    const DifferenceDataset set = dataset_from_difference(big, 2);
    REQUIRE(set.channels() == 4);
    REQUIRE(set.count() == 4);
}

TEST_CASE("replace_image_columns inverts image_columns") {
    const ImageBuffer img = random_image(31, 6, 4, 3);
    const Matrix cols = image_columns(img, 2);
    const ImageBuffer back = replace_image_columns(img, cols, 2);
    REQUIRE(back.data() == img.data());

    // outside the tiling the original pixels survive
    const ImageBuffer odd = random_image(32, 5, 3, 1);
    const Matrix zeros = Matrix::zeros(4, 2);
    const ImageBuffer wiped = replace_image_columns(odd, zeros, 2);
    REQUIRE(wiped.at(0, 0, 0) == 0.0);
    REQUIRE(wiped.at(2, 0, 0) == odd.at(2, 0, 0));
    REQUIRE(wiped.at(0, 4, 0) == odd.at(0, 4, 0));

    REQUIRE_THROWS_AS(replace_image_columns(img, Matrix(5, 6), 2), ShapeMismatch);
}

TEST_CASE("hconcat stitches blocks side by side") {
    const Matrix a{{1.0}, {2.0}};
    const Matrix b{{3.0, 4.0}, {5.0, 6.0}};
    const Matrix m = hconcat({a, b});
    REQUIRE(m.rows() == 2);
    REQUIRE(m.cols() == 3);
    REQUIRE(m(0, 0) == 1.0);
    REQUIRE(m(1, 2) == 6.0);
    REQUIRE_THROWS_AS(hconcat({}), ShapeMismatch);
    REQUIRE_THROWS_AS(hconcat({a, Matrix(3, 1)}), ShapeMismatch);
}
