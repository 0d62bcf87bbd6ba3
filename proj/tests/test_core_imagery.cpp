#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "dcid/errors.hpp"
#include "dcid/geometry.hpp"
#include "dcid/image.hpp"
#include "dcid/png_io.hpp"
#include "dcid/resample.hpp"
#include "dcid/rng.hpp"

using namespace dcid;

namespace {

RgbImage random_image(int h, int w, uint64_t seed) {
    RandomEngine rng(seed);
    RgbImage img(h, w);
    for (float& v : img.px) v = static_cast<float>(rng.uniform());
    return img;
}

RgbImage quantize(const RgbImage& img) {
    RgbImage out = img;
    for (float& v : out.px) v = quantize_u8(v) / 255.0f;
    return out;
}

double max_abs_diff(const RgbImage& a, const RgbImage& b) {
    double m = 0;
    for (size_t i = 0; i < a.px.size(); ++i) m = std::max(m, std::abs(double(a.px[i]) - b.px[i]));
    return m;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("png round-trip is exact on quantized pixels") {
    const RgbImage img = quantize(random_image(13, 9, 42));
    const std::string path = temp_path("dcid_roundtrip.png");
    save_png(path, img);
    const RgbImage back = load_png(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    CHECK(max_abs_diff(img, back) == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("png range endpoints") {
    RgbImage img(2, 2, 1.0f);
    img.at(1, 1, 2) = 0.0f;
    const std::string path = temp_path("dcid_endpoints.png");
    save_png(path, img);
    const RgbImage back = load_png(path);
    CHECK(back.at(0, 0, 0) == 1.0f);
    CHECK(back.at(1, 1, 2) == 0.0f);
    std::remove(path.c_str());
}

TEST_CASE("png reference fixture decodes to known bytes") {
    // Written by an independent encoder; bytes follow (x*37 + y*101 + c*53) % 256.
    const RgbImage img = load_png(std::string(DCID_TEST_FIXTURES) + "/ref8x8.png");
    REQUIRE(img.width == 8);
    REQUIRE(img.height == 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c) {
                const int expect = (x * 37 + y * 101 + c * 53) % 256;
                CHECK(std::lround(img.at(y, x, c) * 255.0f) == expect);
            }
}

TEST_CASE("png errors carry path context") {
    CHECK_THROWS_AS(load_png("/nonexistent/nope.png"), IoError);
    const std::string path = temp_path("dcid_not_png.png");
    FILE* f = std::fopen(path.c_str(), "wb");
    std::fputs("not a png", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_png(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("resize preserves constants") {
    const RgbImage img(16, 16, 0.37f);
    for (ResizeMode mode : {ResizeMode::Area, ResizeMode::Bilinear}) {
        const RgbImage out = resize(img, 0.5, mode);
        REQUIRE(out.width == 8);
        for (float v : out.px) CHECK(v == doctest::Approx(0.37f).epsilon(1e-6));
    }
}

TEST_CASE("resize factor 1 is identity") {
    const RgbImage img = random_image(12, 10, 3);
    CHECK(max_abs_diff(resize(img, 1.0, ResizeMode::Area), img) == 0.0);
    CHECK(max_abs_diff(resize(img, 1.0, ResizeMode::Bilinear), img) == 0.0);
}

TEST_CASE("area resize halves by exact 2x2 mean") {
    RgbImage img(2, 2);
    for (int c = 0; c < 3; ++c) {
        img.at(0, 0, c) = 0.0f;
        img.at(0, 1, c) = 0.0f;
        img.at(1, 0, c) = 1.0f;
        img.at(1, 1, c) = 1.0f;
    }
    const RgbImage out = resize(img, 0.5, ResizeMode::Area);
    REQUIRE(out.width == 1);
    for (int c = 0; c < 3; ++c) CHECK(out.at(0, 0, c) == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("area resize matches brute-force block means on a ramp") {
    RgbImage img(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = (y * 16 + x) / 255.0f;
    const RgbImage out = resize(img, 0.25, ResizeMode::Area);
    REQUIRE(out.width == 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            double mean = 0;
            for (int dy = 0; dy < 4; ++dy)
                for (int dx = 0; dx < 4; ++dx) mean += img.at(y * 4 + dy, x * 4 + dx, 0);
            mean /= 16.0;
            for (int c = 0; c < 3; ++c) CHECK(out.at(y, x, c) == doctest::Approx(mean).epsilon(1e-6));
        }
}

TEST_CASE("resize rejects non-positive factor") {
    const RgbImage img(8, 8, 0.5f);
    CHECK_THROWS_AS(resize(img, 0.0, ResizeMode::Area), ArgumentError);
    CHECK_THROWS_AS(resize(img, -1.0, ResizeMode::Area), ArgumentError);
}

TEST_CASE("gaussian blur sigma 0 is the identity") {
    const RgbImage img = random_image(9, 9, 5);
    CHECK(max_abs_diff(gaussian_blur(img, 0.0), img) == 0.0);
    CHECK_THROWS_AS(gaussian_blur(img, -0.5), ArgumentError);
}

TEST_CASE("gaussian blur preserves constants") {
    const RgbImage img(17, 13, 0.63f);
    const RgbImage out = gaussian_blur(img, 2.7);
    CHECK(max_abs_diff(out, img) < 1e-6);
}

TEST_CASE("gaussian blur impulse matches the closed-form gaussian") {
    RgbImage img(33, 33, 0.0f);
    for (int c = 0; c < 3; ++c) img.at(16, 16, c) = 1.0f;
    const double sigma = 2.0;
    const RgbImage out = gaussian_blur(img, sigma);
    for (int y = 0; y < 33; ++y)
        for (int x = 0; x < 33; ++x) {
            const double dx = x - 16.0, dy = y - 16.0;
            const double g = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) /
                             (2 * 3.14159265358979323846 * sigma * sigma);
            CHECK(std::abs(out.at(y, x, 0) - g) < 1e-4);
        }
}

TEST_CASE("gaussian blur commutes with channel permutation") {
    const RgbImage img = random_image(12, 12, 9);
    RgbImage swapped = img;
    for (size_t i = 0; i < img.px.size(); i += 3) std::swap(swapped.px[i], swapped.px[i + 2]);
    RgbImage a = gaussian_blur(img, 1.3);
    for (size_t i = 0; i < a.px.size(); i += 3) std::swap(a.px[i], a.px[i + 2]);
    const RgbImage b = gaussian_blur(swapped, 1.3);
    CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("homography construction and inversion") {
    CHECK_THROWS_AS(Homography::from_array({1, 0, 0, 0, 1, 0, 0, 0, 0}), GeometryError);
    CHECK_THROWS_AS(Homography::from_array({1, 1, 0, 1, 1, 0, 0, 0, 1}), GeometryError);
    const Homography h = Homography::from_array({2, 0.1, 3, -0.2, 1.5, -4, 1e-4, -2e-4, 1});
    const Homography prod = h.compose(h.inverse());
    for (int i = 0; i < 9; ++i)
        CHECK(prod.h[i] == doctest::Approx(i % 4 == 0 ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("warp with identity homography is exact with all-valid mask") {
    const RgbImage img = random_image(20, 24, 11);
    const WarpResult r = warp_projective(img, Homography::identity(), 20, 24);
    CHECK(max_abs_diff(r.image, img) == 0.0);
    CHECK(r.valid.all());
}

TEST_CASE("warp by integer translation is an exact shift on the overlap") {
    const RgbImage img = random_image(16, 16, 13);
    const Homography t = Homography::from_array({1, 0, 3, 0, 1, 2, 0, 0, 1});
    const WarpResult r = warp_projective(img, t, 16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const bool inside = x >= 3 && y >= 2;
            CHECK(static_cast<bool>(r.valid.at(y, x)) == inside);
            if (inside)
                for (int c = 0; c < 3; ++c) CHECK(r.image.at(y, x, c) == img.at(y - 2, x - 3, c));
        }
}

TEST_CASE("warp rotation round-trip error is small on the valid region") {
    const RgbImage img = random_image(64, 64, 17);
    const RgbImage smooth = gaussian_blur(img, 1.5);  // textured but band-limited
    const double th = 10.0 * 3.14159265358979323846 / 180.0;
    auto rot_about_center = [&](double a) {
        const double c = std::cos(a), s = std::sin(a), cx = 31.5, cy = 31.5;
        return Homography::from_array(
            {c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy, 0, 0, 1});
    };
    const WarpResult fwd = warp_projective(smooth, rot_about_center(th), 64, 64);
    const WarpResult back = warp_projective(fwd.image, rot_about_center(-th), 64, 64);
    double err = 0;
    int n = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            // doubly-valid: the forward sample stayed inside, too
            double ix, iy;
            rot_about_center(th).apply(x, y, &ix, &iy);
            if (!back.valid.at(y, x) || ix < 0 || iy < 0 || ix > 63 || iy > 63) continue;
            for (int c = 0; c < 3; ++c) err += std::abs(back.image.at(y, x, c) - smooth.at(y, x, c));
            n += 3;
        }
    REQUIRE(n > 1000);
    CHECK(err / n <= 0.02);
}

TEST_CASE("warp validity mask equals the back-projection rule") {
    const RgbImage img = random_image(24, 24, 19);
    const Homography h =
        Homography::from_array({1.05, 0.02, -3.7, -0.04, 0.97, 5.2, 1e-4, -5e-5, 1});
    const WarpResult r = warp_projective(img, h, 30, 30);
    const Homography inv = h.inverse();
    for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 30; ++x) {
            double sx, sy;
            inv.apply(x, y, &sx, &sy);
            const bool inside = sx >= 0 && sy >= 0 && sx <= 23 && sy <= 23;
            CHECK(static_cast<bool>(r.valid.at(y, x)) == inside);
        }
}

TEST_CASE("srgb to lab hits the standard anchors") {
    RgbImage img(1, 3);
    for (int c = 0; c < 3; ++c) {
        img.at(0, 0, c) = 1.0f;   // white
        img.at(0, 1, c) = 0.0f;   // black
        img.at(0, 2, c) = 0.5f;   // mid gray
    }
    const LabImage lab = srgb_to_lab(img);
    CHECK(lab.at(0, 0, 0) == doctest::Approx(100.0).epsilon(1e-4));
    CHECK(std::abs(lab.at(0, 0, 1)) <= 0.01);
    CHECK(std::abs(lab.at(0, 0, 2)) <= 0.01);
    CHECK(lab.at(0, 1, 0) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(lab.at(0, 1, 1) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(lab.at(0, 1, 2) == doctest::Approx(0.0).epsilon(1e-6));
    // Independent colorimetry oracle (skimage rgb2lab): L = 53.3889647.
    CHECK(std::abs(lab.at(0, 2, 0) - 53.3889647) <= 0.05);
}

TEST_CASE("srgb <-> lab round trip within 1e-3 for in-gamut pixels") {
    const RgbImage img = random_image(8, 8, 23);
    const RgbImage back = lab_to_srgb(srgb_to_lab(img));
    CHECK(max_abs_diff(back, img) <= 1e-3);
}
