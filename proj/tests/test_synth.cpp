#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include "dcid/errors.hpp"
#include "dcid/resample.hpp"
#include "dcid/rng.hpp"
#include "dcid/synth.hpp"

using namespace dcid;

namespace {

GeneratorConfig small_config() {
    GeneratorConfig cfg;
    cfg.gt_size = 96;
    cfg.margin = 32;
    cfg.pool_count = 4;
    cfg.pool_dim = 256;
    return cfg;
}

RgbImage random_gt(int h, int w, uint64_t seed) {
    RandomEngine rng(seed);
    RgbImage img(h, w);
    for (float& v : img.px) v = static_cast<float>(rng.uniform());
    return img;
}

/// Naive DFT magnitude of a real sequence at frequency bin k.
double dft_mag(const std::vector<double>& s, int k) {
    std::complex<double> acc(0, 0);
    const double w = -2.0 * 3.14159265358979323846 * k / s.size();
    for (size_t n = 0; n < s.size(); ++n)
        acc += s[n] * std::complex<double>(std::cos(w * n), std::sin(w * n));
    return std::abs(acc);
}

}  // namespace

TEST_CASE("render_screen stripes are channel-dominant and mean-preserving at mid gray") {
    RgbImage gt(1, 1, 0.5f);
    const RgbImage screen = render_screen(gt, 3);
    REQUIRE(screen.width == 3);
    REQUIRE(screen.height == 3);
    // Column c is dominated by channel c.
    for (int col = 0; col < 3; ++col)
        for (int c = 0; c < 3; ++c) {
            if (c == col)
                CHECK(screen.at(0, col, c) > screen.at(0, col, (c + 1) % 3));
            CHECK(screen.at(1, col, c) == screen.at(0, col, c));  // vertical stripes
        }
    // Tile mean reproduces the pixel exactly (no gap row at factor 3).
    for (int c = 0; c < 3; ++c) {
        double mean = 0;
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) mean += screen.at(y, x, c);
        CHECK(mean / 9.0 == doctest::Approx(0.5).epsilon(1e-6));
    }
}

TEST_CASE("render_screen constant gray gives equal block means") {
    const RgbImage gt(4, 4, 0.42f);
    const RgbImage screen = render_screen(gt, 4);
    const RgbImage means = resize(screen, 0.25, ResizeMode::Area);
    for (int c = 0; c < 3; ++c) {
        const float first = means.at(0, 0, c);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) CHECK(means.at(y, x, c) == doctest::Approx(first).epsilon(1e-6));
    }
}

TEST_CASE("render_screen block means match random GT within 0.02") {
    const RgbImage gt = random_gt(8, 8, 77);
    const RgbImage screen = render_screen(gt, 4);
    REQUIRE(screen.width == 32);
    // Brute-force block means per tile.
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c) {
                double mean = 0;
                for (int ty = 0; ty < 4; ++ty)
                    for (int tx = 0; tx < 4; ++tx) mean += screen.at(y * 4 + ty, x * 4 + tx, c);
                mean /= 16.0;
                CHECK(std::abs(mean - gt.at(y, x, c)) <= 0.02);
            }
}

TEST_CASE("render_screen rejects undersized subpixel factor") {
    const RgbImage gt(2, 2, 0.5f);
    CHECK_THROWS_AS(render_screen(gt, 2), ArgumentError);
}

TEST_CASE("simulate_capture identity pipeline reproduces the screen") {
    const RgbImage screen = render_screen(random_gt(6, 6, 5), 4);
    CaptureParams p;  // identity homography, pitch 1, sigma 0, identity cast, gamma 1
    const RgbImage out = simulate_capture(screen, p, screen.height, screen.width);
    double md = 0;
    for (size_t i = 0; i < out.px.size(); ++i) md = std::max<double>(md, std::abs(out.px[i] - screen.px[i]));
    CHECK(md <= 1e-6);
}

TEST_CASE("simulate_capture with nyquist-safe blur approximates the area-downsampled screen") {
    const RgbImage gt = random_gt(24, 24, 9);
    const RgbImage screen = render_screen(gt, 4);
    CaptureParams aliasing;
    aliasing.sensor_pitch = 4.3;
    aliasing.pre_blur_sigma = 0.5;
    CaptureParams clean = aliasing;
    clean.pre_blur_sigma = 4.3;  // >= pitch
    const int out = static_cast<int>(screen.width / 4.3);
    const RgbImage cap_alias = simulate_capture(screen, aliasing, out, out);
    const RgbImage cap_clean = simulate_capture(screen, clean, out, out);
    const RgbImage reference = resize_to(screen, out, out, ResizeMode::Area);

    auto residual_energy = [&](const RgbImage& x) {
        // High-frequency content relative to its own blur.
        const RgbImage low = gaussian_blur(x, 2.0);
        double e = 0;
        for (size_t i = 0; i < x.px.size(); ++i) {
            const double d = x.px[i] - low.px[i];
            e += d * d;
        }
        return e / x.px.size();
    };
    // The clean capture tracks the area-downsampled screen once the reference
    // is brought into the capture's band (its Gaussian in output pixels).
    const RgbImage reference_banded =
        gaussian_blur(reference, clean.pre_blur_sigma / clean.sensor_pitch);
    double err = 0;
    for (size_t i = 0; i < cap_clean.px.size(); ++i)
        err += std::abs(cap_clean.px[i] - reference_banded.px[i]);
    CHECK(err / cap_clean.px.size() < 0.05);
    // ...and carries far less high-frequency residual than the aliasing capture.
    CHECK(residual_energy(cap_clean) <= 0.1 * residual_energy(cap_alias));
}

TEST_CASE("simulate_capture off-period pitch aliases to a low beat frequency") {
    // Constant gray: all structure in the capture comes from the stripe grid.
    const RgbImage gt(32, 32, 0.5f);
    const RgbImage screen = render_screen(gt, 4);
    CaptureParams p;
    p.sensor_pitch = 4.35;
    p.pre_blur_sigma = 0.5;
    const int out = static_cast<int>(screen.width / p.sensor_pitch);
    const RgbImage cap = simulate_capture(screen, p, out, out);
    const RgbImage ref = gaussian_blur(cap, 3.0);

    // Row-mean residual profile of the red channel.
    std::vector<double> profile(cap.width, 0.0);
    for (int x = 0; x < cap.width; ++x) {
        double acc = 0;
        for (int y = 0; y < cap.height; ++y) acc += cap.at(y, x, 0) - ref.at(y, x, 0);
        profile[x] = acc / cap.height;
    }
    int best_k = 1;
    double best = 0;
    for (int k = 1; k <= static_cast<int>(profile.size()) / 2; ++k) {
        const double m = dft_mag(profile, k);
        if (m > best) {
            best = m;
            best_k = k;
        }
    }
    const double freq = static_cast<double>(best_k) / profile.size();  // cycles per output px
    // Dominant residual frequency sits below a quarter of the (aliased)
    // stripe frequency of ~1 cycle/px.
    CHECK(freq < 0.25);
}

TEST_CASE("generate_sample is byte-identical for equal seed and differs across seeds") {
    const GeneratorConfig cfg = small_config();
    const Sample a = generate_sample(11, cfg);
    const Sample b = generate_sample(11, cfg);
    const Sample c = generate_sample(12, cfg);
    CHECK(a.w_moire.px == b.w_moire.px);
    CHECK(a.uw.px == b.uw.px);
    CHECK(a.gt.px == b.gt.px);
    CHECK(a.meta.uw_to_w.h == b.meta.uw_to_w.h);
    CHECK(a.w_moire.px != c.w_moire.px);
}

TEST_CASE("generated samples satisfy the layout invariants") {
    const GeneratorConfig cfg = small_config();
    const Sample s = generate_sample(3, cfg);
    REQUIRE(s.gt.width == s.w_moire.width);
    REQUIRE(s.gt.height == s.w_moire.height);
    // Warping UW into the W frame must produce an all-valid mask.
    const WarpResult warped = warp_projective(s.uw, s.meta.uw_to_w, s.w_moire.height, s.w_moire.width);
    CHECK(warped.valid.all());
}

TEST_CASE("moire energy: W captures carry it, warped UW does not") {
    const GeneratorConfig cfg = small_config();
    double w_total = 0, uw_total = 0;
    const int n = 24;
    int w_positive = 0;
    for (int seed = 0; seed < n; ++seed) {
        const Sample s = generate_sample(1000 + seed, cfg);
        const double ew = moire_excess_energy(s.w_moire, s.gt);
        const WarpResult warped = warp_projective(s.uw, s.meta.uw_to_w, s.gt.height, s.gt.width);
        const double euw = moire_excess_energy(warped.image, s.gt);
        w_total += ew;
        uw_total += euw;
        if (ew > 0) ++w_positive;
    }
    CHECK(w_positive == n);                    // moire present in every W capture
    CHECK(uw_total / n <= 0.2 * (w_total / n));  // UW region carries at most 20%
    // Excess energy floors at zero: the blurry UW capture has no surplus
    // high-frequency content at all, the W capture has five times plenty.
    CHECK(w_total / n >= 5.0 * std::max(0.0, uw_total / n));
}

TEST_CASE("sample save/load round trip") {
    const GeneratorConfig cfg = small_config();
    const Sample s = generate_sample(21, cfg);
    const std::string dir = (std::filesystem::temp_directory_path() / "dcid_sample_rt").string();
    save_sample(dir, s);
    const Sample r = load_sample(dir);
    CHECK(r.meta.seed == s.meta.seed);
    CHECK(r.w_moire.width == s.w_moire.width);
    for (int i = 0; i < 9; ++i)
        CHECK(r.meta.uw_to_w.h[i] == doctest::Approx(s.meta.uw_to_w.h[i]).epsilon(1e-12));
    // PNG quantization: at most half a step of error.
    double md = 0;
    for (size_t i = 0; i < r.gt.px.size(); ++i) md = std::max<double>(md, std::abs(r.gt.px[i] - s.gt.px[i]));
    CHECK(md <= 0.5 / 255.0 + 1e-6);
    std::filesystem::remove_all(dir);
}

TEST_CASE("empty pool directory is a config error") {
    GeneratorConfig cfg = small_config();
    cfg.pool_dir = (std::filesystem::temp_directory_path() / "dcid_empty_pool").string();
    std::filesystem::create_directories(cfg.pool_dir);
    CHECK_THROWS_AS(generate_sample(0, cfg), ConfigError);
    std::filesystem::remove_all(cfg.pool_dir);
}
