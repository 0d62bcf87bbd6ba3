#pragma once

/**
 * @file synth.hpp
 * @brief Deterministic dual-camera moire sample generator.
 *
 * Moire is produced physically: the ground-truth content is expanded to an
 * RGB-striped screen raster, then captured by two simulated lenses. The W
 * capture undersamples the subpixel grid (aliasing band) while the UW capture
 * covers twice the footprint with Nyquist-safe pre-blur, so it stays clean.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "dcid/color_matrix.hpp"
#include "dcid/geometry.hpp"
#include "dcid/image.hpp"

namespace dcid {

struct CaptureParams {
    Homography lens_homography;  // scene -> sensor frame (unit scale)
    double pre_blur_sigma = 0.0;  // lens PSF proxy, sensor-frame pixels
    double sensor_pitch = 1.0;    // scene pixels advanced per sensor pixel
    ColorMatrix color_cast;       // near identity
    double gamma_jitter = 1.0;    // in [0.9, 1.1]
};

struct SampleMeta {
    uint64_t seed = 0;
    Homography uw_to_w;  // UW pixel coords -> W pixel coords
    ColorMatrix w_color_cast, uw_color_cast;
    double w_pitch = 0, uw_pitch = 0;
    double w_sigma = 0, uw_sigma = 0;
    double w_gamma = 1, uw_gamma = 1;
};

struct Sample {
    RgbImage w_moire;  // I_m
    RgbImage uw;       // I_uw
    RgbImage gt;       // I_gt, same dims and geometry as w_moire
    SampleMeta meta;
};

struct GeneratorConfig {
    int gt_size = 256;
    int margin = 64;            // extra source border so W jitter stays on-screen
    int subpixel_factor = 4;
    double stripe_strength = 0.85;
    double gap_depth = 0.06;    // attenuation of the inter-pixel gap row

    // W capture: pitch stays in the aliasing band around the subpixel factor.
    double w_pitch_lo = 0.82, w_pitch_hi = 1.18;   // fraction of subpixel_factor
    double w_pitch_notch = 0.03;                  // excluded band around 1.0
    double w_rot_deg = 5.0;
    double w_translate_frac = 0.08;
    double w_proj = 2e-5;
    double w_blur_lo = 0.3, w_blur_hi = 0.6;

    // UW capture: >= 2x scene footprint, Nyquist-safe blur.
    double uw_ratio = 2.0, uw_ratio_jitter = 0.05;
    double uw_rot_deg = 2.0;
    double uw_translate_frac = 0.02;
    double uw_proj = 1e-5;
    double uw_nyquist_blur = 0.6;  // sigma = factor * pitch

    double cast_offdiag = 0.1;
    double gamma_lo = 0.9, gamma_hi = 1.1;

    // Source pool: PNGs from pool_dir when set, else procedural canvases.
    std::string pool_dir;
    int pool_count = 12;
    int pool_dim = 512;
    uint64_t pool_seed = 7;
};

GeneratorConfig load_generator_config(const std::string& path);
void save_generator_config(const std::string& path, const GeneratorConfig& cfg);

/// Expand each GT pixel into a factor x factor tile with vertical R|G|B
/// stripes (headroom-adaptive modulation: tile means reproduce the GT pixel)
/// plus a thin dark gap row for factor >= 4. Throws ArgumentError for
/// factor < 3.
RgbImage render_screen(const RgbImage& gt, int subpixel_factor, double stripe_strength = 0.85,
                       double gap_depth = 0.06);

/// warp(lens_homography) -> gaussian_blur(pre_blur_sigma) -> point-sample
/// every sensor_pitch pixels -> color cast -> gamma -> clamp.
/// out_h/out_w of 0 default to floor(dims/pitch). Throws GeometryError when
/// the sampling grid is empty.
RgbImage simulate_capture(const RgbImage& screen, const CaptureParams& params, int out_h = 0,
                          int out_w = 0);

/// Deterministic pure function of (seed, cfg); meta records the exact
/// UW->W homography, casts, pitches, sigmas and gammas.
Sample generate_sample(uint64_t seed, const GeneratorConfig& cfg);

/// Procedural source pool (gradients + shapes + thin lines), deterministic
/// in (pool_seed, index).
RgbImage make_pool_image(uint64_t pool_seed, int index, int dim);

/// Excess high-frequency energy of x relative to ref:
/// mean|x - blur(x,2)|^2 - mean|ref - blur(ref,2)|^2 over all components.
double moire_excess_energy(const RgbImage& x, const RgbImage& ref);

// Dataset layout: <root>/sample_%05d/{w.png, uw.png, gt.png, meta.json}.
std::string sample_dir_name(int index);
void save_sample(const std::string& dir, const Sample& s);
Sample load_sample(const std::string& dir);
std::vector<std::string> list_sample_dirs(const std::string& root);

/// Also keeps the clean source crop; used to exercise the raw-capture
/// preparation pipeline (writes src.png next to the triplet).
struct RawTriplet {
    Sample sample;
    RgbImage src;  // displayed source content, unaligned, no cast
};
RawTriplet generate_raw_triplet(uint64_t seed, const GeneratorConfig& cfg);

}  // namespace dcid
