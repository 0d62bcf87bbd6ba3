#include "dcid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include <json.hpp>

#include "dcid/errors.hpp"
#include "dcid/png_io.hpp"
#include "dcid/resample.hpp"
#include "dcid/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dcid {

namespace {

constexpr double kPi = 3.14159265358979323846;

Homography translation(double tx, double ty) {
    return Homography::from_array({1, 0, tx, 0, 1, ty, 0, 0, 1});
}

Homography rotation(double rad) {
    const double c = std::cos(rad), s = std::sin(rad);
    return Homography::from_array({c, -s, 0, s, c, 0, 0, 0, 1});
}

Homography projective(double px, double py) {
    return Homography::from_array({1, 0, 0, 0, 1, 0, px, py, 1});
}

Homography scaling(double s) {
    return Homography::from_array({s, 0, 0, 0, s, 0, 0, 0, 1});
}

/// sensor -> scene map for one lens: footprint of out_size*pitch sensor
/// units centered on the scene center, with rotation/projective/translation
/// perturbations.
Homography sensor_to_scene(double scene_center, double footprint, double rot_rad, double tx,
                           double ty, double px, double py) {
    return translation(scene_center + tx, scene_center + ty)
        .compose(rotation(rot_rad))
        .compose(projective(px, py))
        .compose(translation(-footprint / 2.0, -footprint / 2.0));
}

ColorMatrix draw_color_cast(RandomEngine& rng, double offdiag) {
    ColorMatrix m;
    for (int r = 0; r < 3; ++r) {
        double row[3];
        for (int c = 0; c < 3; ++c) row[c] = (r == c) ? 1.0 : rng.uniform(-offdiag, offdiag);
        const double s = row[0] + row[1] + row[2];
        const double target = std::clamp(s, 0.9, 1.1);
        for (int c = 0; c < 3; ++c) m.m[r * 3 + c] = row[c] * (target / s);
    }
    return m;
}

double draw_pitch_fraction(RandomEngine& rng, const GeneratorConfig& cfg) {
    const double lo_band = (1.0 - cfg.w_pitch_notch) - cfg.w_pitch_lo;
    const double hi_band = cfg.w_pitch_hi - (1.0 + cfg.w_pitch_notch);
    const double t = rng.uniform(0.0, lo_band + hi_band);
    return t < lo_band ? cfg.w_pitch_lo + t : (1.0 + cfg.w_pitch_notch) + (t - lo_band);
}

float sample_bilinear_clamped(const RgbImage& img, double x, double y, int c) {
    x = std::clamp(x, 0.0, img.width - 1.0);
    y = std::clamp(y, 0.0, img.height - 1.0);
    const int x0 = std::min(static_cast<int>(x), img.width - 2 < 0 ? 0 : img.width - 2);
    const int y0 = std::min(static_cast<int>(y), img.height - 2 < 0 ? 0 : img.height - 2);
    const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0, fy = y - y0;
    return static_cast<float>((1 - fy) * ((1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c)) +
                              fy * ((1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c)));
}

void apply_cast_gamma(RgbImage& img, const ColorMatrix& cast, double gamma) {
    const size_t n = static_cast<size_t>(img.height) * img.width;
    for (size_t i = 0; i < n; ++i) {
        const double in[3] = {img.px[i * 3], img.px[i * 3 + 1], img.px[i * 3 + 2]};
        for (int r = 0; r < 3; ++r) {
            double v = cast.m[r * 3] * in[0] + cast.m[r * 3 + 1] * in[1] + cast.m[r * 3 + 2] * in[2];
            v = std::pow(std::max(v, 0.0), gamma);
            img.px[i * 3 + r] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
}

struct LensDraw {
    Homography sensor_to_scene_h;
    CaptureParams params;
};

LensDraw draw_w_lens(RandomEngine& rng, const GeneratorConfig& cfg, double scene_center) {
    LensDraw d;
    const double pitch = cfg.subpixel_factor * draw_pitch_fraction(rng, cfg);
    const double rot = rng.uniform(-cfg.w_rot_deg, cfg.w_rot_deg) * kPi / 180.0;
    const double tmax = cfg.w_translate_frac * cfg.gt_size * pitch;
    const double tx = rng.uniform(-tmax, tmax), ty = rng.uniform(-tmax, tmax);
    const double px = rng.uniform(-cfg.w_proj, cfg.w_proj), py = rng.uniform(-cfg.w_proj, cfg.w_proj);
    d.sensor_to_scene_h =
        sensor_to_scene(scene_center, cfg.gt_size * pitch, rot, tx, ty, px, py);
    d.params.lens_homography = d.sensor_to_scene_h.inverse();
    d.params.sensor_pitch = pitch;
    d.params.pre_blur_sigma = rng.uniform(cfg.w_blur_lo, cfg.w_blur_hi);
    d.params.color_cast = draw_color_cast(rng, cfg.cast_offdiag);
    d.params.gamma_jitter = rng.uniform(cfg.gamma_lo, cfg.gamma_hi);
    return d;
}

LensDraw draw_uw_lens(RandomEngine& rng, const GeneratorConfig& cfg, double scene_center,
                      double w_pitch) {
    LensDraw d;
    const double ratio = cfg.uw_ratio * rng.uniform(1.0 - cfg.uw_ratio_jitter, 1.0 + cfg.uw_ratio_jitter);
    const double pitch = w_pitch * ratio;
    const double rot = rng.uniform(-cfg.uw_rot_deg, cfg.uw_rot_deg) * kPi / 180.0;
    const double tmax = cfg.uw_translate_frac * cfg.gt_size * pitch;
    const double tx = rng.uniform(-tmax, tmax), ty = rng.uniform(-tmax, tmax);
    const double px = rng.uniform(-cfg.uw_proj, cfg.uw_proj), py = rng.uniform(-cfg.uw_proj, cfg.uw_proj);
    d.sensor_to_scene_h =
        sensor_to_scene(scene_center, cfg.gt_size * pitch, rot, tx, ty, px, py);
    d.params.lens_homography = d.sensor_to_scene_h.inverse();
    d.params.sensor_pitch = pitch;
    d.params.pre_blur_sigma = cfg.uw_nyquist_blur * pitch;
    d.params.color_cast = draw_color_cast(rng, cfg.cast_offdiag);
    d.params.gamma_jitter = rng.uniform(cfg.gamma_lo, cfg.gamma_hi);
    return d;
}

json homography_json(const Homography& h) { return json(std::vector<double>(h.h.begin(), h.h.end())); }
json matrix_json(const ColorMatrix& m) { return json(std::vector<double>(m.m.begin(), m.m.end())); }

Homography homography_from_json(const json& j) {
    std::array<double, 9> a{};
    for (int i = 0; i < 9; ++i) a[i] = j.at(i).get<double>();
    return Homography::from_array(a);
}

ColorMatrix matrix_from_json(const json& j) {
    ColorMatrix m;
    for (int i = 0; i < 9; ++i) m.m[i] = j.at(i).get<double>();
    return m;
}

}  // namespace

RgbImage render_screen(const RgbImage& gt, int subpixel_factor, double stripe_strength,
                       double gap_depth) {
    if (subpixel_factor < 3) throw ArgumentError("render_screen: subpixel_factor must be >= 3");
    const int f = subpixel_factor;
    const int64_t out_elems = static_cast<int64_t>(gt.height) * f * gt.width * f * 3;
    if (out_elems > (int64_t(1) << 31)) throw ArgumentError("render_screen: output too large");

    // Column class layout and per-class counts (thirds, remainder to red).
    std::vector<int> stripe_of(f);
    int counts[3] = {0, 0, 0};
    for (int tx = 0; tx < f; ++tx) {
        stripe_of[tx] = std::min(2, tx * 3 / f);
        ++counts[stripe_of[tx]];
    }

    RgbImage out(gt.height * f, gt.width * f);
    for (int y = 0; y < gt.height; ++y) {
        for (int x = 0; x < gt.width; ++x) {
            float g[3], up[3], down[3];
            for (int c = 0; c < 3; ++c) {
                g[c] = gt.at(y, x, c);
                // Largest zero-mean stripe modulation that never clips:
                // +s*(f-n) on the channel's own columns, -s*n elsewhere,
                // so the column-count weighting cancels exactly.
                const float s = static_cast<float>(stripe_strength) *
                                std::min((1.0f - g[c]) / (f - counts[c]), g[c] / counts[c]);
                up[c] = s * (f - counts[c]);
                down[c] = s * counts[c];
            }
            for (int ty = 0; ty < f; ++ty) {
                const float gap = (f >= 4 && ty == f - 1) ? 1.0f - static_cast<float>(gap_depth) : 1.0f;
                for (int tx = 0; tx < f; ++tx) {
                    const int stripe = stripe_of[tx];
                    for (int c = 0; c < 3; ++c) {
                        const float v = c == stripe ? g[c] + up[c] : g[c] - down[c];
                        out.at(y * f + ty, x * f + tx, c) = v * gap;
                    }
                }
            }
        }
    }
    return out;
}

RgbImage simulate_capture(const RgbImage& screen, const CaptureParams& params, int out_h,
                          int out_w) {
    const double pitch = params.sensor_pitch;
    if (pitch <= 0) throw ArgumentError("simulate_capture: sensor_pitch must be > 0");
    if (out_h == 0) out_h = static_cast<int>(screen.height / pitch);
    if (out_w == 0) out_w = static_cast<int>(screen.width / pitch);
    if (out_h < 1 || out_w < 1) throw GeometryError("simulate_capture: empty sampling grid");

    // Sensor-frame canvas large enough for the sampled footprint.
    const int canvas_h = static_cast<int>(std::ceil((out_h - 1) * pitch)) + 2;
    const int canvas_w = static_cast<int>(std::ceil((out_w - 1) * pitch)) + 2;
    WarpResult warped = warp_projective(screen, params.lens_homography, canvas_h, canvas_w);
    const RgbImage blurred = gaussian_blur(warped.image, params.pre_blur_sigma);

    RgbImage out(out_h, out_w);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = sample_bilinear_clamped(blurred, x * pitch, y * pitch, c);
    apply_cast_gamma(out, params.color_cast, params.gamma_jitter);
    return out;
}

RgbImage make_pool_image(uint64_t pool_seed, int index, int dim) {
    RandomEngine rng(mix_seed(pool_seed, static_cast<uint64_t>(index), 0x700Cu));
    RgbImage img(dim, dim);

    // Smooth gradient background between four random midtone corners.
    float corner[4][3];
    for (auto& c : corner)
        for (int k = 0; k < 3; ++k) c[k] = static_cast<float>(rng.uniform(0.15, 0.85));
    for (int y = 0; y < dim; ++y) {
        const float fy = static_cast<float>(y) / (dim - 1);
        for (int x = 0; x < dim; ++x) {
            const float fx = static_cast<float>(x) / (dim - 1);
            for (int k = 0; k < 3; ++k)
                img.at(y, x, k) = (1 - fy) * ((1 - fx) * corner[0][k] + fx * corner[1][k]) +
                                  fy * ((1 - fx) * corner[2][k] + fx * corner[3][k]);
        }
    }

    auto draw_color = [&]() {
        float c[3];
        for (int k = 0; k < 3; ++k) c[k] = static_cast<float>(rng.uniform(0.1, 0.9));
        return std::array<float, 3>{c[0], c[1], c[2]};
    };

    const int n_shapes = 45 + static_cast<int>(rng.randint(30));
    for (int s = 0; s < n_shapes; ++s) {
        const auto col = draw_color();
        const int kind = static_cast<int>(rng.randint(3));
        if (kind == 0) {  // axis-aligned rectangle
            const int w = 8 + static_cast<int>(rng.randint(dim / 4));
            const int h = 8 + static_cast<int>(rng.randint(dim / 4));
            const int x0 = static_cast<int>(rng.randint(std::max(1, dim - w)));
            const int y0 = static_cast<int>(rng.randint(std::max(1, dim - h)));
            for (int y = y0; y < std::min(dim, y0 + h); ++y)
                for (int x = x0; x < std::min(dim, x0 + w); ++x)
                    for (int k = 0; k < 3; ++k) img.at(y, x, k) = col[k];
        } else if (kind == 1) {  // circle
            const double r = 5 + rng.uniform() * dim / 8;
            const double cx = rng.uniform(r, dim - r), cy = rng.uniform(r, dim - r);
            const int y0 = std::max(0, static_cast<int>(cy - r)), y1 = std::min(dim - 1, static_cast<int>(cy + r));
            for (int y = y0; y <= y1; ++y) {
                const double half = std::sqrt(std::max(0.0, r * r - (y - cy) * (y - cy)));
                for (int x = std::max(0, static_cast<int>(cx - half));
                     x <= std::min(dim - 1, static_cast<int>(cx + half)); ++x)
                    for (int k = 0; k < 3; ++k) img.at(y, x, k) = col[k];
            }
        } else {  // thick line segment
            const double x0 = rng.uniform(0, dim - 1), y0 = rng.uniform(0, dim - 1);
            const double x1 = rng.uniform(0, dim - 1), y1 = rng.uniform(0, dim - 1);
            const int thick = 1 + static_cast<int>(rng.randint(4));
            const int steps = static_cast<int>(std::hypot(x1 - x0, y1 - y0)) * 2 + 1;
            for (int t = 0; t <= steps; ++t) {
                const double f = static_cast<double>(t) / steps;
                const int cx = static_cast<int>(x0 + f * (x1 - x0));
                const int cy = static_cast<int>(y0 + f * (y1 - y0));
                for (int dy = -thick / 2; dy <= thick / 2; ++dy)
                    for (int dx = -thick / 2; dx <= thick / 2; ++dx) {
                        const int px = cx + dx, py = cy + dy;
                        if (px >= 0 && px < dim && py >= 0 && py < dim)
                            for (int k = 0; k < 3; ++k) img.at(py, px, k) = col[k];
                    }
            }
        }
    }
    return img;
}

namespace {

std::vector<RgbImage> build_pool_uncached(const GeneratorConfig& cfg) {
    std::vector<RgbImage> pool;
    if (!cfg.pool_dir.empty()) {
        std::vector<std::string> files;
        if (fs::is_directory(cfg.pool_dir)) {
            for (const auto& e : fs::directory_iterator(cfg.pool_dir))
                if (e.path().extension() == ".png") files.push_back(e.path().string());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) pool.push_back(load_png(f));
        if (pool.empty()) throw ConfigError("generator: empty GT pool in " + cfg.pool_dir);
        return pool;
    }
    if (cfg.pool_count < 1) throw ConfigError("generator: pool_count must be >= 1");
    for (int i = 0; i < cfg.pool_count; ++i)
        pool.push_back(make_pool_image(cfg.pool_seed, i, cfg.pool_dim));
    return pool;
}

/// The pool only depends on the pool settings; memoize so per-sample calls
/// don't rebuild it.
const std::vector<RgbImage>& build_pool(const GeneratorConfig& cfg) {
    static std::mutex mu;
    static std::map<std::tuple<std::string, int, int, uint64_t>, std::shared_ptr<std::vector<RgbImage>>> cache;
    const auto key = std::make_tuple(cfg.pool_dir, cfg.pool_count, cfg.pool_dim, cfg.pool_seed);
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_shared<std::vector<RgbImage>>(build_pool_uncached(cfg))).first;
    return *it->second;
}

RgbImage crop(const RgbImage& img, int y0, int x0, int h, int w) {
    RgbImage out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

}  // namespace

RawTriplet generate_raw_triplet(uint64_t seed, const GeneratorConfig& cfg) {
    const std::vector<RgbImage>& pool = build_pool(cfg);
    RandomEngine rng(mix_seed(0xDC1Du, seed));

    const int src_size = cfg.gt_size + 2 * cfg.margin;
    const int f = cfg.subpixel_factor;
    const RgbImage& base = pool[rng.randint(static_cast<int64_t>(pool.size()))];
    if (base.width < src_size || base.height < src_size)
        throw ConfigError("generator: pool image smaller than gt_size + 2*margin");
    const int ox = static_cast<int>(rng.randint(base.width - src_size + 1));
    const int oy = static_cast<int>(rng.randint(base.height - src_size + 1));
    const RgbImage src = crop(base, oy, ox, src_size, src_size);

    const RgbImage screen = render_screen(src, f, cfg.stripe_strength, cfg.gap_depth);
    const double scene_center = src_size * f / 2.0;

    const LensDraw w = draw_w_lens(rng, cfg, scene_center);
    const LensDraw uw = draw_uw_lens(rng, cfg, scene_center, w.params.sensor_pitch);

    RawTriplet out;
    Sample& s = out.sample;
    s.w_moire = simulate_capture(screen, w.params, cfg.gt_size, cfg.gt_size);
    s.uw = simulate_capture(screen, uw.params, cfg.gt_size, cfg.gt_size);

    // Ground truth: the source content resampled through the exact W capture
    // geometry (sharp, no stripes), sharing W's color state.
    s.gt = RgbImage(cfg.gt_size, cfg.gt_size);
    const double off = (f - 1) / 2.0;
    for (int y = 0; y < cfg.gt_size; ++y) {
        for (int x = 0; x < cfg.gt_size; ++x) {
            double sx, sy;
            w.sensor_to_scene_h.apply(x * w.params.sensor_pitch, y * w.params.sensor_pitch, &sx, &sy);
            for (int c = 0; c < 3; ++c)
                s.gt.at(y, x, c) = sample_bilinear_clamped(src, (sx - off) / f, (sy - off) / f, c);
        }
    }
    apply_cast_gamma(s.gt, w.params.color_cast, w.params.gamma_jitter);

    // UW px -> W px: through the shared scene frame.
    const Homography scene_from_uw = uw.sensor_to_scene_h.compose(scaling(uw.params.sensor_pitch));
    const Homography w_from_scene = scaling(1.0 / w.params.sensor_pitch).compose(w.params.lens_homography);
    s.meta.uw_to_w = w_from_scene.compose(scene_from_uw);
    s.meta.seed = seed;
    s.meta.w_color_cast = w.params.color_cast;
    s.meta.uw_color_cast = uw.params.color_cast;
    s.meta.w_pitch = w.params.sensor_pitch;
    s.meta.uw_pitch = uw.params.sensor_pitch;
    s.meta.w_sigma = w.params.pre_blur_sigma;
    s.meta.uw_sigma = uw.params.pre_blur_sigma;
    s.meta.w_gamma = w.params.gamma_jitter;
    s.meta.uw_gamma = uw.params.gamma_jitter;

    // The UW field of view must strictly contain the W footprint.
    const Homography w_to_uw = s.meta.uw_to_w.inverse();
    const double corners[4][2] = {{0, 0},
                                  {cfg.gt_size - 1.0, 0},
                                  {0, cfg.gt_size - 1.0},
                                  {cfg.gt_size - 1.0, cfg.gt_size - 1.0}};
    for (const auto& corner : corners) {
        double ux, uy;
        w_to_uw.apply(corner[0], corner[1], &ux, &uy);
        if (ux < 1.0 || uy < 1.0 || ux > cfg.gt_size - 2.0 || uy > cfg.gt_size - 2.0)
            throw GeometryError("generator: UW field of view does not contain the W frame");
    }

    out.src = src;
    return out;
}

Sample generate_sample(uint64_t seed, const GeneratorConfig& cfg) {
    return generate_raw_triplet(seed, cfg).sample;
}

double moire_excess_energy(const RgbImage& x, const RgbImage& ref) {
    auto hf_energy = [](const RgbImage& img) {
        const RgbImage low = gaussian_blur(img, 2.0);
        double acc = 0;
        for (size_t i = 0; i < img.px.size(); ++i) {
            const double d = img.px[i] - low.px[i];
            acc += d * d;
        }
        return acc / img.px.size();
    };
    return hf_energy(x) - hf_energy(ref);
}

std::string sample_dir_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%05d", index);
    return buf;
}

void save_sample(const std::string& dir, const Sample& s) {
    fs::create_directories(dir);
    save_png(dir + "/w.png", s.w_moire);
    save_png(dir + "/uw.png", s.uw);
    save_png(dir + "/gt.png", s.gt);
    json j;
    j["seed"] = s.meta.seed;
    j["uw_to_w_homography"] = homography_json(s.meta.uw_to_w);
    j["w_color_cast"] = matrix_json(s.meta.w_color_cast);
    j["uw_color_cast"] = matrix_json(s.meta.uw_color_cast);
    j["w_pitch"] = s.meta.w_pitch;
    j["uw_pitch"] = s.meta.uw_pitch;
    j["w_sigma"] = s.meta.w_sigma;
    j["uw_sigma"] = s.meta.uw_sigma;
    j["w_gamma"] = s.meta.w_gamma;
    j["uw_gamma"] = s.meta.uw_gamma;
    std::ofstream f(dir + "/meta.json");
    f << j.dump(2) << "\n";
}

Sample load_sample(const std::string& dir) {
    Sample s;
    s.w_moire = load_png(dir + "/w.png");
    s.uw = load_png(dir + "/uw.png");
    s.gt = load_png(dir + "/gt.png");
    std::ifstream f(dir + "/meta.json");
    if (!f) throw IoError("missing meta.json in " + dir);
    json j;
    f >> j;
    s.meta.seed = j.value("seed", 0ULL);
    if (j.contains("uw_to_w_homography")) s.meta.uw_to_w = homography_from_json(j["uw_to_w_homography"]);
    if (j.contains("w_color_cast")) s.meta.w_color_cast = matrix_from_json(j["w_color_cast"]);
    if (j.contains("uw_color_cast")) s.meta.uw_color_cast = matrix_from_json(j["uw_color_cast"]);
    s.meta.w_pitch = j.value("w_pitch", 0.0);
    s.meta.uw_pitch = j.value("uw_pitch", 0.0);
    s.meta.w_sigma = j.value("w_sigma", 0.0);
    s.meta.uw_sigma = j.value("uw_sigma", 0.0);
    s.meta.w_gamma = j.value("w_gamma", 1.0);
    s.meta.uw_gamma = j.value("uw_gamma", 1.0);
    return s;
}

std::vector<std::string> list_sample_dirs(const std::string& root) {
    std::vector<std::string> dirs;
    if (!fs::is_directory(root)) return dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory() && e.path().filename().string().rfind("sample_", 0) == 0)
            dirs.push_back(e.path().string());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

namespace {

void config_to_json(const GeneratorConfig& c, json& j) {
    j["gt_size"] = c.gt_size;
    j["margin"] = c.margin;
    j["subpixel_factor"] = c.subpixel_factor;
    j["stripe_strength"] = c.stripe_strength;
    j["gap_depth"] = c.gap_depth;
    j["w_pitch_lo"] = c.w_pitch_lo;
    j["w_pitch_hi"] = c.w_pitch_hi;
    j["w_pitch_notch"] = c.w_pitch_notch;
    j["w_rot_deg"] = c.w_rot_deg;
    j["w_translate_frac"] = c.w_translate_frac;
    j["w_proj"] = c.w_proj;
    j["w_blur_lo"] = c.w_blur_lo;
    j["w_blur_hi"] = c.w_blur_hi;
    j["uw_ratio"] = c.uw_ratio;
    j["uw_ratio_jitter"] = c.uw_ratio_jitter;
    j["uw_rot_deg"] = c.uw_rot_deg;
    j["uw_translate_frac"] = c.uw_translate_frac;
    j["uw_proj"] = c.uw_proj;
    j["uw_nyquist_blur"] = c.uw_nyquist_blur;
    j["cast_offdiag"] = c.cast_offdiag;
    j["gamma_lo"] = c.gamma_lo;
    j["gamma_hi"] = c.gamma_hi;
    j["pool_dir"] = c.pool_dir;
    j["pool_count"] = c.pool_count;
    j["pool_dim"] = c.pool_dim;
    j["pool_seed"] = c.pool_seed;
}

void config_from_json(const json& j, GeneratorConfig& c) {
    c.gt_size = j.value("gt_size", c.gt_size);
    c.margin = j.value("margin", c.margin);
    c.subpixel_factor = j.value("subpixel_factor", c.subpixel_factor);
    c.stripe_strength = j.value("stripe_strength", c.stripe_strength);
    c.gap_depth = j.value("gap_depth", c.gap_depth);
    c.w_pitch_lo = j.value("w_pitch_lo", c.w_pitch_lo);
    c.w_pitch_hi = j.value("w_pitch_hi", c.w_pitch_hi);
    c.w_pitch_notch = j.value("w_pitch_notch", c.w_pitch_notch);
    c.w_rot_deg = j.value("w_rot_deg", c.w_rot_deg);
    c.w_translate_frac = j.value("w_translate_frac", c.w_translate_frac);
    c.w_proj = j.value("w_proj", c.w_proj);
    c.w_blur_lo = j.value("w_blur_lo", c.w_blur_lo);
    c.w_blur_hi = j.value("w_blur_hi", c.w_blur_hi);
    c.uw_ratio = j.value("uw_ratio", c.uw_ratio);
    c.uw_ratio_jitter = j.value("uw_ratio_jitter", c.uw_ratio_jitter);
    c.uw_rot_deg = j.value("uw_rot_deg", c.uw_rot_deg);
    c.uw_translate_frac = j.value("uw_translate_frac", c.uw_translate_frac);
    c.uw_proj = j.value("uw_proj", c.uw_proj);
    c.uw_nyquist_blur = j.value("uw_nyquist_blur", c.uw_nyquist_blur);
    c.cast_offdiag = j.value("cast_offdiag", c.cast_offdiag);
    c.gamma_lo = j.value("gamma_lo", c.gamma_lo);
    c.gamma_hi = j.value("gamma_hi", c.gamma_hi);
    c.pool_dir = j.value("pool_dir", c.pool_dir);
    c.pool_count = j.value("pool_count", c.pool_count);
    c.pool_dim = j.value("pool_dim", c.pool_dim);
    c.pool_seed = j.value("pool_seed", c.pool_seed);
}

}  // namespace

GeneratorConfig load_generator_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open generator config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("generator config parse error in " + path + ": " + e.what());
    }
    GeneratorConfig c;
    config_from_json(j, c);
    return c;
}

void save_generator_config(const std::string& path, const GeneratorConfig& cfg) {
    json j;
    config_to_json(cfg, j);
    std::ofstream f(path);
    if (!f) throw IoError("cannot write generator config: " + path);
    f << j.dump(2) << "\n";
}

}  // namespace dcid
