#include "dcid/keypoints.hpp"

#include <algorithm>
#include <cmath>

#include "dcid/errors.hpp"
#include "dcid/resample.hpp"

namespace dcid {

namespace {

constexpr int kPatchRadius = 4;   // 8x8 descriptor support
constexpr int kBorder = 6;        // detection margin on the downsampled grid
constexpr double kMinSpacing = 2.0;
constexpr double kResponseEps = 1e-8;

/// min-eigenvalue (Shi-Tomasi) corner response of the structure tensor.
GrayImage corner_response(const GrayImage& g) {
    const int h = g.height, w = g.width;
    GrayImage ix(h, w), iy(h, w);
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            ix.at(y, x) = 0.5f * (g.at(y, x + 1) - g.at(y, x - 1));
            iy.at(y, x) = 0.5f * (g.at(y + 1, x) - g.at(y - 1, x));
        }
    GrayImage xx(h, w), yy(h, w), xy(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            xx.at(y, x) = ix.at(y, x) * ix.at(y, x);
            yy.at(y, x) = iy.at(y, x) * iy.at(y, x);
            xy.at(y, x) = ix.at(y, x) * iy.at(y, x);
        }
    xx = gaussian_blur(xx, 1.0);
    yy = gaussian_blur(yy, 1.0);
    xy = gaussian_blur(xy, 1.0);
    GrayImage r(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double a = xx.at(y, x), b = yy.at(y, x), c = xy.at(y, x);
            const double tr = a + b;
            const double d = std::sqrt(std::max(0.0, (a - b) * (a - b) + 4 * c * c));
            r.at(y, x) = static_cast<float>(0.5 * (tr - d));
        }
    return r;
}

float sample_gray(const GrayImage& g, double x, double y) {
    x = std::clamp(x, 0.0, g.width - 1.0);
    y = std::clamp(y, 0.0, g.height - 1.0);
    const int x0 = std::min(static_cast<int>(x), g.width - 2);
    const int y0 = std::min(static_cast<int>(y), g.height - 2);
    const double fx = x - x0, fy = y - y0;
    return static_cast<float>((1 - fy) * ((1 - fx) * g.at(y0, x0) + fx * g.at(y0, x0 + 1)) +
                              fy * ((1 - fx) * g.at(y0 + 1, x0) + fx * g.at(y0 + 1, x0 + 1)));
}

/// Mean-free, L2-normalized 8x8 patch; false when the patch is flat.
bool patch_descriptor(const GrayImage& g, double cx, double cy, std::vector<float>* desc) {
    desc->resize(64);
    double mean = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            const float v = sample_gray(g, cx + j - 3.5, cy + i - 3.5);
            (*desc)[i * 8 + j] = v;
            mean += v;
        }
    mean /= 64.0;
    double norm = 0;
    for (float& v : *desc) {
        v = static_cast<float>(v - mean);
        norm += static_cast<double>(v) * v;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-6) return false;
    for (float& v : *desc) v = static_cast<float>(v / norm);
    return true;
}

double subpixel_offset(double rm, double r0, double rp) {
    const double denom = rm - 2 * r0 + rp;
    if (std::abs(denom) < 1e-20) return 0.0;
    return std::clamp(0.5 * (rm - rp) / denom, -0.5, 0.5);
}

}  // namespace

std::vector<Keypoint> detect_keypoints(const RgbImage& img, int max_n, double downsample) {
    if (img.width < 32 || img.height < 32)
        throw ArgumentError("detect_keypoints: image must be at least 32x32");
    if (max_n < 1) throw ArgumentError("detect_keypoints: max_n must be >= 1");
    if (downsample < 1.0) throw ArgumentError("detect_keypoints: downsample must be >= 1");

    const GrayImage full = to_gray(img);
    const int dw = std::max(16, static_cast<int>(std::lround(img.width / downsample)));
    const int dh = std::max(16, static_cast<int>(std::lround(img.height / downsample)));
    const GrayImage g = resize_to(full, dh, dw, ResizeMode::Area);
    const double scale_x = static_cast<double>(img.width) / dw;
    const double scale_y = static_cast<double>(img.height) / dh;

    const GrayImage resp = corner_response(g);

    struct Cand {
        double x, y, score;
    };
    std::vector<Cand> cands;
    for (int y = kBorder; y < dh - kBorder; ++y)
        for (int x = kBorder; x < dw - kBorder; ++x) {
            const float r = resp.at(y, x);
            if (r <= kResponseEps) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (resp.at(y + dy, x + dx) > r ||
                        (resp.at(y + dy, x + dx) == r && (dy < 0 || (dy == 0 && dx < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (!is_max) continue;
            const double ox = subpixel_offset(resp.at(y, x - 1), r, resp.at(y, x + 1));
            const double oy = subpixel_offset(resp.at(y - 1, x), r, resp.at(y + 1, x));
            cands.push_back({x + ox, y + oy, r});
        }

    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.score > b.score; });

    std::vector<Keypoint> out;
    std::vector<Cand> accepted;
    for (const Cand& c : cands) {
        if (static_cast<int>(out.size()) >= max_n) break;
        bool clear = true;
        for (const Cand& a : accepted) {
            const double dx = a.x - c.x, dy = a.y - c.y;
            if (dx * dx + dy * dy < kMinSpacing * kMinSpacing) {
                clear = false;
                break;
            }
        }
        if (!clear) continue;
        Keypoint kp;
        if (!patch_descriptor(g, c.x, c.y, &kp.descriptor)) continue;
        // Pixel-center mapping back to full resolution.
        kp.x = (c.x + 0.5) * scale_x - 0.5;
        kp.y = (c.y + 0.5) * scale_y - 0.5;
        kp.score = c.score;
        out.push_back(std::move(kp));
        accepted.push_back(c);
    }
    return out;
}

MatchSet match_keypoints(const std::vector<Keypoint>& a, const std::vector<Keypoint>& b,
                         double ratio) {
    MatchSet ms;
    if (a.empty() || b.empty()) return ms;

    const int na = static_cast<int>(a.size()), nb = static_cast<int>(b.size());
    auto dist2 = [&](int i, int j) {
        const auto& da = a[i].descriptor;
        const auto& db = b[j].descriptor;
        double s = 0;
        for (size_t k = 0; k < da.size(); ++k) {
            const double d = double(da[k]) - db[k];
            s += d * d;
        }
        return s;
    };

    std::vector<int> best_a(na, -1);
    std::vector<double> best_a_d(na, 0);
    for (int i = 0; i < na; ++i) {
        double d1 = 1e30, d2 = 1e30;
        int j1 = -1;
        for (int j = 0; j < nb; ++j) {
            const double d = dist2(i, j);
            if (d < d1) {
                d2 = d1;
                d1 = d;
                j1 = j;
            } else if (d < d2) {
                d2 = d;
            }
        }
        // Lowe ratio test on squared distances.
        if (j1 >= 0 && (nb < 2 || d1 < ratio * ratio * d2)) {
            best_a[i] = j1;
            best_a_d[i] = d1;
        }
    }
    std::vector<int> best_b(nb, -1);
    for (int j = 0; j < nb; ++j) {
        double d1 = 1e30;
        for (int i = 0; i < na; ++i) {
            const double d = dist2(i, j);
            if (d < d1) {
                d1 = d;
                best_b[j] = i;
            }
        }
    }
    for (int i = 0; i < na; ++i) {
        const int j = best_a[i];
        if (j >= 0 && best_b[j] == i)
            ms.pairs.push_back({i, j, std::sqrt(best_a_d[i])});
    }
    std::stable_sort(ms.pairs.begin(), ms.pairs.end(),
                     [](const Match& x, const Match& y) { return x.distance < y.distance; });
    return ms;
}

}  // namespace dcid
