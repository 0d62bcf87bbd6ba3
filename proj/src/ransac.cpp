#include "dcid/ransac.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "dcid/errors.hpp"
#include "dcid/resample.hpp"
#include "dcid/rng.hpp"

namespace dcid {

namespace {

using PointList = std::vector<std::pair<double, double>>;

struct Normalization {
    double cx = 0, cy = 0, scale = 1;
    void apply(double x, double y, double* ox, double* oy) const {
        *ox = (x - cx) * scale;
        *oy = (y - cy) * scale;
    }
    Homography as_homography() const {
        return Homography::from_array({scale, 0, -cx * scale, 0, scale, -cy * scale, 0, 0, 1});
    }
};

Normalization normalize_points(const PointList& pts) {
    Normalization n;
    for (const auto& p : pts) {
        n.cx += p.first;
        n.cy += p.second;
    }
    n.cx /= pts.size();
    n.cy /= pts.size();
    double mean_dist = 0;
    for (const auto& p : pts) mean_dist += std::hypot(p.first - n.cx, p.second - n.cy);
    mean_dist /= pts.size();
    n.scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    return n;
}

bool three_collinear(const PointList& p) {
    for (int i = 0; i < static_cast<int>(p.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(p.size()); ++j)
            for (int k = j + 1; k < static_cast<int>(p.size()); ++k) {
                const double area = (p[j].first - p[i].first) * (p[k].second - p[i].second) -
                                    (p[j].second - p[i].second) * (p[k].first - p[i].first);
                if (std::abs(area) < 1e-6) return true;
            }
    return false;
}

}  // namespace

Homography fit_homography_dlt(const PointList& src, const PointList& dst) {
    const int n = static_cast<int>(src.size());
    if (n < 4 || dst.size() != src.size())
        throw AlignmentError("homography fit: need at least 4 correspondences");

    const Normalization ns = normalize_points(src), nd = normalize_points(dst);
    Eigen::MatrixXd a(2 * n, 9);
    for (int i = 0; i < n; ++i) {
        double x, y, u, v;
        ns.apply(src[i].first, src[i].second, &x, &y);
        nd.apply(dst[i].first, dst[i].second, &u, &v);
        a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(8);

    std::array<double, 9> hn;
    for (int i = 0; i < 9; ++i) hn[i] = h(i);
    if (std::abs(hn[8]) < 1e-12) throw AlignmentError("homography fit: degenerate solution");
    const Homography hnorm = Homography::from_array(hn);
    // Undo normalization: H = Nd^-1 * Hn * Ns.
    return nd.as_homography().inverse().compose(hnorm).compose(ns.as_homography());
}

HomographyEstimate estimate_homography(const MatchSet& m, const std::vector<Keypoint>& kpa,
                                       const std::vector<Keypoint>& kpb,
                                       const RansacConfig& cfg) {
    const int n = static_cast<int>(m.size());
    if (n < 4) throw AlignmentError("estimate_homography: fewer than 4 matches");
    if (cfg.min_inliers < 4) throw ConfigError("estimate_homography: min_inliers must be >= 4");

    PointList src(n), dst(n);
    for (int i = 0; i < n; ++i) {
        src[i] = {kpa[m.pairs[i].index_a].x, kpa[m.pairs[i].index_a].y};
        dst[i] = {kpb[m.pairs[i].index_b].x, kpb[m.pairs[i].index_b].y};
    }

    const double thr2 = cfg.inlier_threshold * cfg.inlier_threshold;
    auto count_inliers = [&](const Homography& h, std::vector<uint8_t>* mask) {
        int count = 0;
        if (mask) mask->assign(n, 0);
        for (int i = 0; i < n; ++i) {
            double px, py;
            try {
                h.apply(src[i].first, src[i].second, &px, &py);
            } catch (const GeometryError&) {
                continue;
            }
            const double dx = px - dst[i].first, dy = py - dst[i].second;
            if (dx * dx + dy * dy < thr2) {
                ++count;
                if (mask) (*mask)[i] = 1;
            }
        }
        return count;
    };

    RandomEngine rng(mix_seed(0x5A7Cu, cfg.seed));
    int best_count = 0;
    Homography best_h;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        int idx[4];
        idx[0] = static_cast<int>(rng.randint(n));
        for (int k = 1; k < 4; ++k) {
            bool distinct = false;
            while (!distinct) {
                idx[k] = static_cast<int>(rng.randint(n));
                distinct = true;
                for (int j = 0; j < k; ++j)
                    if (idx[j] == idx[k]) distinct = false;
            }
        }
        PointList s4, d4;
        for (int k = 0; k < 4; ++k) {
            s4.push_back(src[idx[k]]);
            d4.push_back(dst[idx[k]]);
        }
        if (three_collinear(s4) || three_collinear(d4)) continue;
        Homography h;
        try {
            h = fit_homography_dlt(s4, d4);
        } catch (const AlignmentError&) {
            continue;
        } catch (const GeometryError&) {
            continue;
        }
        const int count = count_inliers(h, nullptr);
        if (count > best_count) {
            best_count = count;
            best_h = h;
        }
    }
    if (best_count < std::max(4, cfg.min_inliers))
        throw AlignmentError("estimate_homography: best model has " + std::to_string(best_count) +
                             " inliers, need " + std::to_string(cfg.min_inliers));

    // Least-squares refit on the consensus set, then recount.
    HomographyEstimate est;
    std::vector<uint8_t> mask;
    count_inliers(best_h, &mask);
    PointList si, di;
    for (int i = 0; i < n; ++i)
        if (mask[i]) {
            si.push_back(src[i]);
            di.push_back(dst[i]);
        }
    try {
        const Homography refit = fit_homography_dlt(si, di);
        if (count_inliers(refit, nullptr) >= best_count) best_h = refit;
    } catch (const AlignmentError&) {
    } catch (const GeometryError&) {
    }

    est.h = best_h;
    est.inlier_count = count_inliers(best_h, &est.inlier_mask);
    if (est.inlier_count < cfg.min_inliers)
        throw AlignmentError("estimate_homography: refit lost inliers");
    return est;
}

namespace {

float sample_gray_bilinear(const GrayImage& g, double x, double y) {
    x = std::clamp(x, 0.0, g.width - 1.0);
    y = std::clamp(y, 0.0, g.height - 1.0);
    const int x0 = std::min(static_cast<int>(x), g.width - 2);
    const int y0 = std::min(static_cast<int>(y), g.height - 2);
    const double fx = x - x0, fy = y - y0;
    return static_cast<float>((1 - fy) * ((1 - fx) * g.at(y0, x0) + fx * g.at(y0, x0 + 1)) +
                              fy * ((1 - fx) * g.at(y0 + 1, x0) + fx * g.at(y0 + 1, x0 + 1)));
}

GrayImage gradient_magnitude(const GrayImage& g) {
    GrayImage out(g.height, g.width);
    for (int y = 1; y < g.height - 1; ++y)
        for (int x = 1; x < g.width - 1; ++x) {
            const double gx = 0.5 * (g.at(y, x + 1) - g.at(y, x - 1));
            const double gy = 0.5 * (g.at(y + 1, x) - g.at(y - 1, x));
            out.at(y, x) = static_cast<float>(std::hypot(gx, gy));
        }
    return out;
}

double ncc(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= a.size();
    mb /= b.size();
    double num = 0, da = 0, db = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    if (da < 1e-12 || db < 1e-12) return -1.0;
    return num / std::sqrt(da * db);
}

/// One guided-refinement pass: NCC template matching of the warped
/// auxiliary against the target at the anchor positions, then a direct
/// trimmed DLT refit of the full homography on the accepted matches.
/// Returns false when too few control points survive.
bool refine_pass(const RgbImage& i_m, const RgbImage& i_uw, const std::vector<Keypoint>& anchors,
                 const KmaConfig& cfg, const KmaConfig::RefinePass& pass, Homography* uw_to_w) {
    const WarpResult warped = warp_projective(i_uw, *uw_to_w, i_m.height, i_m.width);
    const GrayImage gt_img = gradient_magnitude(gaussian_blur(to_gray(i_m), pass.blur));
    const GrayImage ga_img = gradient_magnitude(gaussian_blur(to_gray(warped.image), pass.blur));
    const Homography inv = uw_to_w->inverse();

    const int pr = cfg.refine_patch_radius, sr = pass.search;
    PointList from, to;
    for (const Keypoint& kp : anchors) {
        const int ix = static_cast<int>(std::lround(kp.x)), iy = static_cast<int>(std::lround(kp.y));
        if (ix - pr - sr < 0 || iy - pr - sr < 0 || ix + pr + sr >= gt_img.width ||
            iy + pr + sr >= gt_img.height)
            continue;
        if (!warped.valid.at(iy, ix)) continue;
        std::vector<double> tmpl;
        tmpl.reserve((2 * pr + 1) * (2 * pr + 1));
        for (int dy = -pr; dy <= pr; ++dy)
            for (int dx = -pr; dx <= pr; ++dx)
                tmpl.push_back(sample_gray_bilinear(ga_img, kp.x + dx, kp.y + dy));

        // One extended target window; every probe offset reads a subwindow.
        const int ext = pr + sr, ew = 2 * ext + 1;
        std::vector<double> window(static_cast<size_t>(ew) * ew);
        for (int dy = -ext; dy <= ext; ++dy)
            for (int dx = -ext; dx <= ext; ++dx)
                window[(dy + ext) * ew + (dx + ext)] =
                    sample_gray_bilinear(gt_img, kp.x + dx, kp.y + dy);

        double best_score = -2.0;
        int best_dx = 0, best_dy = 0;
        std::vector<std::vector<double>> scores(2 * sr + 1, std::vector<double>(2 * sr + 1, -2.0));
        std::vector<double> probe(tmpl.size());
        for (int oy = -sr; oy <= sr; ++oy)
            for (int ox = -sr; ox <= sr; ++ox) {
                size_t k = 0;
                for (int dy = -pr; dy <= pr; ++dy)
                    for (int dx = -pr; dx <= pr; ++dx)
                        probe[k++] = window[(oy + dy + ext) * ew + (ox + dx + ext)];
                const double sc = ncc(tmpl, probe);
                scores[oy + sr][ox + sr] = sc;
                if (sc > best_score) {
                    best_score = sc;
                    best_dx = ox;
                    best_dy = oy;
                }
            }
        if (best_score < cfg.refine_min_ncc) continue;
        if (std::abs(best_dx) == sr || std::abs(best_dy) == sr) continue;  // peak on search edge
        auto subpix = [&](double m, double c, double p) {
            const double denom = m - 2 * c + p;
            return std::abs(denom) < 1e-12 ? 0.0 : std::clamp(0.5 * (m - p) / denom, -0.5, 0.5);
        };
        const double off_x = subpix(scores[best_dy + sr][best_dx + sr - 1],
                                    scores[best_dy + sr][best_dx + sr],
                                    scores[best_dy + sr][best_dx + sr + 1]);
        const double off_y = subpix(scores[best_dy + sr - 1][best_dx + sr],
                                    scores[best_dy + sr][best_dx + sr],
                                    scores[best_dy + sr + 1][best_dx + sr]);
        // The content seen at kp came from UW coordinate inv(kp); it actually
        // belongs at kp + d in the target.
        double ux, uy;
        inv.apply(kp.x, kp.y, &ux, &uy);
        from.push_back({ux, uy});
        to.push_back({kp.x + best_dx + off_x, kp.y + best_dy + off_y});
    }
    if (static_cast<int>(from.size()) < 12) return false;

    try {
        Homography h = fit_homography_dlt(from, to);
        // Trim the worst residuals once and refit.
        std::vector<double> res(from.size());
        for (size_t i = 0; i < from.size(); ++i) {
            double px, py;
            h.apply(from[i].first, from[i].second, &px, &py);
            res[i] = std::hypot(px - to[i].first, py - to[i].second);
        }
        std::vector<double> sorted = res;
        std::sort(sorted.begin(), sorted.end());
        const double cutoff = std::max(0.5, 2.5 * sorted[sorted.size() / 2]);
        PointList f2, t2;
        for (size_t i = 0; i < from.size(); ++i)
            if (res[i] <= cutoff) {
                f2.push_back(from[i]);
                t2.push_back(to[i]);
            }
        if (static_cast<int>(f2.size()) >= 12) h = fit_homography_dlt(f2, t2);
        *uw_to_w = h;
        return true;
    } catch (const AlignmentError&) {
        return false;
    } catch (const GeometryError&) {
        return false;
    }
}

}  // namespace

KmaResult kma_align(const RgbImage& i_m, const RgbImage& i_uw, const KmaConfig& cfg) {
    const double w_blur = cfg.detect_blur * cfg.detect_downsample;
    const RgbImage i_m_smooth = w_blur > 0 ? gaussian_blur(i_m, w_blur) : i_m;
    const std::vector<Keypoint> kp_w =
        detect_keypoints(i_m_smooth, cfg.max_keypoints, cfg.detect_downsample);
    if (kp_w.size() < 4) throw AlignmentError("kma_align: too few keypoints in the W image");

    bool found = false;
    KmaResult best;
    std::string last_error = "no scale candidate produced a model";
    for (size_t ci = 0; ci < cfg.scale_candidates.size(); ++ci) {
        const double ratio = cfg.scale_candidates[ci];
        const double ds = std::max(1.0, cfg.detect_downsample / ratio);
        std::vector<Keypoint> kp_uw;
        try {
            const double uw_blur = cfg.detect_blur * ds;
            kp_uw = detect_keypoints(uw_blur > 0 ? gaussian_blur(i_uw, uw_blur) : i_uw,
                                     cfg.max_keypoints, ds);
        } catch (const ArgumentError&) {
            continue;
        }
        if (kp_uw.size() < 4) continue;
        const MatchSet matches = match_keypoints(kp_uw, kp_w);
        if (matches.size() < 4) continue;
        RansacConfig rc = cfg.ransac;
        rc.seed = mix_seed(cfg.ransac.seed, ci);
        try {
            HomographyEstimate est = estimate_homography(matches, kp_uw, kp_w, rc);
            if (!found || est.inlier_count > best.inlier_count) {
                found = true;
                best.uw_to_w = est.h;
                best.inlier_count = est.inlier_count;
                best.scale_candidate = ratio;
            }
        } catch (const AlignmentError& e) {
            last_error = e.what();
        }
    }
    if (!found) throw AlignmentError(std::string("kma_align: ") + last_error);

    if (cfg.refine) {
        // Anchors: detected corners plus a coarse grid, so the refit stays
        // constrained out to the frame borders.
        std::vector<Keypoint> anchors = kp_w;
        for (int gy = 12; gy < i_m.height - 12; gy += 16)
            for (int gx = 12; gx < i_m.width - 12; gx += 16) {
                Keypoint kp;
                kp.x = gx;
                kp.y = gy;
                anchors.push_back(kp);
            }
        for (const auto& pass : cfg.refine_passes)
            refine_pass(i_m, i_uw, anchors, cfg, pass, &best.uw_to_w);
    }

    WarpResult warped = warp_projective(i_uw, best.uw_to_w, i_m.height, i_m.width);
    best.aligned = std::move(warped.image);
    best.valid = std::move(warped.valid);
    return best;
}

double mean_corner_error(const Homography& estimate, const Homography& truth, int width,
                         int height) {
    // Where does the estimate place the content that truth puts at each
    // destination-frame corner. This measures misalignment in destination
    // pixels, which is what the downstream warp consumes.
    const double corners[4][2] = {
        {0, 0}, {width - 1.0, 0}, {0, height - 1.0}, {width - 1.0, height - 1.0}};
    const Homography tinv = truth.inverse();
    double err = 0;
    for (const auto& c : corners) {
        double ux, uy, px, py;
        tinv.apply(c[0], c[1], &ux, &uy);
        estimate.apply(ux, uy, &px, &py);
        err += std::hypot(px - c[0], py - c[1]);
    }
    return err / 4.0;
}

}  // namespace dcid
