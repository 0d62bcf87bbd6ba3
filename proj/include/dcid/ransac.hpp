#pragma once

/**
 * @file ransac.hpp
 * @brief Robust homography fitting and the image-level alignment stage.
 */

#include <cstdint>
#include <vector>

#include "dcid/geometry.hpp"
#include "dcid/keypoints.hpp"

namespace dcid {

struct RansacConfig {
    double inlier_threshold = 3.0;  // full-resolution pixels
    int max_iterations = 1000;
    int min_inliers = 12;
    uint64_t seed = 0;
};

struct HomographyEstimate {
    Homography h;  // maps a-coordinates to b-coordinates
    std::vector<uint8_t> inlier_mask;  // per match pair
    int inlier_count = 0;
};

/// Direct linear transform with Hartley normalization; least squares over
/// all given correspondences. Throws AlignmentError for degenerate input.
Homography fit_homography_dlt(const std::vector<std::pair<double, double>>& src,
                              const std::vector<std::pair<double, double>>& dst);

/// RANSAC over 4-point minimal samples, refit on inliers. Throws
/// AlignmentError when |matches| < 4 or the best model has fewer than
/// cfg.min_inliers inliers. Deterministic given cfg.seed.
HomographyEstimate estimate_homography(const MatchSet& m, const std::vector<Keypoint>& kpa,
                                       const std::vector<Keypoint>& kpb, const RansacConfig& cfg);

struct KmaConfig {
    int max_keypoints = 256;
    double detect_downsample = 4.0;
    /// Candidate UW:W footprint ratios; detection on the auxiliary image runs
    /// at detect_downsample/ratio so content scales line up, the winner is
    /// the candidate with the most RANSAC inliers.
    std::vector<double> scale_candidates{1.0, 1.4, 2.0, 2.8};
    /// Pre-detection blur in detection-grid pixels; suppresses moire texture
    /// that would otherwise poison the patch descriptors.
    double detect_blur = 1.5;
    RansacConfig ransac;
    /// Guided refinement: NCC template matching of the warped auxiliary
    /// against the target around the detected W corners, then a direct
    /// trimmed refit of the homography on the full-resolution matches.
    /// Passes shrink the search radius while sharpening the working blur
    /// (heavy blur first to see past moire, finer blur to lock on).
    struct RefinePass {
        int search;    // +- pixels
        double blur;   // grayscale working blur
    };
    bool refine = true;
    std::vector<RefinePass> refine_passes{{10, 6.0}, {5, 4.0}, {3, 2.5}, {3, 2.5}, {2, 1.5}};
    int refine_patch_radius = 8;  // 17x17 template
    double refine_min_ncc = 0.5;
};

struct KmaResult {
    RgbImage aligned;   // I_uw warped onto I_m's frame
    Mask valid;
    Homography uw_to_w;  // full-resolution UW coords -> W coords
    int inlier_count = 0;
    double scale_candidate = 1.0;
};

/// Stage-1 alignment: detect -> match -> robust homography -> warp.
/// Never silently returns an identity warp: alignment failure throws.
KmaResult kma_align(const RgbImage& i_m, const RgbImage& i_uw, const KmaConfig& cfg = {});

/// Mean misalignment at the four destination-frame corners: how far the
/// estimate displaces content that the reference homography puts there.
double mean_corner_error(const Homography& estimate, const Homography& truth, int width,
                         int height);

}  // namespace dcid
