#pragma once

/**
 * @file keypoints.hpp
 * @brief Corner detection and descriptor matching for image-level alignment.
 *
 * Classical stand-ins for the learned detector/matcher: Shi-Tomasi corner
 * response on the x4 area-downsampled grayscale image, 8x8 normalized
 * intensity-patch descriptors, mutual-nearest-neighbor matching with a Lowe
 * ratio test.
 */

#include <vector>

#include "dcid/image.hpp"

namespace dcid {

struct Keypoint {
    double x = 0, y = 0;  // full-resolution pixel coordinates
    double score = 0;     // detector response, lists come sorted descending
    std::vector<float> descriptor;  // L2-normalized, 64-dim
};

struct Match {
    int index_a = 0, index_b = 0;
    double distance = 0;
};

/// One-to-one matches, sorted by ascending descriptor distance.
struct MatchSet {
    std::vector<Match> pairs;
    bool empty() const { return pairs.empty(); }
    size_t size() const { return pairs.size(); }
};

/// Detect up to max_n corners on the grayscale image downsampled by
/// `downsample` (area), positions reported back at full resolution, minimum
/// spacing of 2 downsampled pixels. Throws ArgumentError below 32x32 input.
std::vector<Keypoint> detect_keypoints(const RgbImage& img, int max_n, double downsample = 4.0);

/// Mutual nearest neighbors in descriptor space passing the ratio test.
/// Empty inputs yield an empty set.
MatchSet match_keypoints(const std::vector<Keypoint>& a, const std::vector<Keypoint>& b,
                         double ratio = 0.8);

}  // namespace dcid
