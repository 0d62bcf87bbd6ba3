#pragma once

#include "dcid/image.hpp"

namespace dcid {

enum class ResizeMode { Area, Bilinear };

/// Resample to round(dims*factor). Area mode integrates source coverage
/// (factor 1/2 on even dims is exact 2x2 mean pooling); bilinear samples at
/// mapped pixel centers. Throws ArgumentError for non-positive factor.
RgbImage resize(const RgbImage& img, double factor, ResizeMode mode);
GrayImage resize(const GrayImage& img, double factor, ResizeMode mode);

/// Resample to an explicit output size with the same conventions.
RgbImage resize_to(const RgbImage& img, int out_h, int out_w, ResizeMode mode);
GrayImage resize_to(const GrayImage& img, int out_h, int out_w, ResizeMode mode);

/// Gaussian blur, kernel radius ceil(3*sigma), reflect padding. sigma 0 is
/// the identity; negative sigma throws ArgumentError.
RgbImage gaussian_blur(const RgbImage& img, double sigma);
GrayImage gaussian_blur(const GrayImage& img, double sigma);

}  // namespace dcid
