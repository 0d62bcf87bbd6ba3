#pragma once

#include <string>

#include "dcid/image.hpp"

namespace dcid {

/// Decode an 8-bit 3-channel PNG. Byte b maps to b/255 exactly.
/// Throws IoError with path context on missing file / non-PNG payload /
/// channel count != 3.
RgbImage load_png(const std::string& path);

/// Encode as 8-bit RGB PNG; component v stores round(v*255) after clamping.
void save_png(const std::string& path, const RgbImage& img);

/// round(clamp01(v)*255), the quantization used by save_png.
uint8_t quantize_u8(float v);

}  // namespace dcid
