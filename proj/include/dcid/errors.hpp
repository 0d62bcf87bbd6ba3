#pragma once

#include <stdexcept>
#include <string>

namespace dcid {

/// Invalid argument to an operation (bad factor, negative sigma, ...).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// File decode/encode failures, missing files, bad magic.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Degenerate geometry (singular homography, empty sampling grid).
struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Keypoint alignment could not produce a usable model.
struct AlignmentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration (empty dataset, odd kernel size, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dcid
