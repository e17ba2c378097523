#pragma once

#include <stdexcept>
#include <string>

namespace odom {

// Caller misuse: bad argument combinations, wrong frame counts, out-of-range
// window sizes. Maps to exit code 1 at the CLI boundary.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed external data (scan files, pose files, configs). Messages name
// the offending file and, where possible, the line or field. Exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/layer shape mismatch detected during graph construction or forward.
// Messages name the offending layer.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Euler extraction with pitch at +/- pi/2. Vehicle data cannot reach this,
// so hitting it means the input is corrupt; never silently approximated.
struct DegenerateOrientationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Encoding a frame with no occupied bin at all.
struct EmptyFrameError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Weight stream with wrong magic/version, truncated data, or a topology that
// does not match the expected one.
struct IncompatibleWeightsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss during training.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace odom
