#pragma once

#include <stdexcept>
#include <string>

namespace vmorph {

/// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File could not be read/written, or a payload is truncated.
struct io_error : error {
    using error::error;
};

/// A file exists but its contents violate the expected format
/// (bad magic, unsupported datatype, wrong dimensionality).
struct format_error : io_error {
    using io_error::io_error;
};

/// A configuration value violates a documented invariant, or an
/// unknown key was encountered during strict parsing.
struct config_error : error {
    using error::error;
};

/// Input data violates an operation's contract (out-of-range index,
/// non-binary mask, NaN prediction, disconnected endpoints, ...).
struct value_error : error {
    using error::error;
};

}  // namespace vmorph
