#pragma once

#include <stdexcept>
#include <string>

namespace odor {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

// Raised whenever an op would produce or consume NaN/Inf.
struct NonFiniteError : Error {
    using Error::Error;
};

struct TapeError : Error {
    using Error::Error;
};

struct CorruptFileError : Error {
    using Error::Error;
};

struct UnsupportedFormatError : Error {
    using Error::Error;
};

}  // namespace odor
