#pragma once

#include <stdexcept>
#include <string>

namespace illu {

// Base of every error the library throws. The CLI maps the subclasses to
// process exit codes: config 2, data 3, numeric 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

// Tensor/layer dimension mismatches. A kind of data error for exit-code
// purposes since bad shapes come from bad files or bad wiring.
struct ShapeError : DataError {
    using DataError::DataError;
};

struct NumericError : Error {
    using Error::Error;
};

}  // namespace illu
