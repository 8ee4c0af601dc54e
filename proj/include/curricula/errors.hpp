#pragma once

#include <stdexcept>
#include <string>

namespace curricula {

// Base class for all library errors. The CLI maps subclasses to exit codes:
// invalid input -> 2, I/O -> 3, numerical -> 4.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class invalid_argument_error : public error {
  public:
    using error::error;
};

// Inputs are syntactically valid but there is not enough of them.
class insufficient_data_error : public invalid_argument_error {
  public:
    using invalid_argument_error::invalid_argument_error;
};

class io_error : public error {
  public:
    using error::error;
};

// On-disk data fails structural validation (bad magic, unknown ids, size
// mismatches).
class corrupt_archive_error : public io_error {
  public:
    using io_error::io_error;
};

class numerical_error : public error {
  public:
    using error::error;
};

class division_by_zero_error : public numerical_error {
  public:
    using numerical_error::numerical_error;
};

class undefined_correlation_error : public numerical_error {
  public:
    using numerical_error::numerical_error;
};

} // namespace curricula
