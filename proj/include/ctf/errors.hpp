#pragma once

#include <stdexcept>
#include <string>

namespace ctf {

// Error hierarchy. Every failure mode raised by the library derives from
// Error so callers can catch one type at the CLI boundary.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument values (out-of-range counts, bad quality levels, ...).
class ParamError : public Error {
public:
    using Error::Error;
};

// Dimension / shape mismatches between tensors, dictionaries and signals.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed binary or text container (bad magic, bad header fields).
class FormatError : public Error {
public:
    using Error::Error;
};

// Underlying I/O failed (missing file, truncated read, failed write).
class IoError : public Error {
public:
    using Error::Error;
};

// Two inputs that must agree do not (e.g. image/label counts differ).
class ConsistencyError : public Error {
public:
    using Error::Error;
};

// Numerical blow-up in an iterative solver.
class InstabilityError : public Error {
public:
    explicit InstabilityError(const std::string& msg, long step_index = -1)
        : Error(msg), step(step_index) {}
    long step;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg, long epoch_index = -1)
        : Error(msg), epoch(epoch_index) {}
    long epoch;
};

// A model was used before it was trained / loaded.
class StateError : public Error {
public:
    using Error::Error;
};

// Dataset-level problems (missing quality level, class too small, ...).
class DataError : public Error {
public:
    using Error::Error;
};

// Bad experiment configuration (wrong level count, unknown key, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Text parse failure; carries the 1-based line number when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg, long line_number = -1)
        : Error(msg), line(line_number) {}
    long line;
};

} // namespace ctf
