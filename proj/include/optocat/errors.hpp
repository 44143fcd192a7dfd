#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace optocat {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A state would place too much population in the top Fock levels.
class TruncationOverflow : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Numerical integration aborted (divergence, trace drift, tail overflow).
/// Carries the simulation time at which the violation was detected.
class NumericalAbort : public Error {
public:
    NumericalAbort(const std::string& what, double time)
        : Error(what + " (t = " + std::to_string(time) + ")"), message_(what), time_(time) {}

    double time() const noexcept { return time_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
    double time_;
};

/// Config text could not be parsed or failed validation.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

// Warnings go through a process-wide sink so tests and the CLI can capture them.
using WarningHandler = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& warning_mutex() {
    static std::mutex m;
    return m;
}
inline WarningHandler& warning_handler() {
    static WarningHandler h = [](const std::string& msg) { std::clog << "warning: " << msg << '\n'; };
    return h;
}
}  // namespace detail

inline void warn(const std::string& msg) {
    std::lock_guard lock(detail::warning_mutex());
    detail::warning_handler()(msg);
}

/// Replaces the warning handler for the lifetime of the guard.
class ScopedWarningHandler {
public:
    explicit ScopedWarningHandler(WarningHandler h) {
        std::lock_guard lock(detail::warning_mutex());
        previous_ = std::exchange(detail::warning_handler(), std::move(h));
    }
    ~ScopedWarningHandler() {
        std::lock_guard lock(detail::warning_mutex());
        detail::warning_handler() = std::move(previous_);
    }
    ScopedWarningHandler(const ScopedWarningHandler&) = delete;
    ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

private:
    WarningHandler previous_;
};

}  // namespace optocat
