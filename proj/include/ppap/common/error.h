#pragma once

#include <stdexcept>
#include <string>

namespace ppap {

// Error categories map one-to-one onto CLI exit codes.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    data = 2,
    numerical = 3,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string & what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string & what) : Error(ExitCode::usage, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string & what) : Error(ExitCode::data, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string & what) : Error(ExitCode::numerical, what) {}
};

} // namespace ppap
