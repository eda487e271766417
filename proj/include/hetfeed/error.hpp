#pragma once

#include <stdexcept>
#include <string>

namespace hetfeed {

// Failure classes. Each maps onto one process exit code of the CLI.
enum class ErrorKind { config, data, io, remote };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

struct RemoteError : Error {
    explicit RemoteError(const std::string& what) : Error(ErrorKind::remote, what) {}
};

inline int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::data:   return 3;
        case ErrorKind::io:     return 4;
        case ErrorKind::remote: return 5;
    }
    return 1;
}

} // namespace hetfeed
