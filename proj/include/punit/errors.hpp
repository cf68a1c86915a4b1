#pragma once

#include <stdexcept>
#include <string>

namespace punit {

// Error categories map to CLI exit codes: validation=2, numeric=3, io=4.
enum class ErrorKind { validation, numeric, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    int exit_code() const {
        switch (kind_) {
            case ErrorKind::validation: return 2;
            case ErrorKind::numeric: return 3;
            case ErrorKind::io: return 4;
        }
        return 1;
    }

private:
    ErrorKind kind_;
};

inline Error validation_error(const std::string& msg) { return Error(ErrorKind::validation, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::numeric, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::io, msg); }

} // namespace punit
