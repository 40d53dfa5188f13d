#pragma once

#include <stdexcept>
#include <string>

namespace bessplace {

enum class ErrorKind {
    Validation,  // bad input data, schema violations, infeasible requests
    Numerical,   // divergence, singular network, non-finite states
    Structural   // mismatched dimensions / contingency sets
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& msg) {
    throw Error(ErrorKind::Validation, msg);
}

[[noreturn]] inline void fail_numerical(const std::string& msg) {
    throw Error(ErrorKind::Numerical, msg);
}

[[noreturn]] inline void fail_structural(const std::string& msg) {
    throw Error(ErrorKind::Structural, msg);
}

}  // namespace bessplace
