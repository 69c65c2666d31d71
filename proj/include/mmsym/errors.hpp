#pragma once

#include <stdexcept>
#include <string>

namespace mmsym {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text: carries a human-readable location ("line 12", "term 3, y[1][2]").
struct ParseError : Error {
    ParseError(const std::string& where, const std::string& what)
        : Error(where.empty() ? what : where + ": " + what), location(where) {}
    std::string location;
};

struct ModeError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

struct SingularError : Error {
    using Error::Error;
};

struct Cancelled : Error {
    Cancelled() : Error("cancelled") {}
};

}  // namespace mmsym
