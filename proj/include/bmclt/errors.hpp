#pragma once

#include <stdexcept>
#include <string>

namespace bmclt {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ScheduleDegenerate : Error {
    using Error::Error;
};
struct TraceTooShort : Error {
    using Error::Error;
};
struct NonFiniteInput : Error {
    using Error::Error;
};
struct InvalidLevel : Error {
    using Error::Error;
};
struct ZeroVarianceEstimate : Error {
    using Error::Error;
};
struct LagTooLarge : Error {
    using Error::Error;
};
struct InvalidParameter : Error {
    using Error::Error;
};
struct InvalidRho : Error {
    using Error::Error;
};
struct NotPositiveDefinite : Error {
    using Error::Error;
};
struct NumericalBreakdown : Error {
    using Error::Error;
};
struct NonConvergent : Error {
    using Error::Error;
};
struct InvalidRange : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct EmptyTrace : Error {
    using Error::Error;
};
struct ConfigInvalid : Error {
    using Error::Error;
};
struct MissingCells : Error {
    using Error::Error;
};

struct ParseError : Error {
    long line;
    ParseError(const std::string& msg, long line_no)
        : Error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

}  // namespace bmclt
