#pragma once

#include <stdexcept>
#include <string>

namespace vaultopt {

// Base class for all anticipated failure modes so callers can catch one type.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Grid construction produced no interior nodes, or an interior node escapes
// the interior of the convex hull of the support nodes.
struct GridInfeasible : Error {
    using Error::Error;
};

// A point load does not coincide with any grid node (within 1e-9*h).
struct LoadOffNode : Error {
    using Error::Error;
};

// Support set does not satisfy closure(domain) subset of conv(supports).
struct SupportHullViolation : Error {
    using Error::Error;
};

// assemble_program called with an empty member list.
struct EmptyActiveSet : Error {
    using Error::Error;
};

// Elastic recovery requested on a structure with (numerically) zero volume.
struct DegenerateDesign : Error {
    using Error::Error;
};

// Member-adding loop exceeded its iteration budget without an empty scan.
struct NonTermination : Error {
    using Error::Error;
};

// Interior-point solver broke down (singular KKT system, stalled steps).
struct NumericalFailure : Error {
    using Error::Error;
};

} // namespace vaultopt
