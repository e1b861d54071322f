/**
 * @file errors.hpp
 * @brief Exception hierarchy for the hetrisk library.
 *
 * Every error thrown by the library derives from hetrisk::Error, so callers
 * can catch a single base type. The concrete types carry the condition name
 * in the class name; the message adds instance detail (offending ticker,
 * row, dimension, ...).
 */

#pragma once

#include <stdexcept>
#include <string>

namespace hetrisk {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define HETRISK_DEFINE_ERROR(Name)                                    \
    class Name : public Error {                                       \
    public:                                                           \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

// core-stats
HETRISK_DEFINE_ERROR(ZeroVariance);
HETRISK_DEFINE_ERROR(DegenerateRow);
HETRISK_DEFINE_ERROR(NotSymmetric);
HETRISK_DEFINE_ERROR(NotPositiveSemiDefinite);
HETRISK_DEFINE_ERROR(InvalidPanel);

// model builders
HETRISK_DEFINE_ERROR(TooFewObservations);
HETRISK_DEFINE_ERROR(DimensionMismatch);
HETRISK_DEFINE_ERROR(EmptyCluster);
HETRISK_DEFINE_ERROR(HierarchyMismatch);
HETRISK_DEFINE_ERROR(SingularTopLevel);
HETRISK_DEFINE_ERROR(ZeroSpecificRisk);
HETRISK_DEFINE_ERROR(SingularFactorCovariance);

// optimizer
HETRISK_DEFINE_ERROR(RankDeficientLoadings);
HETRISK_DEFINE_ERROR(ZeroAlpha);
HETRISK_DEFINE_ERROR(InfeasibleBounds);
HETRISK_DEFINE_ERROR(NonConvergence);

// backtest
HETRISK_DEFINE_ERROR(MissingPrice);
HETRISK_DEFINE_ERROR(InsufficientHistory);
HETRISK_DEFINE_ERROR(ZeroTradedShares);
HETRISK_DEFINE_ERROR(ZeroVariancePnl);
HETRISK_DEFINE_ERROR(InvalidSpec);

// io
HETRISK_DEFINE_ERROR(ParseError);
HETRISK_DEFINE_ERROR(IoError);

#undef HETRISK_DEFINE_ERROR

}  // namespace hetrisk
