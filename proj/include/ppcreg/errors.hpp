#pragma once

#include <stdexcept>
#include <string>

namespace ppcreg {

/// Malformed volume/image/config input. Carries the byte offset where
/// parsing stopped when one is known.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg, long byte_offset = -1)
        : std::runtime_error(byte_offset >= 0
                                 ? msg + " (byte offset " + std::to_string(byte_offset) + ")"
                                 : msg),
          byte_offset_(byte_offset) {}

    long byte_offset() const { return byte_offset_; }

private:
    long byte_offset_;
};

/// Rotation angle at the pi branch point of the axis-angle log map.
class BranchSingularityError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ray parallel to the detector plane, no pixel can be assigned.
class NoIntersectionError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fewer contour points survived selection than the solver needs.
class InsufficientContourError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Every projected contour point was skipped during matching.
class NoCorrespondenceError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Fewer than six usable constraints in the motion system.
class InsufficientConstraintsError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rank-deficient or ill-conditioned weighted normal matrix.
class SingularSystemError : public std::runtime_error {
public:
    SingularSystemError(const std::string& msg, double condition)
        : std::runtime_error(msg + " (condition estimate " + std::to_string(condition) + ")"),
          condition_(condition) {}

    double condition() const { return condition_; }

private:
    double condition_;
};

/// Perturbation sampling could not bracket or hit the requested error.
class SamplingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ppcreg
