#ifndef KVTIER_ERRORS_HPP
#define KVTIER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kvtier {

// Bad user-supplied values: spec fields, config files, CLI flags.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed trace / score / report files. Messages name the offending line.
class parse_error : public std::runtime_error {
public:
    explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A schedule decision that would violate the HBM capacity constraint.
// Policies own feasibility; the state machine never repairs silently.
class infeasible_error : public std::runtime_error {
public:
    explicit infeasible_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Internal contract violations (migrating a non-resident entry, audit
// mismatch). These indicate a bug, not bad input.
class logic_error : public std::logic_error {
public:
    explicit logic_error(const std::string& msg) : std::logic_error(msg) {}
};

} // namespace kvtier

#endif
