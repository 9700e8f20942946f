#pragma once

#include <stdexcept>
#include <string>

namespace cloudcluster {

/// Parameter outside its admissible domain (probabilities, losses, sizes).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Exact enumeration request above the configured cap; callers should fall
/// back to the concentration bounds.
class SizeCapError : public std::length_error {
public:
    explicit SizeCapError(const std::string& what) : std::length_error(what) {}
};

/// Statistic is deterministic or a fusion weight diverges, so the requested
/// quantity is not defined (zero variance, error probability on {0,1}).
class DegenerateError : public DomainError {
public:
    explicit DegenerateError(const std::string& what) : DomainError(what) {}
};

} // namespace cloudcluster
