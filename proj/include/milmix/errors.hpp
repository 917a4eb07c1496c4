#ifndef MILMIX_ERRORS_HPP
#define MILMIX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace milmix {

/// Data violates a documented invariant (label sums, shapes, finiteness, ...).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Byte stream is structurally not the expected format (magic, version, trailing bytes).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Byte stream ends before the declared payload does.
class TruncationError : public std::runtime_error {
 public:
  explicit TruncationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace milmix

#endif  // MILMIX_ERRORS_HPP
