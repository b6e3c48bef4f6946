#pragma once

#include <stdexcept>

namespace dhsketch {

/// A counter would exceed its representable range. The structure that raised
/// it is poisoned and refuses further updates.
class OverflowError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

/// A caller broke an operation's precondition (routing bug, duplicate key, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Bad checkpoint bytes: wrong magic, unknown version, truncation.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed stream input.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dhsketch
