#pragma once

#include <stdexcept>
#include <string>

namespace dtsi {

// Malformed input: syntax, unknown names, bad probabilities, non-regular terms.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input was fine but the requested analysis is undefined for it.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configured size bound was exceeded.
class LimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dtsi
