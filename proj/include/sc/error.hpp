#pragma once

#include <stdexcept>
#include <string>

namespace sc {

// All library failures surface as sc::Error. Messages start with a short
// stable phrase ("non-finite", "payload length mismatch", ...) that tests
// and the CLI match on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(what);
}

}  // namespace sc
