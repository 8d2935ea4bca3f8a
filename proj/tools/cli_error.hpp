#pragma once

#include "c2st/c2st.h"

#include <stdexcept>
#include <string>

namespace c2st::cli {

class CliError : public std::runtime_error {
 public:
  CliError(c2st_status status, const std::string& what) : std::runtime_error(what), status_(status) {}
  c2st_status status() const noexcept { return status_; }

 private:
  c2st_status status_;
};

[[noreturn]] inline void raise(c2st_status status, const std::string& what) { throw CliError(status, what); }

// Turns a failed library call into a CliError carrying the library message.
inline void check(c2st_status status) {
  if (status != C2ST_OK) raise(status, c2st_last_error());
}

}  // namespace c2st::cli
