// error.hpp — error taxonomy shared by the core library and the C API boundary.
#pragma once

#include <stdexcept>
#include <string>

namespace ctrl {

// Categories map one-to-one onto the C API status codes.
enum class errc {
  invalid_argument = 1,
  io = 2,
  parse = 3,
  domain = 4,
  internal = 5,
};

class error : public std::runtime_error {
public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }
[[noreturn]] inline void fail_invalid(const std::string& what) { fail(errc::invalid_argument, what); }
[[noreturn]] inline void fail_io(const std::string& what) { fail(errc::io, what); }
[[noreturn]] inline void fail_parse(const std::string& what) { fail(errc::parse, what); }
[[noreturn]] inline void fail_domain(const std::string& what) { fail(errc::domain, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace ctrl
