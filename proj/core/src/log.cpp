#include "mtensor/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace mtensor {
namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler() {
  static WarningHandler h = [](std::string_view msg) { std::cerr << "mtensor: warning: " << msg << '\n'; };
  return h;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler h) {
  std::lock_guard lock(handler_mutex());
  return std::exchange(handler(), std::move(h));
}

void warn(std::string_view message) {
  std::lock_guard lock(handler_mutex());
  if (handler()) handler()(message);
}

}  // namespace mtensor
