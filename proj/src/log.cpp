#include "iadcps/log.hpp"

#include <iostream>
#include <utility>

namespace iadcps::log {
namespace {

Sink& current_sink() {
  static Sink sink;
  return sink;
}

}  // namespace

Sink set_warning_sink(Sink sink) { return std::exchange(current_sink(), std::move(sink)); }

void warn(const std::string& message) {
  if (const auto& sink = current_sink()) {
    sink(message);
    return;
  }
  std::cerr << "warning: " << message << '\n';
}

}  // namespace iadcps::log
