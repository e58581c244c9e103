#include "rvec/diag.hpp"

#include <iostream>
#include <mutex>

#include "json.hpp"

namespace rvec::diag {

namespace {

void stderr_sink(Level level, std::string_view code, std::string_view message) {
  if (level == Level::debug) return;
  nlohmann::json line = {{"level", level_name(level)}, {"code", code}, {"message", message}};
  std::cerr << line.dump() << '\n';
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current() {
  static Sink sink = stderr_sink;
  return sink;
}

}  // namespace

std::string_view level_name(Level level) noexcept {
  switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warning: return "warning";
  }
  return "unknown";
}

void set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  current() = std::move(sink);
}

void reset_sink() { set_sink(stderr_sink); }

void emit(Level level, std::string_view code, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (current()) current()(level, code, message);
}

ScopedSink::ScopedSink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  previous_ = std::move(current());
  current() = std::move(sink);
}

ScopedSink::~ScopedSink() {
  std::lock_guard lock(sink_mutex());
  current() = std::move(previous_);
}

}  // namespace rvec::diag
