#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace rvec::diag {

enum class Level { debug, info, warning };

std::string_view level_name(Level level) noexcept;

// Receives every diagnostic event. The default sink writes one JSON object per
// line to stderr for info and warning; debug is dropped.
using Sink = std::function<void(Level, std::string_view code, std::string_view message)>;

void set_sink(Sink sink);
void reset_sink();

void emit(Level level, std::string_view code, std::string_view message);
inline void warn(std::string_view code, std::string_view message) {
  emit(Level::warning, code, message);
}
inline void info(std::string_view code, std::string_view message) {
  emit(Level::info, code, message);
}
inline void debug(std::string_view code, std::string_view message) {
  emit(Level::debug, code, message);
}

// Installs a sink for the lifetime of the guard, restoring the previous one after.
class ScopedSink {
 public:
  explicit ScopedSink(Sink sink);
  ~ScopedSink();
  ScopedSink(const ScopedSink&) = delete;
  ScopedSink& operator=(const ScopedSink&) = delete;

 private:
  Sink previous_;
};

}  // namespace rvec::diag
