#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

namespace periop {

using WarningSink = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}
}  // namespace detail

// Replaces the process-wide warning sink; returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(detail::warning_mutex());
  std::swap(detail::warning_sink(), sink);
  return sink;
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::warning_mutex());
  if (detail::warning_sink()) detail::warning_sink()(msg);
}

// Captures warnings for the lifetime of the object (tests, CLI summaries).
class ScopedWarningCapture {
 public:
  ScopedWarningCapture()
      : previous_(set_warning_sink([this](const std::string& m) { messages_.push_back(m); })) {}
  ~ScopedWarningCapture() { set_warning_sink(std::move(previous_)); }
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace periop
