#pragma once

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <mutex>
#include <sstream>

namespace coff::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Verbosity comes from COFF_LOG (error|warn|info|debug); default warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("COFF_LOG");
    if (env == nullptr) return Level::Warn;
    if (std::strcmp(env, "error") == 0) return Level::Error;
    if (std::strcmp(env, "info") == 0) return Level::Info;
    if (std::strcmp(env, "debug") == 0) return Level::Debug;
    return Level::Warn;
  }();
  return level;
}

template <typename... Args>
void write(Level level, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  static constexpr const char* kTags[] = {"error", "warn", "info", "debug"};
  std::ostringstream oss;
  oss << "[coff:" << kTags[static_cast<int>(level)] << "] ";
  (oss << ... << args);
  oss << '\n';
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  std::cerr << oss.str();
}

template <typename... Args> void error(const Args&... args) { write(Level::Error, args...); }
template <typename... Args> void warn(const Args&... args) { write(Level::Warn, args...); }
template <typename... Args> void info(const Args&... args) { write(Level::Info, args...); }
template <typename... Args> void debug(const Args&... args) { write(Level::Debug, args...); }

}  // namespace coff::log
