#include "olt/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace olt {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("OLT_LOG");
    if (!env) return LogLevel::error;
    const std::string s(env);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    return LogLevel::error;
  }();
  return level;
}

void log_message(LogLevel level, const std::string& msg) {
  static std::mutex mutex;
  static const char* names[] = {"error", "info", "debug"};
  std::lock_guard<std::mutex> lock(mutex);
  std::cerr << "[olt:" << names[static_cast<int>(level)] << "] " << msg
            << std::endl;
}

} // namespace olt
