#ifndef OLT_LOG_HPP
#define OLT_LOG_HPP

#include <sstream>
#include <string>

namespace olt {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Controlled by the OLT_LOG environment variable: error | info | debug.
LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

} // namespace olt

#define OLT_LOG_AT(level, expr)                              \
  do {                                                       \
    if (::olt::log_level() >= level) {                       \
      std::ostringstream olt_log_oss;                        \
      olt_log_oss << expr;                                   \
      ::olt::log_message(level, olt_log_oss.str());          \
    }                                                        \
  } while (0)

#define OLT_LOG_ERROR(expr) OLT_LOG_AT(::olt::LogLevel::error, expr)
#define OLT_LOG_INFO(expr) OLT_LOG_AT(::olt::LogLevel::info, expr)
#define OLT_LOG_DEBUG(expr) OLT_LOG_AT(::olt::LogLevel::debug, expr)

#endif // OLT_LOG_HPP
