#pragma once

#include <atomic>
#include <cstddef>
#include <iostream>
#include <mutex>
#include <string_view>

namespace mpmmtt {

enum class LogLevel { quiet = 0, warn = 1, info = 2 };

namespace detail {
inline std::atomic<int>& log_level_storage() {
    static std::atomic<int> level{static_cast<int>(LogLevel::warn)};
    return level;
}
inline std::atomic<std::size_t>& warning_counter() {
    static std::atomic<std::size_t> count{0};
    return count;
}
inline std::mutex& log_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

inline void set_log_level(LogLevel level) {
    detail::log_level_storage().store(static_cast<int>(level));
}

inline LogLevel log_level() {
    return static_cast<LogLevel>(detail::log_level_storage().load());
}

/// Number of warnings raised since process start (counted even when quiet).
inline std::size_t warning_count() { return detail::warning_counter().load(); }

inline void log_warning(std::string_view msg) {
    detail::warning_counter().fetch_add(1);
    if (log_level() >= LogLevel::warn) {
        std::lock_guard lock(detail::log_mutex());
        std::clog << "[mpmmtt] warning: " << msg << '\n';
    }
}

inline void log_info(std::string_view msg) {
    if (log_level() >= LogLevel::info) {
        std::lock_guard lock(detail::log_mutex());
        std::clog << "[mpmmtt] " << msg << '\n';
    }
}

}  // namespace mpmmtt
