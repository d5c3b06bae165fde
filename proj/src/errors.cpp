#include "vocscan/errors.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace vocscan {

namespace {

std::string with_line(const std::string& message, std::size_t line) {
    if (line == 0) return message;
    return "line " + std::to_string(line) + ": " + message;
}

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& handler_slot() {
    static WarningHandler h = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return h;
}

}  // namespace

ParseError::ParseError(const std::string& message, std::size_t line)
    : Error(with_line(message, line)), line_(line) {}

ValidationError::ValidationError(const std::string& message, std::size_t line)
    : Error(with_line(message, line)), line_(line) {}

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(handler_mutex());
    return std::exchange(handler_slot(), std::move(handler));
}

void warn(std::string_view message) {
    std::lock_guard lock(handler_mutex());
    if (handler_slot()) handler_slot()(message);
}

}  // namespace vocscan
