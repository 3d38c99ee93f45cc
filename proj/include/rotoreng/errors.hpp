#pragma once

#include <stdexcept>
#include <string>

namespace rotoreng {

struct layout_error : std::runtime_error {
    explicit layout_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct state_error : std::runtime_error {
    explicit state_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Rotor (or oscillator) population escaped the truncation window.
struct truncation_error : std::runtime_error {
    explicit truncation_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct blowup_error : std::runtime_error {
    explicit blowup_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct nonconvergence_error : std::runtime_error {
    explicit nonconvergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace rotoreng
