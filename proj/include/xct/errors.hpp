#pragma once

#include <stdexcept>
#include <string>

namespace xct {

// Invalid configuration or command-line input. Maps to CLI exit code 1.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// File-format or filesystem failure. Maps to CLI exit code 2.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Calibration data is unusable (e.g. defect mask covers half the sensor).
struct calibration_error : std::runtime_error {
    explicit calibration_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A statistic cannot be formed, e.g. Q_ef over a constant band.
struct degenerate_band_error : std::runtime_error {
    explicit degenerate_band_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace xct
