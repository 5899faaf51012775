#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace refracta {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Tri = std::array<int, 3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDefaultIor = 1.4723;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Angle in degrees between two unit vectors, robust near 0 and 180.
inline double angle_deg(const Vec3& a, const Vec3& b) {
    return rad2deg(std::atan2(a.cross(b).norm(), a.dot(b)));
}

// Error hierarchy. The CLI maps each kind onto its exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or invalid argument (exit code 2).
class ConfigError : public Error {
public:
    ConfigError(const std::string& key, const std::string& msg)
        : Error("config key '" + key + "': " + msg), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// Unreadable, malformed or inconsistent input data (exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// Parse failure with the byte offset where decoding stopped.
class ParseError : public DataError {
public:
    ParseError(const std::string& file, std::size_t offset, const std::string& expected)
        : DataError(file + ": parse error at byte " + std::to_string(offset) + ": expected " + expected),
          offset_(offset), expected_(expected) {}
    std::size_t offset() const { return offset_; }
    const std::string& expected() const { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

/// Solver failure, divergence or internal inconsistency (exit code 4).
class NumericalError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace refracta
