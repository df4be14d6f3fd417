#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace aris {

using complex_t = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

// One stream per trial; never shared across threads.
using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSpeedOfLight = 299792458.0;

enum class Regime { near, far };
enum class RisMode { active, passive };
// Which steering model the estimator searches over.
enum class SteeringModel { near_field, far_field };

std::string_view to_string(Regime r);
std::string_view to_string(RisMode m);
std::string_view to_string(SteeringModel m);

Regime parse_regime(std::string_view s);
RisMode parse_mode(std::string_view s);
SteeringModel parse_model(std::string_view s);

// Wraps an angle into [0, 2*pi).
double wrap_phase(double radians);

}  // namespace aris
