#pragma once

#include <cstddef>
#include <optional>

#include "aris/types.hpp"

namespace aris {

// Uniform planar array in the x-z plane, boresight along +y. Element 1 sits
// at the origin; elements are numbered row by row (horizontal index fastest).
struct ArrayGeometry {
    int n_h = 0;            // elements per row
    int n_v = 0;            // elements per column
    double delta_h = 0.0;   // horizontal spacing [m]
    double delta_v = 0.0;   // vertical spacing [m]
    double wavelength = 0.0;

    std::size_t size() const { return static_cast<std::size_t>(n_h) * static_cast<std::size_t>(n_v); }

    // Throws std::invalid_argument when a field is out of range.
    void validate() const;

    // Half-wavelength square array at the given carrier.
    static ArrayGeometry half_wavelength(int n_h, int n_v, double carrier_hz);
};

// Azimuth/elevation in radians; distance (near field only) is measured to
// the reference element.
struct DirectionParams {
    double azimuth = 0.0;
    double elevation = 0.0;
    std::optional<double> distance;

    // Spatial frequencies seen by the planar-wave model.
    double u() const;  // sin(az) cos(el)
    double v() const;  // sin(el)
};

struct ElementPosition {
    double i = 0.0;  // horizontal coordinate [m]
    double k = 0.0;  // vertical coordinate [m]
};

struct FieldBoundaries {
    double aperture = 0.0;   // panel diagonal D [m]
    double fraunhofer = 0.0; // 2 D^2 / lambda
    double bjornson = 0.0;   // 2 D
};

// 1-based element index, as in the array-response formulas.
ElementPosition element_position(const ArrayGeometry& geometry, std::size_t n);

// Planar-wave response: entry n = exp(-j 2pi/lambda (i(n) u + k(n) v)).
// Any distance carried by `dir` is ignored.
CVector steering_far(const ArrayGeometry& geometry, const DirectionParams& dir);

// Spherical-wave response: entry n = exp(+j 2pi/lambda (r_n - r_1)).
// Throws std::invalid_argument if the distance is missing or not positive.
CVector steering_near(const ArrayGeometry& geometry, const DirectionParams& dir);

// Near-field response when a distance is present, planar otherwise.
CVector steering(const ArrayGeometry& geometry, const DirectionParams& dir);

FieldBoundaries field_boundaries(const ArrayGeometry& geometry);

// Builds a direction from spatial frequencies; nullopt outside the visible
// region (u^2 + v^2 > 1).
std::optional<DirectionParams> direction_from_spatial(double u, double v,
                                                      std::optional<double> distance = std::nullopt);

}  // namespace aris
