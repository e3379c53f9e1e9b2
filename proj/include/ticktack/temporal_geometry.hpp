// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <utility>

#include "ticktack/calendar.hpp"

namespace ticktack {

struct EncodingConfig {
    double alpha = 1.0;
    double beta = 0.5;
    int dim = 64;
    double wavelength_base = 10000.0;

    /// Throws Error{InvalidConfig} naming the offending field.
    void validate() const;
};

/// A year on the sexagenary spiral. The angle is shared by every year of a
/// term; the radius grows by beta per elapsed cycle.
struct PolarTemporalCoordinate {
    double theta_degrees = 0.0;
    double radius = 0.0;
    int epoch = 0;
};

struct CartesianTemporalCoordinate {
    double x = 0.0;
    double y = 0.0;
};

/// Cycles elapsed since the earliest supported cycle; keeps the radius positive
/// over the whole supported range.
int cycles_since_origin(GregorianYear year) noexcept;

PolarTemporalCoordinate to_polar(GregorianYear year, const EncodingConfig& cfg);
CartesianTemporalCoordinate to_cartesian(const PolarTemporalCoordinate& p);

template <typename Scalar>
using TemporalEncodingVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Sinusoidal encoding of a scalar: entry 2j is sin(s / base^(2j/d)) and
/// entry 2j+1 the matching cosine.
template <typename Scalar = double>
TemporalEncodingVector<Scalar> temporal_encoding(Scalar s, const EncodingConfig& cfg) {
    cfg.validate();
    TemporalEncodingVector<Scalar> out(cfg.dim);
    const Scalar base = static_cast<Scalar>(cfg.wavelength_base);
    const Scalar d = static_cast<Scalar>(cfg.dim);
    for (int j = 0; j < cfg.dim / 2; ++j) {
        const Scalar arg = s / std::pow(base, static_cast<Scalar>(2 * j) / d);
        out(2 * j) = std::sin(arg);
        out(2 * j + 1) = std::cos(arg);
    }
    return out;
}

template <typename Scalar = double>
struct YearEncoding {
    TemporalEncodingVector<Scalar> te_x;
    TemporalEncodingVector<Scalar> te_y;
};

template <typename Scalar = double>
YearEncoding<Scalar> encode_year(GregorianYear year, const EncodingConfig& cfg) {
    const auto xy = to_cartesian(to_polar(year, cfg));
    return {temporal_encoding<Scalar>(static_cast<Scalar>(xy.x), cfg),
            temporal_encoding<Scalar>(static_cast<Scalar>(xy.y), cfg)};
}

}  // namespace ticktack
