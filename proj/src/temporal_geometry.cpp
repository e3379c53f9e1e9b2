// SPDX-License-Identifier: Apache-2.0

#include "ticktack/temporal_geometry.hpp"

#include "ticktack/error.hpp"

namespace ticktack {

void EncodingConfig::validate() const {
    if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidConfig, "encoding.alpha must be > 0");
    if (!(beta >= 0.0)) throw Error(ErrorCode::InvalidConfig, "encoding.beta must be >= 0");
    if (dim < 2 || dim % 2 != 0) {
        throw Error(ErrorCode::InvalidConfig, "encoding.dim must be even and >= 2");
    }
    if (!(wavelength_base > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "encoding.wavelength_base must be > 0");
    }
}

int cycles_since_origin(GregorianYear year) noexcept {
    static const int origin = epoch_index(GregorianYear(GregorianYear::kMin));
    return epoch_index(year) - origin;
}

PolarTemporalCoordinate to_polar(GregorianYear year, const EncodingConfig& cfg) {
    cfg.validate();
    const CycleIndex index = to_cycle_index(year);
    // term_number runs 1..60 inside a cycle, so the radius is linear in the
    // astronomical year and never steps back at a Guihai year.
    const int term_number = term_of(index).term_number;
    PolarTemporalCoordinate p;
    p.theta_degrees = 6.0 * index.value();
    p.epoch = epoch_index(year);
    p.radius = (cfg.alpha + cfg.beta * cycles_since_origin(year)) +
               cfg.beta * (static_cast<double>(term_number) / 60.0);
    return p;
}

CartesianTemporalCoordinate to_cartesian(const PolarTemporalCoordinate& p) {
    const double rad = p.theta_degrees * std::numbers::pi / 180.0;
    return {p.radius * std::cos(rad), p.radius * std::sin(rad)};
}

}  // namespace ticktack
