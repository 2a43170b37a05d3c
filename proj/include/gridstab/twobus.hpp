#pragma once

#include "gridstab/feeder.hpp"

namespace gridstab {

// Two-bus fixtures: a slack bus "source" feeding one PQ bus "load".
//
// The *_raw_b variants take the entries wanted in the sensitivity matrices
// (the B-matrix entries of the closed loop) and build the line with half of
// them, since every sensitivity entry carries a factor of two.

Feeder two_bus(const LineImpedance& z, double base_kv = 1.0, double base_mva = 1.0);

/// Single-phase line with B entries R = r_b, X = x_b.
Feeder two_bus_raw_b(double r_b, double x_b);
/// Single-phase R/X family: B entries X = L1/sqrt(d^2+1), R = d X.
Feeder two_bus_rx(double d, double l1);
/// Three-phase phase-ratio family with purely reactive B block of spectral norm L2.
Feeder two_bus_phase_ratio(double cx, double l2);

}  // namespace gridstab
