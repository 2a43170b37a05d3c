#include "gridstab/twobus.hpp"

#include "gridstab/metrics.hpp"

namespace gridstab {

Feeder two_bus(const LineImpedance& z, double base_kv, double base_mva) {
    std::vector<Node> nodes{{"source", PhaseSet::all()}, {"load", z.phases}};
    std::vector<Line> lines{{"line", "source", "load", z}};
    return Feeder(std::move(nodes), std::move(lines), "source", base_kv, base_mva, "two_bus");
}

Feeder two_bus_raw_b(double r_b, double x_b) {
    return two_bus(LineImpedance::single_phase(r_b / 2.0, x_b / 2.0));
}

Feeder two_bus_rx(double d, double l1) {
    PhaseSet a;
    a.insert(Phase::A);
    return two_bus(make_rx_line(d, l1 / 2.0, a));
}

Feeder two_bus_phase_ratio(double cx, double l2) { return two_bus(make_phase_ratio_line(cx, l2 / 2.0)); }

}  // namespace gridstab
