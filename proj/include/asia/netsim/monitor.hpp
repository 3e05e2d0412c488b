#ifndef ASIA_NETSIM_MONITOR_HPP
#define ASIA_NETSIM_MONITOR_HPP

#include "asia/netsim/sim.hpp"

namespace asia::netsim {

struct FlowAlert {
    SimTime time = 0;
    std::string requestor;
    std::string requestor_role;
    std::string gateway;
    std::string mode;
    std::string permission;

    std::string to_string() const;
};

// Replays session_observed events against the exported allowed-flow tuples;
// every observed session not covered by a tuple yields one alert.
std::vector<FlowAlert> monitor_flows(const std::vector<FlowTuple>& exported,
                                     const std::vector<LogEntry>& log);

}  // namespace asia::netsim

#endif
