#ifndef ASIA_NETSIM_TOPOLOGY_HPP
#define ASIA_NETSIM_TOPOLOGY_HPP

#include <string>
#include <vector>

#include "asia/netsim/sim.hpp"

namespace asia::netsim {

// Line-oriented topology file:
//   node <name> [nat]
//   link <a> <b> <latency_ms>
//   nodes <prefix> <count> [nat]           # <prefix>1 .. <prefix><count>
//   links <hub> <prefix> <count> <latency_ms>
// Blank lines and '#' comments are skipped.
struct Topology {
    struct NodeSpec {
        std::string name;
        bool nat = false;
    };
    struct LinkSpec {
        std::string a, b;
        SimTime latency_ms = 0;
    };
    std::vector<NodeSpec> nodes;
    std::vector<LinkSpec> links;

    static Topology parse(const std::string& text);
    static Topology load_file(const std::string& path);
    void build(SimNet& sim) const;  // throws on DanglingLink / DuplicateNode
};

// Fault script file:
//   at <ms> drop <n>
//   at <ms> tamper <byte_index> <xor_mask>
//   at <ms> linkdown <node> <duration_ms>
//   at <ms> rebind <node>
//   at <ms> configmutate <gateway>
//   at <ms> tancorrupt <gateway>
//   at <ms> tanreplay <gateway>
//   at <ms> credsubstitute <gateway>
FaultScript parse_fault_script(const std::string& text);
FaultScript load_fault_script_file(const std::string& path);

}  // namespace asia::netsim

#endif
