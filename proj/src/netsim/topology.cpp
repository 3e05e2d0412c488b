#include "asia/netsim/topology.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace asia::netsim {

static std::string read_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(std::string("cannot open ") + what + " file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

static std::vector<std::string> tokens(const std::string& line) {
    std::string stripped = line;
    auto hash = stripped.find('#');
    if (hash != std::string::npos) stripped.erase(hash);
    std::vector<std::string> out;
    std::istringstream in(stripped);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

static std::runtime_error parse_error(const char* what, int lineno, const std::string& msg) {
    return std::runtime_error(std::string(what) + " line " + std::to_string(lineno) + ": " + msg);
}

Topology Topology::parse(const std::string& text) {
    Topology topo;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = tokens(line);
        if (toks.empty()) continue;
        const std::string& kw = toks[0];
        if (kw == "node" && (toks.size() == 2 || toks.size() == 3)) {
            bool nat = toks.size() == 3 && toks[2] == "nat";
            if (toks.size() == 3 && !nat) throw parse_error("topology", lineno, "expected 'nat'");
            topo.nodes.push_back({toks[1], nat});
        } else if (kw == "link" && toks.size() == 4) {
            topo.links.push_back({toks[1], toks[2], std::stoull(toks[3])});
        } else if (kw == "nodes" && (toks.size() == 3 || toks.size() == 4)) {
            bool nat = toks.size() == 4 && toks[3] == "nat";
            if (toks.size() == 4 && !nat) throw parse_error("topology", lineno, "expected 'nat'");
            uint64_t count = std::stoull(toks[2]);
            for (uint64_t i = 1; i <= count; ++i)
                topo.nodes.push_back({toks[1] + std::to_string(i), nat});
        } else if (kw == "links" && toks.size() == 5) {
            uint64_t count = std::stoull(toks[3]);
            SimTime lat = std::stoull(toks[4]);
            for (uint64_t i = 1; i <= count; ++i)
                topo.links.push_back({toks[1], toks[2] + std::to_string(i), lat});
        } else {
            throw parse_error("topology", lineno, "unrecognized record '" + kw + "'");
        }
    }
    return topo;
}

Topology Topology::load_file(const std::string& path) {
    return parse(read_file(path, "topology"));
}

void Topology::build(SimNet& sim) const {
    for (const auto& n : nodes) sim.add_node(n.name, n.nat);
    for (const auto& l : links) sim.add_link(l.a, l.b, l.latency_ms);
}

FaultScript parse_fault_script(const std::string& text) {
    FaultScript script;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto toks = tokens(line);
        if (toks.empty()) continue;
        if (toks.size() < 3 || toks[0] != "at")
            throw parse_error("fault script", lineno, "expected 'at <ms> <fault> ...'");
        Fault f;
        f.time = std::stoull(toks[1]);
        const std::string& kind = toks[2];
        if (kind == "drop" && toks.size() == 4) {
            f.kind = FaultKind::DropNext;
            f.count = std::stoull(toks[3]);
        } else if (kind == "tamper" && toks.size() == 5) {
            f.kind = FaultKind::TamperNext;
            f.byte_index = std::stoull(toks[3]);
            f.xor_mask = static_cast<uint8_t>(std::stoul(toks[4], nullptr, 0));
        } else if (kind == "linkdown" && toks.size() == 5) {
            f.kind = FaultKind::LinkDown;
            f.node = toks[3];
            f.duration = std::stoull(toks[4]);
        } else if (kind == "rebind" && toks.size() == 4) {
            f.kind = FaultKind::AddressRebind;
            f.node = toks[3];
        } else if (kind == "configmutate" && toks.size() == 4) {
            f.kind = FaultKind::ConfigMutate;
            f.node = toks[3];
        } else if (kind == "tancorrupt" && toks.size() == 4) {
            f.kind = FaultKind::TanCorrupt;
            f.node = toks[3];
        } else if (kind == "tanreplay" && toks.size() == 4) {
            f.kind = FaultKind::TanReplay;
            f.node = toks[3];
        } else if (kind == "credsubstitute" && toks.size() == 4) {
            f.kind = FaultKind::CredSubstitute;
            f.node = toks[3];
        } else {
            throw parse_error("fault script", lineno, "unrecognized fault '" + kind + "'");
        }
        script.push_back(f);
    }
    return script;
}

FaultScript load_fault_script_file(const std::string& path) {
    return parse_fault_script(read_file(path, "fault script"));
}

}  // namespace asia::netsim
