#include "asia/netsim/monitor.hpp"

#include <set>

namespace asia::netsim {

std::string FlowAlert::to_string() const {
    return "t=" + std::to_string(time) + " requestor=" + requestor + " role=" + requestor_role +
           " gateway=" + gateway + " mode=" + mode + " permission=" + permission;
}

std::vector<FlowAlert> monitor_flows(const std::vector<FlowTuple>& exported,
                                     const std::vector<LogEntry>& log) {
    std::set<std::tuple<std::string, std::string, std::string, std::string>> allowed;
    for (const auto& t : exported) {
        allowed.insert({role_name(t.requestor_role), t.gateway_id, mode_name(t.mode),
                        permission_name(t.permission)});
    }
    std::vector<FlowAlert> alerts;
    for (const auto& e : log) {
        if (e.event != "session_observed") continue;
        FlowAlert a;
        a.time = e.time;
        a.requestor = e.field("requestor").value_or("?");
        a.requestor_role = e.field("role").value_or("?");
        a.gateway = e.field("gateway").value_or("?");
        a.mode = e.field("mode").value_or("?");
        a.permission = e.field("permission").value_or("?");
        if (!allowed.count({a.requestor_role, a.gateway, a.mode, a.permission}))
            alerts.push_back(std::move(a));
    }
    return alerts;
}

}  // namespace asia::netsim
