#include "asia/auth/acl.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace asia::auth {

bool AclPrincipal::matches(const Identity& peer) const {
    if (id && *id != peer.id) return false;
    if (role && *role != peer.role) return false;
    return true;
}

std::string AclPrincipal::to_string() const {
    if (id) return "id:" + *id;
    if (role) return std::string("role:") + role_name(*role);
    return "*";
}

bool AclEntry::matches(const Identity& peer, const std::string& gateway) const {
    if (!principal.matches(peer)) return false;
    if (gateway_id && *gateway_id != gateway) return false;
    return true;
}

bool AclEntry::live_at(SimTime now) const { return !expiry || now < *expiry; }

const char* deny_reason_name(DenyReason r) {
    switch (r) {
        case DenyReason::NoMatch: return "NoMatch";
        case DenyReason::Expired: return "Expired";
        case DenyReason::WrongPermission: return "WrongPermission";
    }
    return "?";
}

void AclTable::add(AclEntry entry) {
    if (entry.permissions.empty()) throw std::invalid_argument("ACL entry with no permissions");
    entries_.push_back(std::move(entry));
}

Decision AclTable::authorize(const Identity& peer, const std::string& gateway_id, Permission perm,
                             SimTime now) const {
    for (const auto& e : entries_) {
        if (!e.matches(peer, gateway_id)) continue;
        if (!e.live_at(now)) return Decision::deny(DenyReason::Expired);
        if (!e.permissions.contains(perm)) return Decision::deny(DenyReason::WrongPermission);
        return Decision::allow();
    }
    return Decision::deny(DenyReason::NoMatch);
}

static std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

AclTable AclTable::parse(const std::string& text) {
    AclTable table;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto toks = split_ws(line);
        if (toks.empty()) continue;
        if (toks.size() < 3 || toks.size() > 4)
            throw std::runtime_error("acl line " + std::to_string(lineno) + ": expected 3-4 fields");

        AclEntry e;
        const std::string& p = toks[0];
        if (p == "*") {
            // any principal
        } else if (p.rfind("id:", 0) == 0) {
            e.principal.id = p.substr(3);
        } else if (p.rfind("role:", 0) == 0) {
            auto r = role_from_name(p.substr(5));
            if (!r) throw std::runtime_error("acl line " + std::to_string(lineno) + ": bad role");
            e.principal.role = r;
        } else {
            throw std::runtime_error("acl line " + std::to_string(lineno) + ": bad principal");
        }
        if (toks[1] != "*") e.gateway_id = toks[1];

        std::istringstream perms(toks[2]);
        std::string name;
        while (std::getline(perms, name, ',')) {
            auto perm = permission_from_name(name);
            if (!perm)
                throw std::runtime_error("acl line " + std::to_string(lineno) + ": bad permission '" +
                                         name + "'");
            e.permissions.add(*perm);
        }
        if (e.permissions.empty())
            throw std::runtime_error("acl line " + std::to_string(lineno) + ": no permissions");
        if (toks.size() == 4) e.expiry = std::stoull(toks[3]);
        table.add(std::move(e));
    }
    return table;
}

AclTable AclTable::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ACL file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

}  // namespace asia::auth
