#ifndef ASIA_AUTH_ACL_HPP
#define ASIA_AUTH_ACL_HPP

#include <variant>
#include <vector>

#include "asia/core/types.hpp"

namespace asia::auth {

// Principal match: a concrete identity or a role wildcard.
struct AclPrincipal {
    std::optional<std::string> id;    // exact id match when set
    std::optional<RoleKind> role;     // role wildcard when set; both unset = any

    bool matches(const Identity& peer) const;
    std::string to_string() const;
};

struct AclEntry {
    AclPrincipal principal;
    std::optional<std::string> gateway_id;  // unset = any gateway
    PermissionSet permissions;              // non-empty
    std::optional<SimTime> expiry;          // exclusive: entry dead at t >= expiry

    bool matches(const Identity& peer, const std::string& gateway) const;
    bool live_at(SimTime now) const;
};

enum class DenyReason { NoMatch, Expired, WrongPermission };
const char* deny_reason_name(DenyReason r);

struct Decision {
    bool allowed = false;
    DenyReason reason = DenyReason::NoMatch;

    static Decision allow() { return {true, DenyReason::NoMatch}; }
    static Decision deny(DenyReason r) { return {false, r}; }
};

// Ordered first-match, default deny.
class AclTable {
public:
    void add(AclEntry entry);  // throws on empty permission set
    const std::vector<AclEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    Decision authorize(const Identity& peer, const std::string& gateway_id, Permission perm,
                       SimTime now) const;

    // One entry per line: principal, gateway, comma-separated permissions,
    // optional expiry. Principal: "id:<name>", "role:<RoleKind>", or "*".
    // Gateway: "<id>" or "*". Blank lines and '#' comments skipped.
    static AclTable parse(const std::string& text);
    static AclTable load_file(const std::string& path);

private:
    std::vector<AclEntry> entries_;
};

}  // namespace asia::auth

#endif
