#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "asia/auth/acl.hpp"

using namespace asia;
using namespace asia::auth;

static Identity dno() { return {"dno-1", RoleKind::DistributionNetworkOperator}; }

TEST_CASE("empty table denies everything") {
    AclTable t;
    auto d = t.authorize(dno(), "gw-7", Permission::IssueCommand, 0);
    CHECK(!d.allowed);
    CHECK(d.reason == DenyReason::NoMatch);
}

TEST_CASE("role wildcard allows matching role on any gateway") {
    AclTable t;
    AclEntry e;
    e.principal.role = RoleKind::DistributionNetworkOperator;
    e.permissions = PermissionSet{Permission::IssueCommand};
    t.add(e);

    CHECK(t.authorize(dno(), "gw-7", Permission::IssueCommand, 0).allowed);

    auto d = t.authorize(dno(), "gw-7", Permission::ChangeConfiguration, 0);
    CHECK(!d.allowed);
    CHECK(d.reason == DenyReason::WrongPermission);

    Identity user{"user-1", RoleKind::EndUser};
    CHECK(t.authorize(user, "gw-7", Permission::IssueCommand, 0).reason == DenyReason::NoMatch);
}

TEST_CASE("expiry is exclusive at the boundary") {
    AclTable t;
    AclEntry e;
    e.principal.id = "dno-1";
    e.permissions = PermissionSet{Permission::GetStatus};
    e.expiry = 100;
    t.add(e);

    CHECK(t.authorize(dno(), "gw-1", Permission::GetStatus, 99).allowed);
    CHECK(t.authorize(dno(), "gw-1", Permission::GetStatus, 100).reason == DenyReason::Expired);
    CHECK(t.authorize(dno(), "gw-1", Permission::GetStatus, 101).reason == DenyReason::Expired);
}

TEST_CASE("first match wins in order") {
    AclTable t;
    AclEntry narrow;
    narrow.principal.id = "dno-1";
    narrow.gateway_id = "gw-7";
    narrow.permissions = PermissionSet{Permission::GetStatus};
    t.add(narrow);
    AclEntry broad;
    broad.principal.role = RoleKind::DistributionNetworkOperator;
    broad.permissions = PermissionSet{Permission::IssueCommand, Permission::GetStatus};
    t.add(broad);

    // First entry matches and lacks IssueCommand; later entries are not consulted.
    CHECK(t.authorize(dno(), "gw-7", Permission::IssueCommand, 0).reason ==
          DenyReason::WrongPermission);
    CHECK(t.authorize(dno(), "gw-9", Permission::IssueCommand, 0).allowed);
}

TEST_CASE("entries must carry permissions") {
    AclTable t;
    CHECK_THROWS_AS(t.add(AclEntry{}), std::invalid_argument);
}

TEST_CASE("text format parses principals, wildcards, permissions, expiry") {
    auto t = AclTable::parse(
        "# comment\n"
        "role:DistributionNetworkOperator * IssueCommand,GetStatus\n"
        "id:user-1 gw-7 ChangeConfiguration,InstallApplication,GetStatus,IssueCommand 5000\n"
        "\n"
        "* gw-9 GetStatus\n");
    REQUIRE(t.entries().size() == 3);

    CHECK(t.authorize(dno(), "gw-x", Permission::GetStatus, 0).allowed);
    Identity user{"user-1", RoleKind::EndUser};
    CHECK(t.authorize(user, "gw-7", Permission::InstallApplication, 4999).allowed);
    CHECK(t.authorize(user, "gw-7", Permission::InstallApplication, 5000).reason ==
          DenyReason::Expired);
    Identity anyone{"whoever", RoleKind::EnergyMarket};
    CHECK(t.authorize(anyone, "gw-9", Permission::GetStatus, 0).allowed);
}

TEST_CASE("malformed acl lines are rejected") {
    CHECK_THROWS(AclTable::parse("role:NotARole * GetStatus\n"));
    CHECK_THROWS(AclTable::parse("id:a *\n"));
    CHECK_THROWS(AclTable::parse("id:a * NotAPermission\n"));
    CHECK_THROWS(AclTable::parse("banana * GetStatus\n"));
}

// Default-deny property over generated queries: nothing not explicitly
// granted is ever allowed.
TEST_CASE("default deny property") {
    AclTable t;
    AclEntry e;
    e.principal.id = "dno-1";
    e.gateway_id = "gw-1";
    e.permissions = PermissionSet{Permission::IssueCommand};
    t.add(e);

    for (int role = 0; role < kRoleKindCount; ++role) {
        for (int perm = 0; perm < kPermissionCount; ++perm) {
            for (const char* gw : {"gw-1", "gw-2"}) {
                Identity peer{"dno-1", static_cast<RoleKind>(role)};
                bool should_allow = std::string(gw) == "gw-1" &&
                                    static_cast<Permission>(perm) == Permission::IssueCommand;
                auto d = t.authorize(peer, gw, static_cast<Permission>(perm), 0);
                CHECK(d.allowed == should_allow);
            }
        }
    }
}
