#ifndef ASIA_CORE_TYPES_HPP
#define ASIA_CORE_TYPES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asia/core/bytes.hpp"
#include "asia/core/codec.hpp"
#include "asia/core/crypto.hpp"

namespace asia {

// Logical simulation time, milliseconds.
using SimTime = uint64_t;

// ---------------------------------------------------------------------------
// Roles and identities
// ---------------------------------------------------------------------------

enum class RoleKind : uint8_t {
    EnergyProvider = 0,
    DistributionNetworkOperator = 1,
    GatewayOperator = 2,
    EnergyMarket = 3,
    MeterDataManagement = 4,
    EndUser = 5,
    IctGateway = 6,
};
constexpr int kRoleKindCount = 7;

const char* role_name(RoleKind r);
std::optional<RoleKind> role_from_name(const std::string& s);
RoleKind role_from_u8(uint8_t v);  // throws CodecError(BadEnumValue)

struct Identity {
    std::string id;  // non-empty, <= 128 bytes
    RoleKind role = RoleKind::EndUser;

    void validate() const;  // throws std::invalid_argument
    void encode(codec::Writer& w) const;
    static Identity decode(codec::Reader& r);
    bool operator==(const Identity&) const = default;
};

// ---------------------------------------------------------------------------
// Permissions
// ---------------------------------------------------------------------------

enum class Permission : uint8_t {
    ChangeConfiguration = 0,
    InstallApplication = 1,
    GetStatus = 2,
    IssueCommand = 3,
};
constexpr int kPermissionCount = 4;

const char* permission_name(Permission p);
std::optional<Permission> permission_from_name(const std::string& s);
Permission permission_from_u8(uint8_t v);  // throws CodecError(BadEnumValue)

// Small closed set, kept as a bitmask.
class PermissionSet {
public:
    PermissionSet() = default;
    explicit PermissionSet(std::initializer_list<Permission> ps) {
        for (auto p : ps) add(p);
    }
    void add(Permission p) { bits_ |= mask(p); }
    bool contains(Permission p) const { return bits_ & mask(p); }
    bool empty() const { return bits_ == 0; }
    uint8_t bits() const { return bits_; }
    static PermissionSet from_bits(uint8_t bits);  // rejects bits above the 4 valid ones
    std::string to_string() const;                 // comma-separated names
    bool operator==(const PermissionSet&) const = default;

private:
    static uint8_t mask(Permission p) { return static_cast<uint8_t>(1u << static_cast<uint8_t>(p)); }
    uint8_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Certificates and credentials
// ---------------------------------------------------------------------------

struct Certificate {
    Identity subject;
    Bytes public_key;  // 32 bytes under the MAC scheme
    std::string issuer;
    Bytes signature;  // issuer's signature over canonical(subject, public_key, issuer)

    Bytes canonical_tbs() const;  // the signed portion
    void encode(codec::Writer& w) const;
    static Certificate decode(codec::Reader& r);
    bool operator==(const Certificate&) const = default;
};

// 256-bit digest of canonical(subject, public_key, issuer).
Digest fingerprint(const Certificate& cert);

struct CertCredential {
    Certificate cert;
    Bytes private_key;
};

struct PskCredential {
    std::string key_id;
    Bytes secret;  // 32 bytes
};

struct Credential {
    // Exactly one variant populated.
    std::optional<CertCredential> cert;
    std::optional<PskCredential> psk;

    bool is_cert() const { return cert.has_value(); }
    static Credential from_cert(Certificate c, Bytes private_key);
    static Credential from_psk(std::string key_id, Bytes secret);
};

// ---------------------------------------------------------------------------
// TAN
// ---------------------------------------------------------------------------

struct Tan {
    std::array<uint8_t, 16> value{};  // never all-zero for a generated TAN

    bool is_zero() const;
    std::string hex() const;
    void encode(codec::Writer& w) const;
    static Tan decode(codec::Reader& r);
    bool operator==(const Tan&) const = default;
    bool operator<(const Tan& o) const { return value < o.value; }
};

// ---------------------------------------------------------------------------
// Money: fixed-point EUR with 4 decimal places
// ---------------------------------------------------------------------------

struct Money {
    int64_t ten_thousandths = 0;

    static Money from_double(double eur);  // test/config convenience, round-half-up
    static std::optional<Money> parse(const std::string& s);
    std::string to_string() const;
    bool operator==(const Money&) const = default;
    auto operator<=>(const Money&) const = default;
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

enum class CommandKind : uint8_t {
    ShutoffAppliance = 0,
    ShutoffGenerator = 1,
    PriceSignal = 2,
    StatusQuery = 3,
    ConfigChange = 4,
    InstallApp = 5,
};

const char* command_kind_name(CommandKind k);

enum class ApplianceClass : uint8_t {
    Washer = 0,
    EvCharger = 1,
    Heater = 2,
    SolarGenerator = 3,
    Meter = 4,
};

const char* appliance_class_name(ApplianceClass c);
std::optional<ApplianceClass> appliance_class_from_name(const std::string& s);

struct ShutoffPayload {
    ApplianceClass target = ApplianceClass::Washer;
    Money requested_reduction_kwh;  // non-negative
    bool operator==(const ShutoffPayload&) const = default;
};

struct PriceSignalPayload {
    Money price_eur_per_kwh;  // non-negative
    SimTime valid_from = 0;
    SimTime valid_until = 0;  // >= valid_from
    bool operator==(const PriceSignalPayload&) const = default;
};

struct ConfigChangePayload {
    std::string key;
    std::string value;
    bool operator==(const ConfigChangePayload&) const = default;
};

struct InstallAppPayload {
    std::string manifest;
    bool operator==(const InstallAppPayload&) const = default;
};

struct Command {
    CommandKind kind = CommandKind::StatusQuery;
    std::optional<ShutoffPayload> shutoff;      // ShutoffAppliance
    std::optional<PriceSignalPayload> price;    // PriceSignal
    std::optional<ConfigChangePayload> config;  // ConfigChange
    std::optional<InstallAppPayload> install;   // InstallApp
    SimTime issued_at = 0;
    uint64_t sequence = 0;

    // Permission class needed to execute this command.
    Permission required_permission() const;
    void validate() const;
    void encode(codec::Writer& w) const;
    static Command decode(codec::Reader& r);
    bool operator==(const Command&) const = default;
};

struct ApplianceStatus {
    std::string appliance_id;
    ApplianceClass klass = ApplianceClass::Washer;
    bool running = false;
    Money load_kw;
    bool generating = false;

    void encode(codec::Writer& w) const;
    static ApplianceStatus decode(codec::Reader& r);
    bool operator==(const ApplianceStatus&) const = default;
};

enum class CommandStatus : uint8_t {
    Ok = 0,
    Partial = 1,
    Refused = 2,
};

const char* command_status_name(CommandStatus s);

struct CommandResult {
    CommandKind kind = CommandKind::StatusQuery;
    CommandStatus status = CommandStatus::Ok;
    Money achieved_reduction_kwh;
    std::vector<std::string> affected;  // appliance ids acted on
    std::vector<ApplianceStatus> snapshot;
    std::string detail;

    void encode(codec::Writer& w) const;
    static CommandResult decode(codec::Reader& r);
    bool operator==(const CommandResult&) const = default;
};

// ---------------------------------------------------------------------------
// Connection-establishment modes
// ---------------------------------------------------------------------------

enum class Mode : uint8_t {
    Invocation = 0,
    Redirect = 1,
    Proxy = 2,
};

const char* mode_name(Mode m);
std::optional<Mode> mode_from_name(const std::string& s);
Mode mode_from_u8(uint8_t v);

}  // namespace asia

#endif
