#include "asia/core/types.hpp"

#include <cmath>
#include <stdexcept>

namespace asia {

using codec::CodecError;
using codec::Err;

// ---------------------------------------------------------------------------
// RoleKind
// ---------------------------------------------------------------------------

static const char* kRoleNames[kRoleKindCount] = {
    "EnergyProvider",   "DistributionNetworkOperator",
    "GatewayOperator",  "EnergyMarket",
    "MeterDataManagement", "EndUser",
    "IctGateway",
};

const char* role_name(RoleKind r) { return kRoleNames[static_cast<uint8_t>(r)]; }

std::optional<RoleKind> role_from_name(const std::string& s) {
    for (int i = 0; i < kRoleKindCount; ++i) {
        if (s == kRoleNames[i]) return static_cast<RoleKind>(i);
    }
    return std::nullopt;
}

RoleKind role_from_u8(uint8_t v) {
    if (v >= kRoleKindCount) throw CodecError(Err::BadEnumValue, "bad RoleKind");
    return static_cast<RoleKind>(v);
}

void Identity::validate() const {
    if (id.empty() || id.size() > 128) throw std::invalid_argument("identity id length");
}

void Identity::encode(codec::Writer& w) const {
    w.str(id);
    w.u8(static_cast<uint8_t>(role));
}

Identity Identity::decode(codec::Reader& r) {
    Identity out;
    out.id = r.str();
    out.role = role_from_u8(r.u8());
    if (out.id.empty() || out.id.size() > 128)
        throw CodecError(Err::NonCanonical, "identity id length");
    return out;
}

// ---------------------------------------------------------------------------
// Permission
// ---------------------------------------------------------------------------

static const char* kPermNames[kPermissionCount] = {
    "ChangeConfiguration",
    "InstallApplication",
    "GetStatus",
    "IssueCommand",
};

const char* permission_name(Permission p) { return kPermNames[static_cast<uint8_t>(p)]; }

std::optional<Permission> permission_from_name(const std::string& s) {
    for (int i = 0; i < kPermissionCount; ++i) {
        if (s == kPermNames[i]) return static_cast<Permission>(i);
    }
    return std::nullopt;
}

Permission permission_from_u8(uint8_t v) {
    if (v >= kPermissionCount) throw CodecError(Err::BadEnumValue, "bad Permission");
    return static_cast<Permission>(v);
}

PermissionSet PermissionSet::from_bits(uint8_t bits) {
    if (bits & ~0x0f) throw CodecError(Err::BadEnumValue, "bad permission bits");
    PermissionSet s;
    s.bits_ = bits;
    return s;
}

std::string PermissionSet::to_string() const {
    std::string out;
    for (int i = 0; i < kPermissionCount; ++i) {
        auto p = static_cast<Permission>(i);
        if (!contains(p)) continue;
        if (!out.empty()) out += ",";
        out += permission_name(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Certificate / Credential
// ---------------------------------------------------------------------------

Bytes Certificate::canonical_tbs() const {
    codec::Writer w;
    subject.encode(w);
    w.bytes16(public_key);
    w.str(issuer);
    return w.take();
}

void Certificate::encode(codec::Writer& w) const {
    subject.encode(w);
    w.bytes16(public_key);
    w.str(issuer);
    w.bytes16(signature);
}

Certificate Certificate::decode(codec::Reader& r) {
    Certificate c;
    c.subject = Identity::decode(r);
    c.public_key = r.bytes16();
    c.issuer = r.str();
    c.signature = r.bytes16();
    return c;
}

Digest fingerprint(const Certificate& cert) { return crypto::sha256(cert.canonical_tbs()); }

Credential Credential::from_cert(Certificate c, Bytes private_key) {
    Credential out;
    out.cert = CertCredential{std::move(c), std::move(private_key)};
    return out;
}

Credential Credential::from_psk(std::string key_id, Bytes secret) {
    Credential out;
    out.psk = PskCredential{std::move(key_id), std::move(secret)};
    return out;
}

// ---------------------------------------------------------------------------
// Tan
// ---------------------------------------------------------------------------

bool Tan::is_zero() const {
    for (auto b : value)
        if (b) return false;
    return true;
}

std::string Tan::hex() const { return to_hex(value.data(), value.size()); }

void Tan::encode(codec::Writer& w) const { w.raw(value.data(), value.size()); }

Tan Tan::decode(codec::Reader& r) {
    Tan t;
    Bytes b = r.raw(16);
    std::copy(b.begin(), b.end(), t.value.begin());
    return t;
}

// ---------------------------------------------------------------------------
// Money
// ---------------------------------------------------------------------------

Money Money::from_double(double eur) {
    return Money{static_cast<int64_t>(std::llround(eur * 10000.0))};
}

std::optional<Money> Money::parse(const std::string& s) {
    if (s.empty()) return std::nullopt;
    size_t i = 0;
    bool neg = false;
    if (s[0] == '-') {
        neg = true;
        i = 1;
    }
    int64_t whole = 0;
    bool any = false;
    for (; i < s.size() && s[i] != '.'; ++i) {
        if (s[i] < '0' || s[i] > '9') return std::nullopt;
        whole = whole * 10 + (s[i] - '0');
        any = true;
    }
    int64_t frac = 0;
    int frac_digits = 0;
    if (i < s.size()) {  // at '.'
        for (++i; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9' || frac_digits >= 4) return std::nullopt;
            frac = frac * 10 + (s[i] - '0');
            ++frac_digits;
            any = true;
        }
    }
    if (!any) return std::nullopt;
    while (frac_digits < 4) {
        frac *= 10;
        ++frac_digits;
    }
    int64_t v = whole * 10000 + frac;
    return Money{neg ? -v : v};
}

std::string Money::to_string() const {
    int64_t v = ten_thousandths;
    std::string sign;
    if (v < 0) {
        sign = "-";
        v = -v;
    }
    std::string frac = std::to_string(v % 10000);
    frac.insert(0, 4 - frac.size(), '0');
    return sign + std::to_string(v / 10000) + "." + frac;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

static const char* kCommandKindNames[] = {
    "ShutoffAppliance", "ShutoffGenerator", "PriceSignal",
    "StatusQuery",      "ConfigChange",     "InstallApp",
};

const char* command_kind_name(CommandKind k) { return kCommandKindNames[static_cast<uint8_t>(k)]; }

static const char* kApplianceClassNames[] = {
    "Washer", "EvCharger", "Heater", "SolarGenerator", "Meter",
};

const char* appliance_class_name(ApplianceClass c) {
    return kApplianceClassNames[static_cast<uint8_t>(c)];
}

std::optional<ApplianceClass> appliance_class_from_name(const std::string& s) {
    for (int i = 0; i < 5; ++i) {
        if (s == kApplianceClassNames[i]) return static_cast<ApplianceClass>(i);
    }
    return std::nullopt;
}

Permission Command::required_permission() const {
    switch (kind) {
        case CommandKind::ShutoffAppliance:
        case CommandKind::ShutoffGenerator:
        case CommandKind::PriceSignal: return Permission::IssueCommand;
        case CommandKind::StatusQuery: return Permission::GetStatus;
        case CommandKind::ConfigChange: return Permission::ChangeConfiguration;
        case CommandKind::InstallApp: return Permission::InstallApplication;
    }
    return Permission::IssueCommand;
}

void Command::validate() const {
    switch (kind) {
        case CommandKind::ShutoffAppliance:
            if (!shutoff) throw std::invalid_argument("shutoff payload missing");
            if (shutoff->requested_reduction_kwh.ten_thousandths < 0)
                throw std::invalid_argument("negative load reduction");
            break;
        case CommandKind::PriceSignal:
            if (!price) throw std::invalid_argument("price payload missing");
            if (price->price_eur_per_kwh.ten_thousandths < 0)
                throw std::invalid_argument("negative price");
            if (price->valid_from > price->valid_until)
                throw std::invalid_argument("price validity interval inverted");
            break;
        case CommandKind::ConfigChange:
            if (!config) throw std::invalid_argument("config payload missing");
            break;
        case CommandKind::InstallApp:
            if (!install) throw std::invalid_argument("install payload missing");
            break;
        default: break;
    }
}

void Command::encode(codec::Writer& w) const {
    w.u8(static_cast<uint8_t>(kind));
    w.u64(issued_at);
    w.u64(sequence);
    switch (kind) {
        case CommandKind::ShutoffAppliance:
            w.u8(static_cast<uint8_t>(shutoff->target));
            w.i64(shutoff->requested_reduction_kwh.ten_thousandths);
            break;
        case CommandKind::PriceSignal:
            w.i64(price->price_eur_per_kwh.ten_thousandths);
            w.u64(price->valid_from);
            w.u64(price->valid_until);
            break;
        case CommandKind::ConfigChange:
            w.str(config->key);
            w.str(config->value);
            break;
        case CommandKind::InstallApp:
            w.str(install->manifest);
            break;
        default: break;
    }
}

Command Command::decode(codec::Reader& r) {
    Command c;
    uint8_t k = r.u8();
    if (k > 5) throw CodecError(Err::BadEnumValue, "bad CommandKind");
    c.kind = static_cast<CommandKind>(k);
    c.issued_at = r.u64();
    c.sequence = r.u64();
    switch (c.kind) {
        case CommandKind::ShutoffAppliance: {
            uint8_t cls = r.u8();
            if (cls > 4) throw CodecError(Err::BadEnumValue, "bad ApplianceClass");
            c.shutoff = ShutoffPayload{static_cast<ApplianceClass>(cls), Money{r.i64()}};
            break;
        }
        case CommandKind::PriceSignal: {
            PriceSignalPayload p;
            p.price_eur_per_kwh = Money{r.i64()};
            p.valid_from = r.u64();
            p.valid_until = r.u64();
            c.price = p;
            break;
        }
        case CommandKind::ConfigChange: {
            ConfigChangePayload p;
            p.key = r.str();
            p.value = r.str();
            c.config = p;
            break;
        }
        case CommandKind::InstallApp: {
            InstallAppPayload p;
            p.manifest = r.str();
            c.install = p;
            break;
        }
        default: break;
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// ApplianceStatus / CommandResult
// ---------------------------------------------------------------------------

void ApplianceStatus::encode(codec::Writer& w) const {
    w.str(appliance_id);
    w.u8(static_cast<uint8_t>(klass));
    w.u8(running ? 1 : 0);
    w.i64(load_kw.ten_thousandths);
    w.u8(generating ? 1 : 0);
}

ApplianceStatus ApplianceStatus::decode(codec::Reader& r) {
    ApplianceStatus s;
    s.appliance_id = r.str();
    uint8_t cls = r.u8();
    if (cls > 4) throw CodecError(Err::BadEnumValue, "bad ApplianceClass");
    s.klass = static_cast<ApplianceClass>(cls);
    s.running = r.u8() != 0;
    s.load_kw = Money{r.i64()};
    s.generating = r.u8() != 0;
    return s;
}

const char* command_status_name(CommandStatus s) {
    switch (s) {
        case CommandStatus::Ok: return "Ok";
        case CommandStatus::Partial: return "Partial";
        case CommandStatus::Refused: return "Refused";
    }
    return "?";
}

void CommandResult::encode(codec::Writer& w) const {
    w.u8(static_cast<uint8_t>(kind));
    w.u8(static_cast<uint8_t>(status));
    w.i64(achieved_reduction_kwh.ten_thousandths);
    w.u16(static_cast<uint16_t>(affected.size()));
    for (const auto& a : affected) w.str(a);
    w.u16(static_cast<uint16_t>(snapshot.size()));
    for (const auto& s : snapshot) s.encode(w);
    w.str(detail);
}

CommandResult CommandResult::decode(codec::Reader& r) {
    CommandResult out;
    uint8_t k = r.u8();
    if (k > 5) throw CodecError(Err::BadEnumValue, "bad CommandKind");
    out.kind = static_cast<CommandKind>(k);
    uint8_t st = r.u8();
    if (st > 2) throw CodecError(Err::BadEnumValue, "bad CommandStatus");
    out.status = static_cast<CommandStatus>(st);
    out.achieved_reduction_kwh = Money{r.i64()};
    uint16_t na = r.u16();
    for (uint16_t i = 0; i < na; ++i) out.affected.push_back(r.str());
    uint16_t ns = r.u16();
    for (uint16_t i = 0; i < ns; ++i) out.snapshot.push_back(ApplianceStatus::decode(r));
    out.detail = r.str();
    return out;
}

// ---------------------------------------------------------------------------
// Mode
// ---------------------------------------------------------------------------

static const char* kModeNames[] = {"Invocation", "Redirect", "Proxy"};

const char* mode_name(Mode m) { return kModeNames[static_cast<uint8_t>(m)]; }

std::optional<Mode> mode_from_name(const std::string& s) {
    for (int i = 0; i < 3; ++i) {
        if (s == kModeNames[i]) return static_cast<Mode>(i);
    }
    // Accept lowercase in scenario files.
    if (s == "invocation") return Mode::Invocation;
    if (s == "redirect") return Mode::Redirect;
    if (s == "proxy") return Mode::Proxy;
    return std::nullopt;
}

Mode mode_from_u8(uint8_t v) {
    if (v > 2) throw CodecError(Err::BadEnumValue, "bad Mode");
    return static_cast<Mode>(v);
}

}  // namespace asia
