#include "asia/broker/broker.hpp"

#include <algorithm>

namespace asia {

using netsim::ConnId;

const char* gateway_state_name(GatewayState s) {
    switch (s) {
        case GatewayState::Online: return "Online";
        case GatewayState::Stale: return "Stale";
        case GatewayState::Offline: return "Offline";
    }
    return "?";
}

Broker::Broker(netsim::SimNet& sim, std::string node, Config cfg)
    : sim_(sim), node_(std::move(node)), cfg_(std::move(cfg)) {}

void Broker::start() {
    sim_.listen(node_, cfg_.listen_port, [this](ConnId id, const NetAddress& remote) {
        on_accept(id, remote);
        auto* peer = peers_.at(id).get();
        netsim::ConnHandlers h;
        h.on_frame = [this, peer](const Bytes& frame) {
            peer->channel->on_lower_frame(frame, sim_.now());
        };
        h.on_close = [this, id](netsim::CloseReason) { on_close(id); };
        return h;
    });
    log("listen", {{"port", std::to_string(cfg_.listen_port)}});
}

void Broker::on_accept(ConnId id, const NetAddress& remote) {
    auto peer = std::make_unique<Peer>();
    peer->conn = id;
    peer->remote = remote;
    peer->channel = std::make_unique<proto::SecureChannel>(
        auth::Handshake::Role::Responder, cfg_.credential, &cfg_.trust, sim_.rng(),
        &seen_nonces_);
    Peer* p = peer.get();
    p->channel->on_ready = [this, p] {
        known_roles_[p->peer_id().id] = p->peer_id().role;
        log("auth_ok", {{"peer", p->peer_id().id},
                        {"role", role_name(p->peer_id().role)},
                        {"from", p->remote.to_string()}});
    };
    p->channel->on_fail = [this, p](const std::string& reason) {
        log("auth_fail", {{"from", p->remote.to_string()}, {"reason", reason}});
        sim_.close(p->conn);
    };
    p->channel->on_message = [this, p](const WireMessage& msg) { on_message(*p, msg); };
    p->channel->attach([this, id](Bytes frame) { sim_.send(id, std::move(frame)); }, sim_.now());
    peers_[id] = std::move(peer);
}

void Broker::on_close(ConnId id) {
    auto it = peers_.find(id);
    if (it == peers_.end()) return;
    const std::string gw = it->second->registered_gateway;
    if (!gw.empty()) {
        log("gateway_channel_lost", {{"gateway", gw}});
        auto rit = registry_.find(gw);
        if (rit != registry_.end() && rit->second.channel == id) rit->second.channel = 0;
        // Tear down proxy sessions riding this permanent channel.
        for (auto& ps : proxies_) {
            if (ps.gateway_id == gw && ps.open) {
                ps.open = false;
                if (sim_.is_open(ps.requestor_conn)) sim_.close(ps.requestor_conn);
            }
        }
    }
    peers_.erase(it);
}

void Broker::on_message(Peer& peer, const WireMessage& msg) {
    switch (msg.msg_type) {
        case MsgType::REGISTER: handle_register(peer, msg); return;
        case MsgType::KEEPALIVE: {
            auto it = registry_.find(peer.registered_gateway);
            if (it == registry_.end()) {
                send_error(peer, msg.correlation, ErrorCode::NotFound, "UnknownGateway");
                return;
            }
            it->second.last_keepalive = sim_.now();
            return;
        }
        case MsgType::SESSION_REQUEST: handle_session_request(peer, msg); return;
        case MsgType::PROXY_DATA: handle_proxy_data(peer, msg); return;
        case MsgType::REDIRECT_RESPONSE: {
            // Gateway acknowledging a PROXY_OPEN.
            for (auto& ps : proxies_) {
                if (ps.gateway_id == peer.registered_gateway &&
                    ps.gateway_correlation == msg.correlation && !ps.open) {
                    ps.open = true;
                    log("proxy_spliced", {{"gateway", ps.gateway_id}});
                    auto rit = peers_.find(ps.requestor_conn);
                    if (rit != peers_.end()) {
                        rit->second->channel->send(
                            {1, MsgType::REDIRECT_RESPONSE, ps.requestor_correlation,
                             RedirectResponseBody{std::nullopt, ps.token}.encode(), {}});
                    }
                    return;
                }
            }
            return;
        }
        case MsgType::ERROR: {
            ErrorBody err = ErrorBody::decode(msg.body);
            log("peer_error", {{"peer", peer.peer_id().id},
                               {"code", error_code_name(err.code)},
                               {"detail", err.detail}});
            // Gateway refusing a PROXY_OPEN: relay the refusal.
            for (auto& ps : proxies_) {
                if (ps.gateway_id == peer.registered_gateway &&
                    ps.gateway_correlation == msg.correlation && !ps.open) {
                    auto rit = peers_.find(ps.requestor_conn);
                    if (rit != peers_.end())
                        send_error(*rit->second, ps.requestor_correlation,
                                   ErrorCode::GatewayRefused, err.detail);
                    return;
                }
            }
            // Gateway reporting a failed dial-back.
            for (auto it = pending_.begin(); it != pending_.end(); ++it) {
                if (it->second.correlation == msg.correlation) {
                    log("dial_failed", {{"gateway", it->second.gateway_id},
                                        {"requestor", it->second.requestor.id}});
                    sim_.cancel(it->second.timer);
                    pending_.erase(it);
                    return;
                }
            }
            return;
        }
        default:
            send_error(peer, msg.correlation, ErrorCode::Protocol,
                       std::string("Unexpected:") + msg_type_name(msg.msg_type));
    }
}

void Broker::handle_register(Peer& peer, const WireMessage& msg) {
    RegisterBody body = RegisterBody::decode(msg.body);
    if (body.gateway.id != peer.peer_id().id || body.gateway.role != RoleKind::IctGateway) {
        send_error(peer, msg.correlation, ErrorCode::Protocol, "RegisterIdentityMismatch");
        return;
    }
    auto it = registry_.find(body.gateway.id);
    if (it != registry_.end() && it->second.channel != 0 && it->second.channel != peer.conn) {
        log("supersede", {{"gateway", body.gateway.id}});
        ConnId old = it->second.channel;
        auto pit = peers_.find(old);
        if (pit != peers_.end()) pit->second->registered_gateway.clear();
        sim_.close(old);
        peers_.erase(old);
    }
    GatewayRecord rec;
    rec.gateway = body.gateway;
    rec.fingerprint = peer.channel->peer().peer_fingerprint;
    // Redirect hands out the gateway's service endpoint: the host we observe
    // on the permanent channel, at the fleet-wide well-known direct port.
    rec.public_address = {peer.remote.host, cfg_.gateway_direct_port};
    rec.channel = peer.conn;
    rec.registered_at = sim_.now();
    rec.last_keepalive = sim_.now();
    registry_[body.gateway.id] = rec;
    peer.registered_gateway = body.gateway.id;
    log("register", {{"gateway", body.gateway.id}, {"address", peer.remote.to_string()}});
    peer.channel->send(
        {1, MsgType::REGISTER_ACK, msg.correlation, RegisterAckBody{peer.remote}.encode(), {}});
}

const Broker::GatewayRecord* Broker::lookup(const std::string& gateway_id) const {
    auto it = registry_.find(gateway_id);
    return it == registry_.end() ? nullptr : &it->second;
}

GatewayState Broker::gateway_state(const GatewayRecord& rec) const {
    SimTime silence = sim_.now() - rec.last_keepalive;
    if (silence > cfg_.keepalive_offline_ms) return GatewayState::Offline;
    if (silence > cfg_.keepalive_stale_ms) return GatewayState::Stale;
    return GatewayState::Online;
}

size_t Broker::online_count() const {
    size_t n = 0;
    for (const auto& [id, rec] : registry_)
        if (gateway_state(rec) == GatewayState::Online) ++n;
    return n;
}

size_t Broker::live_channel_count(const std::string& gateway_id) const {
    size_t n = 0;
    for (const auto& [id, p] : peers_)
        if (p->registered_gateway == gateway_id && sim_.is_open(id)) ++n;
    return n;
}

Broker::Peer* Broker::gateway_peer(const std::string& gateway_id) {
    auto it = registry_.find(gateway_id);
    if (it == registry_.end() || it->second.channel == 0) return nullptr;
    auto pit = peers_.find(it->second.channel);
    return pit == peers_.end() ? nullptr : pit->second.get();
}

auth::SoftwareToken Broker::make_token(const Peer& requestor, const GatewayRecord& rec, Mode mode,
                                       Permission perm, const Tan& tan) {
    auth::TokenRequest req;
    req.requestor = requestor.peer_id();
    req.requestor_fingerprint = requestor.channel->peer().peer_fingerprint;
    req.gateway = rec.gateway;
    req.gateway_fingerprint = rec.fingerprint;
    req.mode = mode;
    req.permissions = PermissionSet{perm};
    req.tan = tan;
    const Bytes& key =
        cfg_.credential.is_cert() ? cfg_.credential.cert->private_key : cfg_.credential.psk->secret;
    return auth::issue_token(cfg_.identity, key, req, sim_.now(), cfg_.token_ttl_ms);
}

void Broker::handle_session_request(Peer& peer, const WireMessage& msg) {
    SessionRequestBody req = SessionRequestBody::decode(msg.body);
    const Identity& who = peer.peer_id();
    log("session_observed", {{"requestor", who.id},
                             {"role", role_name(who.role)},
                             {"gateway", req.gateway_id},
                             {"mode", mode_name(req.mode)},
                             {"permission", permission_name(req.permission)}});
    auto decision = cfg_.acl.authorize(who, req.gateway_id, req.permission, sim_.now());
    log("authz", {{"requestor", who.id},
                  {"gateway", req.gateway_id},
                  {"mode", mode_name(req.mode)},
                  {"permission", permission_name(req.permission)},
                  {"outcome", decision.allowed ? "Allow" : "Deny"}});
    if (!decision.allowed) {
        send_error(peer, msg.correlation, ErrorCode::NotAuthorized,
                   auth::deny_reason_name(decision.reason));
        return;
    }
    auto rit = registry_.find(req.gateway_id);
    if (rit == registry_.end()) {
        send_error(peer, msg.correlation,
                   req.mode == Mode::Redirect ? ErrorCode::NotFound : ErrorCode::GatewayUnreachable,
                   "UnknownGateway");
        return;
    }
    GatewayRecord& rec = rit->second;

    if (req.mode == Mode::Redirect) {
        // Address handout; reachability is entirely the requestor's problem.
        Tan tan = req.requestor_tan ? *req.requestor_tan : auth::generate_tan(sim_.rng());
        auto token = make_token(peer, rec, Mode::Redirect, req.permission, tan);
        log("redirect_issued", {{"gateway", req.gateway_id},
                                {"address", rec.public_address.to_string()}});
        peer.channel->send(
            {1, MsgType::REDIRECT_RESPONSE, msg.correlation,
             RedirectResponseBody{rec.public_address, token.encode()}.encode(), {}});
        return;
    }

    // Invocation and proxy both signal down the permanent channel.
    Peer* gw = gateway_peer(req.gateway_id);
    if (gw == nullptr || gateway_state(rec) == GatewayState::Offline) {
        send_error(peer, msg.correlation, ErrorCode::GatewayUnreachable,
                   gw == nullptr ? "NoChannel" : "Offline");
        return;
    }

    if (req.mode == Mode::Invocation) {
        Tan tan = req.requestor_tan ? *req.requestor_tan : auth::generate_tan(sim_.rng());
        if (pending_.count(tan)) {
            send_error(peer, msg.correlation, ErrorCode::TanCollision, "TanPending");
            return;
        }
        auto token = make_token(peer, rec, Mode::Invocation, req.permission, tan);
        uint64_t corr = next_correlation_++;
        ConnectRequestBody connect{*req.callback, tan, token.encode(), req.command};
        gw->channel->send({1, MsgType::CONNECT_REQUEST, corr, connect.encode(), {}});
        log("connect_request_sent", {{"gateway", req.gateway_id},
                                     {"requestor", who.id},
                                     {"callback", req.callback->to_string()}});
        PendingInvocation pend;
        pend.tan = tan;
        pend.requestor = who;
        pend.gateway_id = req.gateway_id;
        pend.created_at = sim_.now();
        pend.correlation = corr;
        pend.timer = sim_.schedule(cfg_.pending_timeout_ms, [this, tan] {
            auto it = pending_.find(tan);
            if (it != pending_.end()) {
                log("pending_expired", {{"gateway", it->second.gateway_id}});
                pending_.erase(it);
            }
        });
        pending_[tan] = pend;
        peer.channel->send({1, MsgType::REDIRECT_RESPONSE, msg.correlation,
                            RedirectResponseBody{std::nullopt, token.encode()}.encode(), {}});
        return;
    }

    // Proxy: open the gateway side, reply to the requestor on its ack.
    Tan tan = req.requestor_tan ? *req.requestor_tan : auth::generate_tan(sim_.rng());
    auto token = make_token(peer, rec, Mode::Proxy, req.permission, tan);
    ProxySession ps;
    ps.requestor_conn = peer.conn;
    ps.requestor_correlation = msg.correlation;
    ps.gateway_id = req.gateway_id;
    ps.gateway_correlation = next_correlation_++;
    ps.token = token.encode();
    proxies_.push_back(ps);
    gw->channel->send({1, MsgType::PROXY_OPEN, ps.gateway_correlation,
                       ProxyOpenBody{token.encode()}.encode(), {}});
    log("proxy_open_sent", {{"gateway", req.gateway_id}, {"requestor", who.id}});
}

void Broker::handle_proxy_data(Peer& peer, const WireMessage& msg) {
    for (auto& ps : proxies_) {
        if (!ps.open) continue;
        const bool from_requestor =
            peer.conn == ps.requestor_conn && msg.correlation == ps.requestor_correlation;
        const bool from_gateway = peer.registered_gateway == ps.gateway_id &&
                                  msg.correlation == ps.gateway_correlation;
        if (!from_requestor && !from_gateway) continue;
        Bytes inner = ProxyDataBody::decode(msg.body).inner;
        if (auto tamper = sim_.take_relay_tamper(); tamper && !inner.empty()) {
            inner[tamper->first % inner.size()] ^= tamper->second;
            log("relay_tamper", {{"gateway", ps.gateway_id},
                                 {"byte", std::to_string(tamper->first % inner.size())}});
        }
        ++proxy_counters_.frames_relayed;
        if (from_requestor) {
            proxy_counters_.requestor_to_gateway_bytes += inner.size();
            if (Peer* gw = gateway_peer(ps.gateway_id))
                gw->channel->send({1, MsgType::PROXY_DATA, ps.gateway_correlation,
                                   ProxyDataBody{std::move(inner)}.encode(), {}});
        } else {
            proxy_counters_.gateway_to_requestor_bytes += inner.size();
            auto rit = peers_.find(ps.requestor_conn);
            if (rit != peers_.end())
                rit->second->channel->send({1, MsgType::PROXY_DATA, ps.requestor_correlation,
                                            ProxyDataBody{std::move(inner)}.encode(), {}});
        }
        return;
    }
    log("proxy_data_orphan", {{"peer", peer.peer_id().id}});
}

FlowExportBody Broker::export_allowed_flows() const {
    std::set<FlowTuple> out;
    const SimTime now = sim_.now();
    for (const auto& entry : cfg_.acl.entries()) {
        if (!entry.live_at(now)) continue;
        std::vector<RoleKind> roles;
        if (entry.principal.role) {
            roles.push_back(*entry.principal.role);
        } else if (entry.principal.id) {
            auto it = known_roles_.find(*entry.principal.id);
            if (it == known_roles_.end()) continue;  // role never learned
            roles.push_back(it->second);
        } else {
            for (int r = 0; r < kRoleKindCount; ++r) roles.push_back(static_cast<RoleKind>(r));
        }
        std::vector<std::string> gateways;
        if (entry.gateway_id) {
            gateways.push_back(*entry.gateway_id);
        } else {
            for (const auto& [id, rec] : registry_) gateways.push_back(id);
        }
        for (RoleKind role : roles)
            for (const auto& gw : gateways)
                for (int p = 0; p < kPermissionCount; ++p) {
                    auto perm = static_cast<Permission>(p);
                    if (!entry.permissions.contains(perm)) continue;
                    for (int m = 0; m < 3; ++m)
                        out.insert({role, gw, static_cast<Mode>(m), perm});
                }
    }
    FlowExportBody body;
    body.tuples.assign(out.begin(), out.end());
    return body;
}

void Broker::send_error(Peer& peer, uint64_t correlation, ErrorCode code,
                        const std::string& detail) {
    log("error_sent", {{"to", peer.remote.to_string()},
                       {"code", error_code_name(code)},
                       {"detail", detail}});
    peer.channel->send({1, MsgType::ERROR, correlation, ErrorBody{code, detail}.encode(), {}});
}

void Broker::log(const std::string& event, netsim::LogFields fields) {
    fields.insert(fields.begin(), {"actor", "broker"});
    sim_.log().append(sim_.now(), event, std::move(fields));
}

}  // namespace asia
