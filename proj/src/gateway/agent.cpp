#include "asia/gateway/agent.hpp"

#include <algorithm>

namespace asia {

using netsim::ConnId;

const char* policy_mode_name(PolicyMode m) {
    switch (m) {
        case PolicyMode::Centralized: return "centralized";
        case PolicyMode::LocalOnly: return "local";
        case PolicyMode::Conjunction: return "conjunction";
    }
    return "?";
}

std::optional<PolicyMode> policy_mode_from_name(const std::string& s) {
    if (s == "centralized") return PolicyMode::Centralized;
    if (s == "local") return PolicyMode::LocalOnly;
    if (s == "conjunction") return PolicyMode::Conjunction;
    return std::nullopt;
}

ApplianceStatus Appliance::status() const {
    return {appliance_id, klass, running, load_kw, generating};
}

GatewayAgent::GatewayAgent(netsim::SimNet& sim, std::string node, Config cfg)
    : sim_(sim), node_(std::move(node)), cfg_(std::move(cfg)) {
    baseline_ = config_digest();
}

void GatewayAgent::start() {
    sim_.set_fault_hook(node_, [this](netsim::FaultKind k) { on_fault(k); });
    sim_.listen(node_, cfg_.direct_port,
                [this](ConnId id, const NetAddress& peer) -> std::optional<netsim::ConnHandlers> {
                    if (!self_integrity_check()) {
                        log("integrity_refusal", {{"path", "direct"}});
                        return std::nullopt;
                    }
                    accept_direct(id, peer);
                    Session* s = sessions_.rbegin()->second.get();
                    netsim::ConnHandlers h;
                    h.on_frame = [this, s](const Bytes& f) { s->channel->on_lower_frame(f, sim_.now()); };
                    uint64_t sid = s->id;
                    h.on_close = [this, sid](netsim::CloseReason) { drop_session(sid); };
                    return h;
                });
    dial_broker();
}

void GatewayAgent::dial_broker() {
    if (auth_blocked_ || broker_conn_ != 0) return;
    netsim::ConnHandlers h;
    h.on_open = [this] {
        permanent_ = std::make_unique<proto::SecureChannel>(auth::Handshake::Role::Initiator,
                                                            active_credential(), &cfg_.trust,
                                                            sim_.rng(), &seen_nonces_);
        permanent_->on_ready = [this] { on_permanent_ready(); };
        permanent_->on_fail = [this](const std::string& reason) {
            log("broker_auth_fail", {{"reason", reason}});
            if (reason == "UnknownIssuer" || reason == "BadSignature" || reason == "UnknownPsk")
                auth_blocked_ = true;  // pointless to retry until the credential changes
            sim_.close(broker_conn_);
        };
        permanent_->on_message = [this](const WireMessage& m) { on_permanent_message(m); };
        ConnId id = broker_conn_;
        permanent_->attach([this, id](Bytes f) { sim_.send(id, std::move(f)); }, sim_.now());
    };
    h.on_frame = [this](const Bytes& f) {
        if (permanent_) permanent_->on_lower_frame(f, sim_.now());
    };
    h.on_close = [this](netsim::CloseReason r) {
        log("broker_channel_closed", {{"reason", netsim::close_reason_name(r)}});
        on_permanent_close();
    };
    broker_conn_ = sim_.connect(node_, cfg_.broker, h, cfg_.connect_timeout_ms);
    log("dial_broker", {{"to", cfg_.broker.to_string()}});
}

void GatewayAgent::on_permanent_ready() {
    permanent_->send({1, MsgType::REGISTER, next_correlation_++,
                      RegisterBody{cfg_.identity}.encode(), {}});
}

void GatewayAgent::on_permanent_close() {
    registered_ = false;
    permanent_.reset();
    broker_conn_ = 0;
    if (keepalive_timer_) {
        sim_.cancel(keepalive_timer_);
        keepalive_timer_ = 0;
    }
    // Proxy sessions ride the permanent channel; they die with it.
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (it->second->proxy_correlation != 0)
            it = sessions_.erase(it);
        else
            ++it;
    }
    if (auth_blocked_) return;
    backoff_ms_ = backoff_ms_ == 0 ? cfg_.backoff_base_ms
                                   : std::min(backoff_ms_ * 2, cfg_.backoff_cap_ms);
    SimTime jitter = sim_.rng()() % (backoff_ms_ / 2 + 1);
    log("reconnect_scheduled", {{"delay_ms", std::to_string(backoff_ms_ + jitter)}});
    sim_.schedule(backoff_ms_ + jitter, [this] { dial_broker(); });
}

void GatewayAgent::send_keepalive() {
    if (permanent_ && permanent_->ready()) permanent_->send({1, MsgType::KEEPALIVE, 0, {}, {}});
    keepalive_timer_ = sim_.schedule(cfg_.keepalive_ms, [this] { send_keepalive(); });
}

void GatewayAgent::on_permanent_message(const WireMessage& msg) {
    switch (msg.msg_type) {
        case MsgType::REGISTER_ACK: {
            auto ack = RegisterAckBody::decode(msg.body);
            registered_ = true;
            backoff_ms_ = 0;
            log("registered", {{"observed", ack.observed.to_string()}});
            if (cfg_.keepalives_enabled && keepalive_timer_ == 0)
                keepalive_timer_ = sim_.schedule(cfg_.keepalive_ms, [this] { send_keepalive(); });
            return;
        }
        case MsgType::CONNECT_REQUEST: handle_connect_request(msg); return;
        case MsgType::PROXY_OPEN: handle_proxy_open(msg); return;
        case MsgType::PROXY_DATA: {
            Bytes inner = ProxyDataBody::decode(msg.body).inner;
            for (auto& [id, s] : sessions_) {
                if (s->proxy_correlation == msg.correlation) {
                    s->channel->on_lower_frame(inner, sim_.now());
                    return;
                }
            }
            return;
        }
        case MsgType::ERROR: {
            auto err = ErrorBody::decode(msg.body);
            log("broker_error", {{"code", error_code_name(err.code)}, {"detail", err.detail}});
            return;
        }
        default:
            log("unexpected_message", {{"type", msg_type_name(msg.msg_type)}});
    }
}

void GatewayAgent::handle_connect_request(const WireMessage& msg) {
    ConnectRequestBody req = ConnectRequestBody::decode(msg.body);
    auth::SoftwareToken token;
    try {
        token = auth::SoftwareToken::decode(req.token);
    } catch (const codec::CodecError&) {
        log("bad_token", {{"reason", "Undecodable"}});
        return;
    }
    auto status = auth::verify_token(token, cfg_.trust, cfg_.identity.id, sim_.now());
    if (status != auth::TokenStatus::Valid) {
        log("bad_token", {{"reason", auth::token_status_name(status)}});
        return;
    }
    if (!self_integrity_check()) {
        log("integrity_refusal", {{"path", "invocation"}});
        permanent_->send({1, MsgType::ERROR, msg.correlation,
                          ErrorBody{ErrorCode::IntegrityFailure, "SelfCheckFailed"}.encode(), {}});
        return;
    }
    bool corrupt = fault_corrupt_tan_;
    bool subst = fault_substitute_cred_;
    fault_corrupt_tan_ = false;
    fault_substitute_cred_ = false;
    if (fault_replay_tan_) last_dialback_ = {req, token};
    start_dialback(req, token, msg.correlation, corrupt, subst);
}

void GatewayAgent::start_dialback(const ConnectRequestBody& req, const auth::SoftwareToken& token,
                                  uint64_t broker_correlation, bool corrupt_tan,
                                  bool substitute_cred) {
    uint64_t sid = next_session_++;
    auto session = std::make_unique<Session>();
    session->id = sid;
    session->token = token;
    session->embedded = req.command;
    session->broker_correlation = broker_correlation;
    Session* s = session.get();

    Tan present = req.tan;
    if (corrupt_tan) present.value[0] ^= 0xff;

    Credential cred = active_credential();
    if (substitute_cred) {
        auto it = cfg_.credentials.find("substitute");
        if (it != cfg_.credentials.end()) cred = it->second;
    }

    netsim::ConnHandlers h;
    h.on_open = [this, s, present, cred, tok = req.token] {
        s->channel = std::make_unique<proto::SecureChannel>(auth::Handshake::Role::Initiator,
                                                            cred, &cfg_.trust, sim_.rng());
        s->channel->on_ready = [this, s, present, tok] {
            session_send(*s, {1, MsgType::DIAL_BACK, next_correlation_++,
                              DialBackBody{present, tok}.encode(), {}});
        };
        s->channel->on_fail = [this, s](const std::string& reason) {
            log("dialback_auth_fail", {{"reason", reason}});
            drop_session(s->id);
        };
        s->channel->on_message = [this, s](const WireMessage& m) { on_session_message(*s, m); };
        ConnId id = s->conn;
        s->channel->attach([this, id](Bytes f) { sim_.send(id, std::move(f)); }, sim_.now());
    };
    h.on_frame = [this, s](const Bytes& f) {
        if (s->channel) s->channel->on_lower_frame(f, sim_.now());
    };
    h.on_close = [this, sid](netsim::CloseReason reason) {
        auto it = sessions_.find(sid);
        if (it == sessions_.end()) return;
        if (!it->second->token_checked) {
            log("dial_failed", {{"reason", netsim::close_reason_name(reason)}});
            if (permanent_ && permanent_->ready())
                permanent_->send(
                    {1, MsgType::ERROR, it->second->broker_correlation,
                     ErrorBody{ErrorCode::DialFailed, netsim::close_reason_name(reason)}.encode(),
                     {}});
        }
        drop_session(sid);
    };
    session->conn = sim_.connect(node_, req.callback, h, cfg_.connect_timeout_ms);
    log("dialback_started", {{"to", req.callback.to_string()}});
    sessions_[sid] = std::move(session);
}

void GatewayAgent::handle_proxy_open(const WireMessage& msg) {
    ProxyOpenBody body = ProxyOpenBody::decode(msg.body);
    auth::SoftwareToken token;
    auth::TokenStatus status = auth::TokenStatus::BadSignature;
    try {
        token = auth::SoftwareToken::decode(body.token);
        status = auth::verify_token(token, cfg_.trust, cfg_.identity.id, sim_.now());
    } catch (const codec::CodecError&) {
    }
    if (status != auth::TokenStatus::Valid) {
        log("bad_token", {{"reason", auth::token_status_name(status)}});
        permanent_->send({1, MsgType::ERROR, msg.correlation,
                          ErrorBody{ErrorCode::BadToken, auth::token_status_name(status)}.encode(),
                          {}});
        return;
    }
    if (!self_integrity_check()) {
        log("integrity_refusal", {{"path", "proxy"}});
        permanent_->send({1, MsgType::ERROR, msg.correlation,
                          ErrorBody{ErrorCode::IntegrityFailure, "SelfCheckFailed"}.encode(), {}});
        return;
    }
    uint64_t sid = next_session_++;
    auto session = std::make_unique<Session>();
    session->id = sid;
    session->proxy_correlation = msg.correlation;
    session->token = token;
    Session* s = session.get();
    s->channel = std::make_unique<proto::SecureChannel>(auth::Handshake::Role::Responder,
                                                        active_credential(), &cfg_.trust,
                                                        sim_.rng(), &seen_nonces_);
    s->channel->on_fail = [this, s](const std::string& reason) {
        log("proxy_auth_fail", {{"reason", reason}});
        drop_session(s->id);
    };
    s->channel->on_message = [this, s](const WireMessage& m) { on_session_message(*s, m); };
    uint64_t corr = msg.correlation;
    s->channel->attach(
        [this, corr](Bytes f) {
            if (permanent_ && permanent_->ready())
                permanent_->send(
                    {1, MsgType::PROXY_DATA, corr, ProxyDataBody{std::move(f)}.encode(), {}});
        },
        sim_.now());
    sessions_[sid] = std::move(session);
    permanent_->send({1, MsgType::REDIRECT_RESPONSE, msg.correlation,
                      RedirectResponseBody{std::nullopt, {}}.encode(), {}});
    log("proxy_accepted", {});
}

void GatewayAgent::accept_direct(ConnId id, const NetAddress& peer) {
    uint64_t sid = next_session_++;
    auto session = std::make_unique<Session>();
    session->id = sid;
    session->conn = id;
    Session* s = session.get();
    s->channel = std::make_unique<proto::SecureChannel>(auth::Handshake::Role::Responder,
                                                        active_credential(), &cfg_.trust,
                                                        sim_.rng(), &seen_nonces_);
    s->channel->on_fail = [this, s](const std::string& reason) {
        log("direct_auth_fail", {{"reason", reason}});
        sim_.close(s->conn);
        drop_session(s->id);
    };
    s->channel->on_message = [this, s](const WireMessage& m) { on_session_message(*s, m); };
    s->channel->attach([this, id](Bytes f) { sim_.send(id, std::move(f)); }, sim_.now());
    log("direct_accepted", {{"from", peer.to_string()}});
    sessions_[sid] = std::move(session);
}

void GatewayAgent::on_session_message(Session& s, const WireMessage& msg) {
    switch (msg.msg_type) {
        case MsgType::REDIRECT_RESPONSE: {
            // Requestor acknowledged our dial-back.
            if (s.token_checked) return;
            s.token_checked = true;
            ++sessions_accepted_;
            log("session_open", {{"peer", s.channel->peer().peer.id},
                                 {"mode", mode_name(s.token.mode)}});
            if (fault_replay_tan_ && last_dialback_) {
                fault_replay_tan_ = false;
                auto [req, token] = *last_dialback_;
                last_dialback_.reset();
                log("tan_replay_dial", {});
                start_dialback(req, token, 0, false, false);
            }
            if (s.embedded) {
                const Command cmd = *s.embedded;
                s.embedded.reset();
                Permission need = cmd.required_permission();
                const Identity& peer = s.channel->peer().peer;
                if (!authorize_local(peer, s.token.permissions, need)) {
                    log("local_deny", {{"peer", peer.id}, {"permission", permission_name(need)}});
                    session_send(s, {1, MsgType::ERROR, msg.correlation,
                                     ErrorBody{ErrorCode::NotAuthorized, "NotAuthorizedLocally"}
                                         .encode(),
                                     {}});
                    return;
                }
                bool ids = peer.role == RoleKind::EndUser || cmd.kind == CommandKind::StatusQuery;
                CommandResult result = execute_command(cmd, ids);
                session_send(s, auth::sign_app_message(s.channel->channel_key(), msg.correlation,
                                                       ++s.send_seq,
                                                       encode_command_response(result)));
            }
            return;
        }
        case MsgType::DIAL_BACK: {
            // Redirect / proxy opener: the requestor presents its token.
            DialBackBody body = DialBackBody::decode(msg.body);
            auth::SoftwareToken token;
            auth::TokenStatus status = auth::TokenStatus::BadSignature;
            try {
                token = auth::SoftwareToken::decode(body.token);
                status = auth::verify_token(token, cfg_.trust, cfg_.identity.id, sim_.now());
            } catch (const codec::CodecError&) {
            }
            std::string reason;
            if (status != auth::TokenStatus::Valid)
                reason = auth::token_status_name(status);
            else if (token.requestor_fingerprint != s.channel->peer().peer_fingerprint)
                reason = "FingerprintMismatch";
            else if (!(body.tan == token.tan))
                reason = "TanMismatch";
            else if (s.proxy_correlation != 0 && !(token.tan == s.token.tan))
                reason = "TanMismatch";  // must match the PROXY_OPEN grant
            if (!reason.empty()) {
                log("opener_rejected", {{"reason", reason}});
                session_send(s, {1, MsgType::ERROR, msg.correlation,
                                 ErrorBody{ErrorCode::BadToken, reason}.encode(), {}});
                if (s.conn != 0) sim_.close(s.conn);
                drop_session(s.id);
                return;
            }
            s.token = token;
            s.token_checked = true;
            ++sessions_accepted_;
            log("session_open", {{"peer", s.channel->peer().peer.id},
                                 {"mode", mode_name(token.mode)}});
            session_send(s, {1, MsgType::REDIRECT_RESPONSE, msg.correlation,
                             RedirectResponseBody{std::nullopt, {}}.encode(), {}});
            return;
        }
        case MsgType::APP_DATA: handle_app_data(s, msg); return;
        case MsgType::ERROR: {
            auto err = ErrorBody::decode(msg.body);
            log("session_error", {{"code", error_code_name(err.code)}, {"detail", err.detail}});
            if (s.conn != 0) sim_.close(s.conn);
            drop_session(s.id);
            return;
        }
        default:
            log("unexpected_message", {{"type", msg_type_name(msg.msg_type)}});
    }
}

void GatewayAgent::handle_app_data(Session& s, const WireMessage& msg) {
    if (!s.token_checked) return;
    Bytes payload;
    uint64_t seq = 0;
    auto verdict = auth::verify_app_message(s.channel->channel_key(), msg, s.recv_seq, payload, seq);
    if (verdict != auth::AppVerify::Ok) {
        log("app_verify_fail", {{"result", auth::app_verify_name(verdict)}});
        session_send(s, {1, MsgType::ERROR, msg.correlation,
                         ErrorBody{ErrorCode::IntegrityFailure, auth::app_verify_name(verdict)}
                             .encode(),
                         {}});
        return;
    }
    std::optional<Command> cmd;
    std::optional<CommandResult> prior;
    try {
        decode_app_payload(payload, cmd, prior);
    } catch (const codec::CodecError&) {
        log("app_verify_fail", {{"result", "Undecodable"}});
        return;
    }
    if (!cmd) return;  // results are requestor-bound; nothing to do
    Permission need = cmd->required_permission();
    const Identity& peer = s.channel->peer().peer;
    if (!authorize_local(peer, s.token.permissions, need)) {
        log("local_deny", {{"peer", peer.id}, {"permission", permission_name(need)}});
        session_send(s, {1, MsgType::ERROR, msg.correlation,
                         ErrorBody{ErrorCode::NotAuthorized, "NotAuthorizedLocally"}.encode(), {}});
        return;
    }
    bool ids = peer.role == RoleKind::EndUser || cmd->kind == CommandKind::StatusQuery;
    CommandResult result = execute_command(*cmd, ids);
    session_send(s, auth::sign_app_message(s.channel->channel_key(), msg.correlation, ++s.send_seq,
                                           encode_command_response(result)));
}

void GatewayAgent::session_send(Session& s, WireMessage msg) { s.channel->send(std::move(msg)); }

void GatewayAgent::drop_session(uint64_t session_id) {
    sim_.schedule(0, [this, session_id] { sessions_.erase(session_id); });
}

bool GatewayAgent::authorize_local(const Identity& peer, const PermissionSet& token_perms,
                                   Permission perm) const {
    const bool token_ok = token_perms.contains(perm);
    const bool local_ok =
        cfg_.local_acl.authorize(peer, cfg_.identity.id, perm, sim_.now()).allowed;
    switch (cfg_.policy) {
        case PolicyMode::Centralized: return token_ok;
        case PolicyMode::LocalOnly: return local_ok;
        case PolicyMode::Conjunction: return token_ok && local_ok;
    }
    return false;
}

CommandResult GatewayAgent::execute_command(const Command& cmd, bool include_appliance_ids) {
    cmd.validate();
    ++commands_executed_;
    CommandResult result;
    result.kind = cmd.kind;
    switch (cmd.kind) {
        case CommandKind::ShutoffAppliance: {
            const auto& req = *cmd.shutoff;
            Money achieved{};
            std::vector<std::string> affected;
            for (auto& a : cfg_.appliances) {
                if (achieved >= req.requested_reduction_kwh) break;
                if (a.klass != req.target || !a.running) continue;
                a.running = false;
                achieved.ten_thousandths += a.load_kw.ten_thousandths;
                affected.push_back(a.appliance_id);
            }
            result.status = achieved >= req.requested_reduction_kwh ? CommandStatus::Ok
                                                                    : CommandStatus::Partial;
            result.achieved_reduction_kwh = achieved;
            result.detail = "stopped=" + std::to_string(affected.size());
            if (include_appliance_ids) result.affected = std::move(affected);
            break;
        }
        case CommandKind::ShutoffGenerator: {
            Money achieved{};
            std::vector<std::string> affected;
            for (auto& a : cfg_.appliances) {
                if (a.klass != ApplianceClass::SolarGenerator || !a.generating) continue;
                a.generating = false;
                achieved.ten_thousandths += a.load_kw.ten_thousandths;
                affected.push_back(a.appliance_id);
            }
            result.status = CommandStatus::Ok;
            result.achieved_reduction_kwh = achieved;
            result.detail = "stopped=" + std::to_string(affected.size());
            if (include_appliance_ids) result.affected = std::move(affected);
            break;
        }
        case CommandKind::PriceSignal: {
            const auto& sig = *cmd.price;
            current_price_ = sig.price_eur_per_kwh;
            std::vector<std::string> affected;
            for (auto& a : cfg_.appliances) {
                if (!a.running || !a.price_threshold) continue;
                if (sig.price_eur_per_kwh > *a.price_threshold) {
                    a.running = false;
                    affected.push_back(a.appliance_id);
                }
            }
            result.status = CommandStatus::Ok;
            result.detail = "price=" + sig.price_eur_per_kwh.to_string() +
                            " paused=" + std::to_string(affected.size());
            if (include_appliance_ids) result.affected = std::move(affected);
            break;
        }
        case CommandKind::StatusQuery: {
            for (const auto& a : cfg_.appliances) result.snapshot.push_back(a.status());
            result.status = CommandStatus::Ok;
            break;
        }
        case CommandKind::ConfigChange: {
            cfg_.config_kv[cmd.config->key] = cmd.config->value;
            baseline_ = config_digest();  // authorized change moves the baseline
            result.status = CommandStatus::Ok;
            result.detail = "key=" + cmd.config->key;
            break;
        }
        case CommandKind::InstallApp: {
            installed_apps_.push_back(cmd.install->manifest);
            result.status = CommandStatus::Ok;
            result.detail = "apps=" + std::to_string(installed_apps_.size());
            break;
        }
    }
    log("command_executed", {{"kind", command_kind_name(cmd.kind)},
                             {"status", command_status_name(result.status)}});
    return result;
}

void GatewayAgent::replace_credential(const std::string& slot, Credential cred) {
    cfg_.credentials[slot] = std::move(cred);
    log("credential_replaced", {{"slot", slot}});
    if (slot == "default" && auth_blocked_) {
        auth_blocked_ = false;
        dial_broker();
    }
}

void GatewayAgent::force_reconnect() {
    if (broker_conn_ == 0) return;
    log("force_reconnect", {});
    sim_.close(broker_conn_);
    on_permanent_close();
}

Digest GatewayAgent::config_digest() const {
    codec::Writer w;
    w.u32(static_cast<uint32_t>(cfg_.config_kv.size()));
    for (const auto& [k, v] : cfg_.config_kv) {
        w.str(k);
        w.str(v);
    }
    return crypto::sha256(w.take());
}

bool GatewayAgent::self_integrity_check() const { return config_digest() == baseline_; }

void GatewayAgent::mutate_config_out_of_band() {
    cfg_.config_kv["tampered"] += "x";
    log("config_mutated", {});
    if (!self_integrity_check() && permanent_ && permanent_->ready())
        permanent_->send({1, MsgType::ERROR, 0,
                          ErrorBody{ErrorCode::IntegrityFailure, "SelfCheckFailed"}.encode(), {}});
}

void GatewayAgent::on_fault(netsim::FaultKind kind) {
    log("fault_applied", {{"kind", netsim::fault_kind_name(kind)}});
    switch (kind) {
        case netsim::FaultKind::ConfigMutate: mutate_config_out_of_band(); break;
        case netsim::FaultKind::TanCorrupt: fault_corrupt_tan_ = true; break;
        case netsim::FaultKind::TanReplay: fault_replay_tan_ = true; break;
        case netsim::FaultKind::CredSubstitute: fault_substitute_cred_ = true; break;
        case netsim::FaultKind::AddressRebind: force_reconnect(); break;
        default: break;
    }
}

void GatewayAgent::log(const std::string& event, netsim::LogFields fields) {
    fields.insert(fields.begin(), {"actor", cfg_.identity.id});
    sim_.log().append(sim_.now(), event, std::move(fields));
}

}  // namespace asia
