#include "asia/client/requestor.hpp"

namespace asia {

using netsim::ConnId;

RequestorClient::RequestorClient(netsim::SimNet& sim, std::string node, Config cfg)
    : sim_(sim), node_(std::move(node)), cfg_(std::move(cfg)) {}

void RequestorClient::start() {
    sim_.listen(node_, cfg_.callback_port,
                [this](ConnId id, const NetAddress& peer) -> std::optional<netsim::ConnHandlers> {
                    accept_dialback(id, peer);
                    Session* s = sessions_.rbegin()->second.get();
                    netsim::ConnHandlers h;
                    h.on_frame = [this, s](const Bytes& f) {
                        s->channel->on_lower_frame(f, sim_.now());
                    };
                    SessionId sid = s->id;
                    h.on_close = [this, sid](netsim::CloseReason) { drop_session(sid); };
                    return h;
                });
}

void RequestorClient::ensure_broker(std::function<void(bool)> then) {
    if (broker_ && broker_->ready()) {
        then(true);
        return;
    }
    broker_waiters_.push_back(std::move(then));
    if (broker_conn_ != 0) return;  // already dialing
    netsim::ConnHandlers h;
    h.on_open = [this] {
        broker_ = std::make_unique<proto::SecureChannel>(auth::Handshake::Role::Initiator,
                                                         cfg_.credential, &cfg_.trust, sim_.rng(),
                                                         &seen_nonces_);
        broker_->on_ready = [this] {
            auto waiters = std::move(broker_waiters_);
            broker_waiters_.clear();
            for (auto& w : waiters) w(true);
        };
        broker_->on_fail = [this](const std::string& reason) {
            log("broker_auth_fail", {{"reason", reason}});
            sim_.close(broker_conn_);
        };
        broker_->on_message = [this](const WireMessage& m) { on_broker_message(m); };
        ConnId id = broker_conn_;
        broker_->attach([this, id](Bytes f) { sim_.send(id, std::move(f)); }, sim_.now());
    };
    h.on_frame = [this](const Bytes& f) {
        if (broker_) broker_->on_lower_frame(f, sim_.now());
    };
    h.on_close = [this](netsim::CloseReason r) {
        log("broker_channel_closed", {{"reason", netsim::close_reason_name(r)}});
        broker_.reset();
        broker_conn_ = 0;
        auto waiters = std::move(broker_waiters_);
        broker_waiters_.clear();
        for (auto& w : waiters) w(false);
        auto requests = std::move(requests_);
        requests_.clear();
        for (auto& [corr, req] : requests) {
            if (req.redirect_done)
                req.redirect_done({false, {}, {}, {}, netsim::close_reason_name(r)});
            else
                finish(req.done, {false, 0, netsim::close_reason_name(r)});
        }
    };
    broker_conn_ = sim_.connect(node_, cfg_.broker, h, cfg_.connect_timeout_ms);
}

void RequestorClient::request_session(const std::string& gateway_id, Mode mode,
                                      Permission permission, std::optional<Command> command,
                                      SessionFn done) {
    ensure_broker([this, gateway_id, mode, permission, command = std::move(command),
                   done = std::move(done)](bool ok) mutable {
        if (!ok) {
            finish(done, {false, 0, "BrokerUnreachable"});
            return;
        }
        uint64_t corr = next_correlation_++;
        PendingRequest req;
        req.mode = mode;
        req.gateway_id = gateway_id;
        req.permission = permission;
        req.command = command;
        req.done = std::move(done);
        SessionRequestBody body;
        body.mode = mode;
        body.gateway_id = gateway_id;
        body.permission = permission;
        if (mode == Mode::Invocation) {
            body.callback = sim_.public_address(node_, cfg_.callback_port);
            body.command = command;
        }
        requests_[corr] = std::move(req);
        log("session_request_sent", {{"gateway", gateway_id},
                                     {"mode", mode_name(mode)},
                                     {"permission", permission_name(permission)}});
        broker_->send({1, MsgType::SESSION_REQUEST, corr, body.encode(), {}});
    });
}

void RequestorClient::on_broker_message(const WireMessage& msg) {
    if (msg.msg_type == MsgType::PROXY_DATA) {
        Bytes inner = ProxyDataBody::decode(msg.body).inner;
        for (auto& [id, s] : sessions_) {
            if (s->proxy_correlation == msg.correlation) {
                s->channel->on_lower_frame(inner, sim_.now());
                return;
            }
        }
        return;
    }
    auto it = requests_.find(msg.correlation);
    if (it == requests_.end()) return;
    PendingRequest req = std::move(it->second);
    requests_.erase(it);
    handle_broker_reply(std::move(req), msg);
}

void RequestorClient::handle_broker_reply(PendingRequest req, const WireMessage& msg) {
    if (msg.msg_type == MsgType::ERROR) {
        auto err = ErrorBody::decode(msg.body);
        log("request_refused", {{"gateway", req.gateway_id},
                                {"mode", mode_name(req.mode)},
                                {"code", error_code_name(err.code)},
                                {"detail", err.detail}});
        if (req.redirect_done) {
            req.redirect_done({false, {}, {}, {}, error_code_name(err.code)});
            return;
        }
        finish(req.done, {false, 0, error_code_name(err.code)});
        return;
    }
    if (msg.msg_type != MsgType::REDIRECT_RESPONSE) return;
    auto body = RedirectResponseBody::decode(msg.body);
    auth::SoftwareToken token;
    try {
        token = auth::SoftwareToken::decode(body.token);
    } catch (const codec::CodecError&) {
        if (req.redirect_done)
            req.redirect_done({false, {}, {}, {}, "BadToken"});
        else
            finish(req.done, {false, 0, "BadToken"});
        return;
    }
    if (req.redirect_done) {
        if (!body.address) {
            req.redirect_done({false, {}, {}, {}, "Protocol"});
            return;
        }
        log("redirect_grant", {{"gateway", req.gateway_id}, {"address", body.address->to_string()}});
        req.redirect_done({true, *body.address, token, body.token, ""});
        return;
    }
    switch (req.mode) {
        case Mode::Invocation: {
            Tan tan = token.tan;
            PendingDial pend;
            pend.token = token;
            pend.had_command = req.command.has_value();
            pend.done = std::move(req.done);
            pend.timer = sim_.schedule(cfg_.dialback_timeout_ms, [this, tan] {
                auto it = pending_tans_.find(tan);
                if (it == pending_tans_.end()) return;
                PendingDial dead = std::move(it->second);
                pending_tans_.erase(it);
                log("dialback_timeout", {{"tan", tan.hex()}});
                finish(dead.done, {false, 0, "Timeout"});
            });
            log("invocation_pending", {{"gateway", req.gateway_id}, {"tan", tan.hex()}});
            pending_tans_[tan] = std::move(pend);
            return;
        }
        case Mode::Redirect: {
            if (!body.address) {
                finish(req.done, {false, 0, "Protocol"});
                return;
            }
            start_direct_connect(std::move(req), *body.address, token, body.token);
            return;
        }
        case Mode::Proxy:
            start_proxy_session(std::move(req), msg.correlation, token, body.token);
            return;
    }
}

void RequestorClient::request_redirect(const std::string& gateway_id, Permission permission,
                                       RedirectFn done) {
    ensure_broker([this, gateway_id, permission, done = std::move(done)](bool ok) mutable {
        if (!ok) {
            done({false, {}, {}, {}, "BrokerUnreachable"});
            return;
        }
        uint64_t corr = next_correlation_++;
        PendingRequest req;
        req.mode = Mode::Redirect;
        req.gateway_id = gateway_id;
        req.permission = permission;
        req.redirect_done = std::move(done);
        SessionRequestBody body;
        body.mode = Mode::Redirect;
        body.gateway_id = gateway_id;
        body.permission = permission;
        requests_[corr] = std::move(req);
        log("session_request_sent", {{"gateway", gateway_id},
                                     {"mode", "Redirect"},
                                     {"permission", permission_name(permission)}});
        broker_->send({1, MsgType::SESSION_REQUEST, corr, body.encode(), {}});
    });
}

void RequestorClient::direct_connect(const NetAddress& address, const auth::SoftwareToken& token,
                                     const Bytes& token_bytes, std::optional<Command> command,
                                     SessionFn done) {
    PendingRequest req;
    req.mode = Mode::Redirect;
    req.gateway_id = token.gateway.id;
    req.command = std::move(command);
    req.done = std::move(done);
    start_direct_connect(std::move(req), address, token, token_bytes);
}

void RequestorClient::start_direct_connect(PendingRequest req, const NetAddress& address,
                                           const auth::SoftwareToken& token,
                                           const Bytes& token_bytes) {
    SessionId sid = next_session_++;
    auto session = std::make_unique<Session>();
    session->id = sid;
    session->mode = Mode::Redirect;
    Session* s = session.get();
    auto done = std::make_shared<SessionFn>(std::move(req.done));
    auto command = req.command;

    netsim::ConnHandlers h;
    h.on_open = [this, s, token_bytes, tan = token.tan, done, command] {
        s->channel = std::make_unique<proto::SecureChannel>(auth::Handshake::Role::Initiator,
                                                            cfg_.credential, &cfg_.trust,
                                                            sim_.rng());
        s->channel->on_ready = [this, s, token_bytes, tan, done, command] {
            establish_waiters_[s->id] = {done, command};
            s->channel->send({1, MsgType::DIAL_BACK, next_correlation_++,
                              DialBackBody{tan, token_bytes}.encode(), {}});
        };
        s->channel->on_fail = [this, s, done](const std::string& reason) {
            log("direct_auth_fail", {{"reason", reason}});
            finish(*done, {false, 0, reason});
            sim_.close(s->conn);
            drop_session(s->id);
        };
        s->channel->on_message = [this, s](const WireMessage& m) { on_session_message(*s, m); };
        ConnId id = s->conn;
        s->channel->attach([this, id](Bytes f) { sim_.send(id, std::move(f)); }, sim_.now());
    };
    h.on_frame = [this, s](const Bytes& f) {
        if (s->channel) s->channel->on_lower_frame(f, sim_.now());
    };
    h.on_close = [this, sid, done](netsim::CloseReason reason) {
        auto it = sessions_.find(sid);
        if (it != sessions_.end() && !it->second->established) {
            log("direct_connect_failed", {{"reason", netsim::close_reason_name(reason)}});
            finish(*done, {false, 0, netsim::close_reason_name(reason)});
        }
        drop_session(sid);
    };
    session->conn = sim_.connect(node_, address, h, cfg_.connect_timeout_ms);
    log("direct_connect", {{"to", address.to_string()}});
    sessions_[sid] = std::move(session);
}

void RequestorClient::start_proxy_session(PendingRequest req, uint64_t correlation,
                                          const auth::SoftwareToken& token,
                                          const Bytes& token_bytes) {
    SessionId sid = next_session_++;
    auto session = std::make_unique<Session>();
    session->id = sid;
    session->mode = Mode::Proxy;
    session->proxy_correlation = correlation;
    Session* s = session.get();
    auto done = std::make_shared<SessionFn>(std::move(req.done));
    establish_waiters_[sid] = {done, req.command};

    s->channel = std::make_unique<proto::SecureChannel>(auth::Handshake::Role::Initiator,
                                                        cfg_.credential, &cfg_.trust, sim_.rng());
    s->channel->on_ready = [this, s, token_bytes, tan = token.tan] {
        s->channel->send({1, MsgType::DIAL_BACK, next_correlation_++,
                          DialBackBody{tan, token_bytes}.encode(), {}});
    };
    s->channel->on_fail = [this, s, done](const std::string& reason) {
        log("proxy_auth_fail", {{"reason", reason}});
        finish(*done, {false, 0, reason});
        drop_session(s->id);
    };
    s->channel->on_message = [this, s](const WireMessage& m) { on_session_message(*s, m); };
    s->channel->attach(
        [this, correlation](Bytes f) {
            if (broker_ && broker_->ready())
                broker_->send({1, MsgType::PROXY_DATA, correlation,
                               ProxyDataBody{std::move(f)}.encode(), {}});
        },
        sim_.now());
    log("proxy_session_start", {{"gateway", req.gateway_id}});
    sessions_[sid] = std::move(session);
}

void RequestorClient::accept_dialback(ConnId id, const NetAddress& peer) {
    SessionId sid = next_session_++;
    auto session = std::make_unique<Session>();
    session->id = sid;
    session->mode = Mode::Invocation;
    session->conn = id;
    Session* s = session.get();
    s->channel = std::make_unique<proto::SecureChannel>(auth::Handshake::Role::Responder,
                                                        cfg_.credential, &cfg_.trust, sim_.rng(),
                                                        &seen_nonces_);
    s->channel->on_fail = [this, s](const std::string& reason) {
        log("dialback_auth_fail", {{"reason", reason}});
        sim_.close(s->conn);
        drop_session(s->id);
    };
    s->channel->on_message = [this, s](const WireMessage& m) { on_session_message(*s, m); };
    s->channel->attach([this, id](Bytes f) { sim_.send(id, std::move(f)); }, sim_.now());
    log("dialback_inbound", {{"from", peer.to_string()}});
    sessions_[sid] = std::move(session);
}

void RequestorClient::on_session_message(Session& s, const WireMessage& msg) {
    switch (msg.msg_type) {
        case MsgType::DIAL_BACK: {
            // Gateway dialing back in invocation mode.
            DialBackBody body = DialBackBody::decode(msg.body);
            auth::SoftwareToken token;
            bool decodable = true;
            try {
                token = auth::SoftwareToken::decode(body.token);
            } catch (const codec::CodecError&) {
                decodable = false;
            }
            auto pit = pending_tans_.find(body.tan);
            std::string reason;
            if (!decodable)
                reason = "BadToken";
            else if (pit == pending_tans_.end())
                reason = "TanMismatch";
            else if (token.gateway_fingerprint != s.channel->peer().peer_fingerprint)
                reason = "FingerprintMismatch";
            else if (auth::verify_token(token, cfg_.trust, token.gateway.id, sim_.now()) !=
                     auth::TokenStatus::Valid)
                reason = "BadToken";
            if (!reason.empty()) {
                log("dialback_rejected", {{"reason", reason}});
                s.channel->send({1, MsgType::ERROR, msg.correlation,
                                 ErrorBody{ErrorCode::BadToken, reason}.encode(), {}});
                sim_.close(s.conn);
                drop_session(s.id);
                return;
            }
            PendingDial pend = std::move(pit->second);
            pending_tans_.erase(pit);  // TAN is single-use
            sim_.cancel(pend.timer);
            s.established = true;
            s.peer = s.channel->peer().peer;
            log("session_open", {{"peer", s.peer.id}, {"mode", "Invocation"}});
            s.channel->send({1, MsgType::REDIRECT_RESPONSE, msg.correlation,
                             RedirectResponseBody{std::nullopt, {}}.encode(), {}});
            finish(pend.done, {true, s.id, ""});
            return;
        }
        case MsgType::REDIRECT_RESPONSE: {
            // Gateway acknowledged our opener (redirect / proxy).
            if (s.established) return;
            s.established = true;
            s.peer = s.channel->peer().peer;
            log("session_open", {{"peer", s.peer.id}, {"mode", mode_name(s.mode)}});
            auto wit = establish_waiters_.find(s.id);
            if (wit != establish_waiters_.end()) {
                auto [done, command] = wit->second;
                establish_waiters_.erase(wit);
                finish(*done, {true, s.id, ""});
                if (command) {
                    SessionId sid = s.id;
                    send_command(sid, *command, [this, sid](const CommandOutcome& out) {
                        if (on_embedded_outcome) on_embedded_outcome(sid, out);
                    });
                }
            }
            return;
        }
        case MsgType::APP_DATA: {
            Bytes payload;
            uint64_t seq = 0;
            auto verdict =
                auth::verify_app_message(s.channel->channel_key(), msg, s.recv_seq, payload, seq);
            if (verdict != auth::AppVerify::Ok) {
                log("app_verify_fail", {{"result", auth::app_verify_name(verdict)}});
                auto wit = s.waiting.find(msg.correlation);
                if (wit != s.waiting.end()) {
                    CommandFn done = std::move(wit->second);
                    s.waiting.erase(wit);
                    done({false, {}, auth::app_verify_name(verdict)});
                } else if (on_embedded_outcome) {
                    on_embedded_outcome(s.id, {false, {}, auth::app_verify_name(verdict)});
                }
                return;
            }
            std::optional<Command> cmd;
            std::optional<CommandResult> result;
            try {
                decode_app_payload(payload, cmd, result);
            } catch (const codec::CodecError&) {
                return;
            }
            if (!result) return;
            log("command_result", {{"kind", command_kind_name(result->kind)},
                                   {"status", command_status_name(result->status)}});
            auto wit = s.waiting.find(msg.correlation);
            if (wit != s.waiting.end()) {
                CommandFn done = std::move(wit->second);
                s.waiting.erase(wit);
                done({true, *result, ""});
            } else if (on_embedded_outcome) {
                on_embedded_outcome(s.id, {true, *result, ""});
            }
            return;
        }
        case MsgType::ERROR: {
            auto err = ErrorBody::decode(msg.body);
            std::string reason = err.detail.empty() ? error_code_name(err.code) : err.detail;
            log("session_error", {{"code", error_code_name(err.code)}, {"detail", err.detail}});
            auto wit = s.waiting.find(msg.correlation);
            if (wit != s.waiting.end()) {
                CommandFn done = std::move(wit->second);
                s.waiting.erase(wit);
                done({false, {}, reason});
                return;
            }
            auto eit = establish_waiters_.find(s.id);
            if (eit != establish_waiters_.end()) {
                auto [done, command] = eit->second;
                establish_waiters_.erase(eit);
                finish(*done, {false, 0, reason});
                return;
            }
            if (on_embedded_outcome) on_embedded_outcome(s.id, {false, {}, reason});
            return;
        }
        default:
            log("unexpected_message", {{"type", msg_type_name(msg.msg_type)}});
    }
}

void RequestorClient::send_command(SessionId session, const Command& cmd, CommandFn done) {
    auto it = sessions_.find(session);
    if (it == sessions_.end() || !it->second->established) {
        done({false, {}, "SessionClosed"});
        return;
    }
    Session& s = *it->second;
    uint64_t corr = next_correlation_++;
    s.waiting[corr] = std::move(done);
    sim_.schedule(cfg_.connect_timeout_ms, [this, session, corr] {
        auto sit = sessions_.find(session);
        if (sit == sessions_.end()) return;
        auto wit = sit->second->waiting.find(corr);
        if (wit == sit->second->waiting.end()) return;
        CommandFn dead = std::move(wit->second);
        sit->second->waiting.erase(wit);
        dead({false, {}, "Timeout"});
    });
    log("command_sent", {{"kind", command_kind_name(cmd.kind)}});
    s.channel->send(auth::sign_app_message(s.channel->channel_key(), corr, ++s.send_seq,
                                           encode_command_request(cmd)));
}

void RequestorClient::close_session(SessionId session) {
    auto it = sessions_.find(session);
    if (it == sessions_.end()) return;
    if (it->second->conn != 0) sim_.close(it->second->conn);
    drop_session(session);
}

bool RequestorClient::session_open(SessionId session) const {
    auto it = sessions_.find(session);
    return it != sessions_.end() && it->second->established;
}

const Identity& RequestorClient::session_peer(SessionId session) const {
    return sessions_.at(session)->peer;
}

void RequestorClient::finish(SessionFn& done, const SessionOutcome& outcome) {
    if (!done) return;
    SessionFn fn = std::move(done);
    done = nullptr;
    fn(outcome);
}

void RequestorClient::drop_session(SessionId id) {
    establish_waiters_.erase(id);
    sim_.schedule(0, [this, id] { sessions_.erase(id); });
}

void RequestorClient::log(const std::string& event, netsim::LogFields fields) {
    fields.insert(fields.begin(), {"actor", cfg_.identity.id});
    sim_.log().append(sim_.now(), event, std::move(fields));
}

}  // namespace asia
