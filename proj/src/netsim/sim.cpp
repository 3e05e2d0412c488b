#include "asia/netsim/sim.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "asia/core/crypto.hpp"

namespace asia::netsim {

// ---------------------------------------------------------------------------
// EventLog
// ---------------------------------------------------------------------------

std::string LogEntry::line() const {
    std::string out = "t=" + std::to_string(time) + " ev=" + event;
    for (const auto& [k, v] : fields) out += " " + k + "=" + v;
    return out;
}

std::optional<std::string> LogEntry::field(const std::string& key) const {
    for (const auto& [k, v] : fields)
        if (k == key) return v;
    return std::nullopt;
}

void EventLog::append(SimTime t, std::string event, LogFields fields) {
    entries_.push_back(LogEntry{t, std::move(event), std::move(fields)});
}

std::string EventLog::text() const {
    std::string out;
    for (const auto& e : entries_) {
        out += e.line();
        out += "\n";
    }
    return out;
}

Digest EventLog::digest() const {
    std::string t = text();
    return crypto::sha256(reinterpret_cast<const uint8_t*>(t.data()), t.size());
}

void EventLog::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write log file: " + path);
    out << text();
}

std::vector<LogEntry> EventLog::parse(const std::string& text) {
    std::vector<LogEntry> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        LogEntry e;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            std::string k = tok.substr(0, eq);
            std::string v = tok.substr(eq + 1);
            if (k == "t")
                e.time = std::stoull(v);
            else if (k == "ev")
                e.event = v;
            else
                e.fields.emplace_back(k, v);
        }
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Names
// ---------------------------------------------------------------------------

const char* fault_kind_name(FaultKind k) {
    switch (k) {
        case FaultKind::DropNext: return "DropNext";
        case FaultKind::TamperNext: return "TamperNext";
        case FaultKind::LinkDown: return "LinkDown";
        case FaultKind::AddressRebind: return "AddressRebind";
        case FaultKind::ConfigMutate: return "ConfigMutate";
        case FaultKind::TanCorrupt: return "TanCorrupt";
        case FaultKind::TanReplay: return "TanReplay";
        case FaultKind::CredSubstitute: return "CredSubstitute";
    }
    return "?";
}

const char* drop_reason_name(DropReason r) {
    switch (r) {
        case DropReason::FirewallBlocked: return "FirewallBlocked";
        case DropReason::BindingExpired: return "BindingExpired";
        case DropReason::LinkDown: return "LinkDown";
        case DropReason::FaultDrop: return "FaultDrop";
        case DropReason::NoRoute: return "NoRoute";
        case DropReason::ConnectionLost: return "ConnectionLost";
    }
    return "?";
}

const char* close_reason_name(CloseReason r) {
    switch (r) {
        case CloseReason::PeerClosed: return "PeerClosed";
        case CloseReason::ConnectTimeout: return "ConnectTimeout";
        case CloseReason::ConnectionLost: return "ConnectionLost";
        case CloseReason::Refused: return "Refused";
        case CloseReason::LocalClose: return "LocalClose";
    }
    return "?";
}

NatBinding* NatDevice::by_external_port(uint16_t port) {
    for (auto& [key, b] : bindings)
        if (b.external_port == port) return &b;
    return nullptr;
}

uint64_t SimNet::Counters::dropped_total() const {
    uint64_t n = 0;
    for (const auto& [k, v] : drops) n += v;
    return n;
}

// ---------------------------------------------------------------------------
// SimNet: topology
// ---------------------------------------------------------------------------

SimNet::SimNet(uint64_t seed) : rng_(seed) {}

void SimNet::add_node(const std::string& name, bool behind_nat) {
    if (nodes_.count(name)) throw std::runtime_error("DuplicateNode: " + name);
    Node n;
    n.name = name;
    if (behind_nat) {
        NatDevice dev;
        dev.owner_node = name;
        dev.external_host = name + "-ip0";
        n.nat_index = static_cast<int>(nats_.size());
        host_to_nat_[dev.external_host] = n.nat_index;
        nats_.push_back(std::move(dev));
    }
    nodes_.emplace(name, std::move(n));
}

void SimNet::add_link(const std::string& a, const std::string& b, SimTime latency_ms) {
    if (!nodes_.count(a)) throw std::runtime_error("DanglingLink: " + a);
    if (!nodes_.count(b)) throw std::runtime_error("DanglingLink: " + b);
    links_[a][b] = latency_ms;
    links_[b][a] = latency_ms;
    latency_cache_.clear();
}

const NatDevice* SimNet::nat_of(const std::string& n) const {
    auto it = nodes_.find(n);
    if (it == nodes_.end() || it->second.nat_index < 0) return nullptr;
    return &nats_[it->second.nat_index];
}

SimNet::Node& SimNet::node(const std::string& name) {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) throw std::runtime_error("unknown node: " + name);
    return it->second;
}

const SimNet::Node& SimNet::node(const std::string& name) const {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) throw std::runtime_error("unknown node: " + name);
    return it->second;
}

SimTime SimNet::path_latency(const std::string& a, const std::string& b) {
    if (a == b) return 0;
    auto key = std::make_pair(a, b);
    auto cached = latency_cache_.find(key);
    if (cached != latency_cache_.end()) return cached->second;

    // Dijkstra over the link graph; hosts route for each other.
    constexpr SimTime kInf = ~SimTime{0};
    std::map<std::string, SimTime> dist;
    for (const auto& [n, _] : nodes_) dist[n] = kInf;
    dist[a] = 0;
    using Item = std::pair<SimTime, std::string>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
    q.push({0, a});
    while (!q.empty()) {
        auto [d, n] = q.top();
        q.pop();
        if (d > dist[n]) continue;
        auto ln = links_.find(n);
        if (ln == links_.end()) continue;
        for (const auto& [m, w] : ln->second) {
            if (d + w < dist[m]) {
                dist[m] = d + w;
                q.push({dist[m], m});
            }
        }
    }
    for (const auto& [n, d] : dist) {
        if (d != kInf) latency_cache_[{a, n}] = d;
    }
    if (dist[b] == kInf) {
        latency_cache_[{a, b}] = kInf;
        return kInf;
    }
    return dist[b];
}

bool SimNet::node_down(const std::string& n) const {
    auto it = down_until_.find(n);
    return it != down_until_.end() && now_ < it->second;
}

// ---------------------------------------------------------------------------
// Scheduling
// ---------------------------------------------------------------------------

uint64_t SimNet::schedule(SimTime delay_ms, std::function<void()> fn) {
    auto ev = std::make_shared<Event>();
    ev->time = now_ + delay_ms;
    ev->seq = next_event_seq_++;
    ev->fn = std::move(fn);
    events_.push(ev);
    timers_[ev->seq] = ev;
    return ev->seq;
}

void SimNet::cancel(uint64_t timer_id) {
    auto it = timers_.find(timer_id);
    if (it != timers_.end()) {
        it->second->cancelled = true;
        timers_.erase(it);
    }
}

size_t SimNet::advance(SimTime until) {
    size_t processed = 0;
    while (!events_.empty() && events_.top()->time <= until) {
        auto ev = events_.top();
        events_.pop();
        timers_.erase(ev->seq);
        if (ev->cancelled) continue;
        now_ = std::max(now_, ev->time);
        ev->fn();
        ++processed;
    }
    now_ = std::max(now_, until);
    return processed;
}

size_t SimNet::run(SimTime max_time) {
    size_t processed = 0;
    while (!events_.empty() && events_.top()->time <= max_time) {
        auto ev = events_.top();
        events_.pop();
        timers_.erase(ev->seq);
        if (ev->cancelled) continue;
        now_ = std::max(now_, ev->time);
        ev->fn();
        ++processed;
    }
    return processed;
}

// ---------------------------------------------------------------------------
// NAT
// ---------------------------------------------------------------------------

NatBinding& SimNet::ensure_binding(Node& n, uint16_t port) {
    NatDevice& dev = nats_[n.nat_index];
    auto key = std::make_pair(n.name, port);
    auto it = dev.bindings.find(key);
    if (it != dev.bindings.end()) {
        // Idle bindings are gone; the next outbound packet opens a new one.
        if (now_ - it->second.last_activity > kNatBindingTtlMs) {
            dev.bindings.erase(it);
        } else {
            it->second.last_activity = now_;
            return it->second;
        }
    }
    NatBinding b;
    b.internal_node = n.name;
    b.internal_port = port;
    b.external_port = dev.next_external_port++;
    b.last_activity = now_;
    auto [ins, _] = dev.bindings.emplace(key, std::move(b));
    return ins->second;
}

void SimNet::address_rebind(const std::string& name) {
    Node& n = node(name);
    if (n.nat_index < 0) {
        log_.append(now_, "warning", {{"kind", "rebind_on_public_node"}, {"node", name}});
        return;
    }
    NatDevice& dev = nats_[n.nat_index];
    dev.pool_index++;
    dev.external_host = name + "-ip" + std::to_string(dev.pool_index);
    host_to_nat_[dev.external_host] = n.nat_index;
    dev.bindings.clear();
    log_.append(now_, "rebind", {{"node", name}, {"new_host", dev.external_host}});
    // Open channels through the device observe connection loss.
    std::vector<ConnId> to_break;
    for (auto& [id, c] : conns_) {
        if (c.state == ConnState::Closed) continue;
        if (c.init_node == name || c.resp_node == name) to_break.push_back(id);
    }
    for (auto id : to_break) break_conn(id, CloseReason::ConnectionLost);
}

// ---------------------------------------------------------------------------
// Faults
// ---------------------------------------------------------------------------

void SimNet::load_fault_script(const FaultScript& script) {
    for (const auto& f : script) {
        SimTime delay = f.time > now_ ? f.time - now_ : 0;
        schedule(delay, [this, f] { fire_fault(f); });
    }
}

void SimNet::fire_fault(const Fault& f) {
    LogFields fields{{"kind", fault_kind_name(f.kind)}};
    if (!f.node.empty()) fields.emplace_back("node", f.node);
    log_.append(now_, "fault", fields);
    switch (f.kind) {
        case FaultKind::DropNext: drop_next_ += f.count; break;
        case FaultKind::TamperNext: relay_tamper_ = {f.byte_index, f.xor_mask}; break;
        case FaultKind::LinkDown: {
            down_until_[f.node] = now_ + f.duration;
            std::vector<ConnId> to_break;
            for (auto& [id, c] : conns_) {
                if (c.state != ConnState::Open) continue;
                if (c.init_node == f.node || c.resp_node == f.node) to_break.push_back(id);
            }
            for (auto id : to_break) break_conn(id, CloseReason::ConnectionLost);
            break;
        }
        case FaultKind::AddressRebind: {
            address_rebind(f.node);
            // The node notices its own reconnect (as a DSL modem would) and
            // may react, e.g. by re-registering.
            auto it = fault_hooks_.find(f.node);
            if (it != fault_hooks_.end()) it->second(f.kind);
            break;
        }
        case FaultKind::ConfigMutate:
        case FaultKind::TanCorrupt:
        case FaultKind::TanReplay:
        case FaultKind::CredSubstitute: {
            auto it = fault_hooks_.find(f.node);
            if (it != fault_hooks_.end()) it->second(f.kind);
            break;
        }
    }
}

void SimNet::set_fault_hook(const std::string& n, std::function<void(FaultKind)> hook) {
    fault_hooks_[n] = std::move(hook);
}

std::optional<std::pair<size_t, uint8_t>> SimNet::take_relay_tamper() {
    auto t = relay_tamper_;
    relay_tamper_.reset();
    return t;
}

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

void SimNet::listen(const std::string& n, uint16_t port, AcceptFn accept) {
    node(n);  // existence check
    listeners_[{n, port}] = std::move(accept);
}

void SimNet::stop_listen(const std::string& n, uint16_t port) { listeners_.erase({n, port}); }

NetAddress SimNet::public_address(const std::string& name, uint16_t port) const {
    const Node& n = node(name);
    if (n.nat_index < 0) return {name, port};
    const NatDevice& dev = nats_[n.nat_index];
    auto it = dev.bindings.find({name, port});
    if (it != dev.bindings.end()) return {dev.external_host, it->second.external_port};
    return {dev.external_host, 0};
}

ConnHandlers& SimNet::handlers_for(Conn& c, bool initiator_side) {
    return initiator_side ? c.init_handlers : c.resp_handlers;
}

ConnId SimNet::connect(const std::string& name, const NetAddress& remote, ConnHandlers handlers,
                       SimTime timeout_ms) {
    Node& n = node(name);
    uint64_t key = next_conn_id_++;
    Conn c;
    c.id = key;
    c.init_node = name;
    c.init_port = n.next_port++;
    c.resp_observed = remote;
    c.init_handlers = std::move(handlers);
    ConnId endpoint = key * 2;
    c.timeout_timer = schedule(timeout_ms, [this, key] {
        auto it = conns_.find(key);
        if (it == conns_.end() || it->second.state != ConnState::Connecting) return;
        it->second.state = ConnState::Closed;
        if (it->second.init_handlers.on_close) it->second.init_handlers.on_close(CloseReason::ConnectTimeout);
    });
    conns_.emplace(key, std::move(c));

    Packet pkt;
    pkt.kind = PacketKind::Syn;
    pkt.conn = key;
    pkt.from_initiator = true;
    pkt.dst = remote;
    transmit(std::move(pkt));
    return endpoint;
}

void SimNet::send(ConnId endpoint, Bytes frame) {
    uint64_t key = endpoint / 2;
    bool from_init = (endpoint % 2) == 0;
    auto it = conns_.find(key);
    if (it == conns_.end() || it->second.state != ConnState::Open) return;  // dropped silently
    if (from_init ? it->second.init_closed_local : it->second.resp_closed_local) return;
    Packet pkt;
    pkt.kind = PacketKind::Data;
    pkt.conn = key;
    pkt.from_initiator = from_init;
    pkt.dst = from_init ? it->second.resp_observed : it->second.init_observed;
    pkt.payload = std::move(frame);
    transmit(std::move(pkt));
}

void SimNet::close(ConnId endpoint) {
    uint64_t key = endpoint / 2;
    bool from_init = (endpoint % 2) == 0;
    auto it = conns_.find(key);
    if (it == conns_.end() || it->second.state == ConnState::Closed) return;
    bool& closed_local = from_init ? it->second.init_closed_local : it->second.resp_closed_local;
    if (closed_local) return;
    closed_local = true;
    Packet pkt;
    pkt.kind = PacketKind::Fin;
    pkt.conn = key;
    pkt.from_initiator = from_init;
    pkt.dst = from_init ? it->second.resp_observed : it->second.init_observed;
    transmit(std::move(pkt));
}

bool SimNet::is_open(ConnId endpoint) const {
    auto it = conns_.find(endpoint / 2);
    if (it == conns_.end() || it->second.state != ConnState::Open) return false;
    return (endpoint % 2) == 0 ? !it->second.init_closed_local : !it->second.resp_closed_local;
}

NetAddress SimNet::remote_address(ConnId endpoint, const std::string&) const {
    auto it = conns_.find(endpoint / 2);
    if (it == conns_.end()) return {};
    return (endpoint % 2) == 0 ? it->second.resp_observed : it->second.init_observed;
}

void SimNet::drop(const Packet& pkt, DropReason reason) {
    counters_.drops[drop_reason_name(reason)]++;
    --in_flight_;
    log_.append(now_, "drop",
                {{"reason", drop_reason_name(reason)},
                 {"from", pkt.src.host.empty() ? pkt.src_node : pkt.src.host},
                 {"to", pkt.dst.to_string()}});
}

void SimNet::break_conn(ConnId key, CloseReason reason) {
    auto it = conns_.find(key);
    if (it == conns_.end() || it->second.state == ConnState::Closed) return;
    bool was_connecting = it->second.state == ConnState::Connecting;
    it->second.state = ConnState::Closed;
    cancel(it->second.timeout_timer);
    auto init_close = it->second.init_handlers.on_close;
    auto resp_close = it->second.resp_handlers.on_close;
    // Deliver notifications through the queue so state changes settle first.
    if (init_close) schedule(0, [init_close, reason] { init_close(reason); });
    if (!was_connecting && resp_close) schedule(0, [resp_close, reason] { resp_close(reason); });
}

void SimNet::transmit(Packet pkt) {
    ++counters_.packets_sent;
    ++in_flight_;

    auto cit = conns_.find(pkt.conn);
    if (cit == conns_.end()) {
        --in_flight_;
        return;
    }
    Conn& c = cit->second;
    pkt.src_node = pkt.from_initiator ? c.init_node : c.resp_node;
    uint16_t src_port = pkt.from_initiator ? c.init_port : c.resp_port;
    Node& src = node(pkt.src_node);

    // Scripted packet loss; loss breaks an established connection.
    if (drop_next_ > 0) {
        --drop_next_;
        pkt.src = {pkt.src_node, src_port};
        drop(pkt, DropReason::FaultDrop);
        if (pkt.kind == PacketKind::Data || pkt.kind == PacketKind::Fin)
            break_conn(pkt.conn, CloseReason::ConnectionLost);
        return;
    }

    // Egress NAT: translate source, refresh the binding, remember the peer.
    if (src.nat_index >= 0) {
        NatBinding& b = ensure_binding(src, src_port);
        b.remote_hosts.insert(pkt.dst.host);
        pkt.src = {nats_[src.nat_index].external_host, b.external_port};
    } else {
        pkt.src = {pkt.src_node, src_port};
    }

    // Resolve destination host to a node.
    auto nat_it = host_to_nat_.find(pkt.dst.host);
    if (nat_it != host_to_nat_.end()) {
        pkt.dst_node = nats_[nat_it->second].owner_node;
    } else if (nodes_.count(pkt.dst.host)) {
        pkt.dst_node = pkt.dst.host;
    } else {
        drop(pkt, DropReason::NoRoute);
        return;
    }
    pkt.dst_port = pkt.dst.port;

    if (node_down(pkt.src_node) || node_down(pkt.dst_node)) {
        drop(pkt, DropReason::LinkDown);
        if (pkt.kind == PacketKind::Data || pkt.kind == PacketKind::Fin)
            break_conn(pkt.conn, CloseReason::ConnectionLost);
        return;
    }

    SimTime latency = path_latency(pkt.src_node, pkt.dst_node);
    if (latency == ~SimTime{0}) {
        drop(pkt, DropReason::NoRoute);
        return;
    }
    schedule(latency, [this, p = std::move(pkt)]() mutable { arrive(std::move(p)); });
}

void SimNet::arrive(Packet pkt) {
    if (node_down(pkt.dst_node)) {
        drop(pkt, DropReason::LinkDown);
        if (pkt.kind == PacketKind::Data || pkt.kind == PacketKind::Fin)
            break_conn(pkt.conn, CloseReason::ConnectionLost);
        return;
    }

    // Ingress NAT admission.
    auto nat_it = host_to_nat_.find(pkt.dst.host);
    if (nat_it != host_to_nat_.end()) {
        NatDevice& dev = nats_[nat_it->second];
        NatBinding* b = dev.external_host == pkt.dst.host ? dev.by_external_port(pkt.dst.port)
                                                          : nullptr;
        if (!b) {
            drop(pkt, DropReason::FirewallBlocked);
            return;
        }
        if (now_ - b->last_activity > kNatBindingTtlMs) {
            dev.bindings.erase({b->internal_node, b->internal_port});
            drop(pkt, DropReason::BindingExpired);
            if (pkt.kind == PacketKind::Data || pkt.kind == PacketKind::Fin)
                break_conn(pkt.conn, CloseReason::ConnectionLost);
            return;
        }
        if (!b->remote_hosts.count(pkt.src.host)) {
            drop(pkt, DropReason::FirewallBlocked);
            return;
        }
        pkt.dst_node = b->internal_node;
        pkt.dst_port = b->internal_port;
    }

    auto cit = conns_.find(pkt.conn);
    if (cit == conns_.end()) {
        drop(pkt, DropReason::ConnectionLost);
        return;
    }
    Conn& c = cit->second;

    switch (pkt.kind) {
        case PacketKind::Syn: {
            auto lit = listeners_.find({pkt.dst_node, pkt.dst_port});
            if (lit == listeners_.end()) {
                ++counters_.packets_delivered;
                --in_flight_;
                Packet rst;
                rst.kind = PacketKind::Rst;
                rst.conn = pkt.conn;
                rst.from_initiator = false;
                c.resp_node = pkt.dst_node;
                c.resp_port = pkt.dst_port;
                c.init_observed = pkt.src;
                rst.dst = pkt.src;
                transmit(std::move(rst));
                return;
            }
            c.resp_node = pkt.dst_node;
            c.resp_port = pkt.dst_port;
            c.init_observed = pkt.src;
            auto handlers = lit->second(pkt.conn * 2 + 1, pkt.src);
            ++counters_.packets_delivered;
            --in_flight_;
            if (!handlers) {
                // Leave the conn Connecting: the Rst must still reach the
                // initiator and fire its on_close(Refused).
                Packet rst;
                rst.kind = PacketKind::Rst;
                rst.conn = pkt.conn;
                rst.from_initiator = false;
                rst.dst = pkt.src;
                transmit(std::move(rst));
                return;
            }
            c.resp_handlers = std::move(*handlers);
            c.state = ConnState::Open;
            Packet ack;
            ack.kind = PacketKind::SynAck;
            ack.conn = pkt.conn;
            ack.from_initiator = false;
            ack.dst = pkt.src;
            transmit(std::move(ack));
            return;
        }
        case PacketKind::SynAck: {
            ++counters_.packets_delivered;
            --in_flight_;
            if (c.state == ConnState::Closed) return;  // timed out meanwhile
            cancel(c.timeout_timer);
            c.state = ConnState::Open;
            if (c.init_handlers.on_open) c.init_handlers.on_open();
            return;
        }
        case PacketKind::Rst: {
            ++counters_.packets_delivered;
            --in_flight_;
            if (c.state == ConnState::Closed) return;
            cancel(c.timeout_timer);
            c.state = ConnState::Closed;
            if (c.init_handlers.on_close) c.init_handlers.on_close(CloseReason::Refused);
            return;
        }
        case PacketKind::Data: {
            bool receiver_closed = pkt.from_initiator ? c.resp_closed_local : c.init_closed_local;
            if (c.state != ConnState::Open || receiver_closed) {
                drop(pkt, DropReason::ConnectionLost);
                return;
            }
            ++counters_.packets_delivered;
            --in_flight_;
            auto& h = handlers_for(c, !pkt.from_initiator);
            if (h.on_frame) h.on_frame(pkt.payload);
            return;
        }
        case PacketKind::Fin: {
            ++counters_.packets_delivered;
            --in_flight_;
            bool receiver_closed = pkt.from_initiator ? c.resp_closed_local : c.init_closed_local;
            bool was_open = c.state == ConnState::Open;
            c.state = ConnState::Closed;
            cancel(c.timeout_timer);
            auto& h = handlers_for(c, !pkt.from_initiator);
            if (was_open && !receiver_closed && h.on_close) h.on_close(CloseReason::PeerClosed);
            return;
        }
    }
}

uint64_t SimNet::pending_packets() const { return in_flight_; }

}  // namespace asia::netsim
