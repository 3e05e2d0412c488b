#ifndef ASIA_NETSIM_SIM_HPP
#define ASIA_NETSIM_SIM_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>

#include "asia/core/wire.hpp"

namespace asia::netsim {

// ---------------------------------------------------------------------------
// Event log: one line per event, stable field order, diffable.
// ---------------------------------------------------------------------------

using LogFields = std::vector<std::pair<std::string, std::string>>;

struct LogEntry {
    SimTime time = 0;
    std::string event;
    LogFields fields;

    std::string line() const;
    std::optional<std::string> field(const std::string& key) const;
};

class EventLog {
public:
    void append(SimTime t, std::string event, LogFields fields);
    const std::vector<LogEntry>& entries() const { return entries_; }
    std::string text() const;
    Digest digest() const;
    void write_file(const std::string& path) const;
    static std::vector<LogEntry> parse(const std::string& text);

private:
    std::vector<LogEntry> entries_;
};

// ---------------------------------------------------------------------------
// Faults
// ---------------------------------------------------------------------------

enum class FaultKind {
    DropNext,        // drop the next n packets on the wire
    TamperNext,      // xor one byte of the next relayed proxy frame
    LinkDown,        // node unreachable for a duration
    AddressRebind,   // DSL address change on a NAT'd node
    ConfigMutate,    // out-of-band gateway config mutation
    TanCorrupt,      // gateway presents a corrupted TAN on next dial-back
    TanReplay,       // gateway dials back twice with the same TAN
    CredSubstitute,  // gateway dials back with a different credential
};

const char* fault_kind_name(FaultKind k);

struct Fault {
    SimTime time = 0;
    FaultKind kind = FaultKind::DropNext;
    std::string node;     // LinkDown/AddressRebind/agent-level faults
    uint64_t count = 0;   // DropNext
    uint64_t duration = 0;  // LinkDown
    size_t byte_index = 0;  // TamperNext
    uint8_t xor_mask = 0;   // TamperNext
};

using FaultScript = std::vector<Fault>;

// ---------------------------------------------------------------------------
// Addresses, connections
// ---------------------------------------------------------------------------

enum class DropReason {
    FirewallBlocked,
    BindingExpired,
    LinkDown,
    FaultDrop,
    NoRoute,
    ConnectionLost,
};
const char* drop_reason_name(DropReason r);

enum class CloseReason {
    PeerClosed,
    ConnectTimeout,
    ConnectionLost,
    Refused,
    LocalClose,
};
const char* close_reason_name(CloseReason r);

using ConnId = uint64_t;

struct ConnHandlers {
    std::function<void()> on_open;  // initiator side only
    std::function<void(const Bytes&)> on_frame;
    std::function<void(CloseReason)> on_close;
};

// Inbound connection: return handlers to accept, nullopt to refuse.
using AcceptFn = std::function<std::optional<ConnHandlers>(ConnId, const NetAddress& peer)>;

struct NatBinding {
    std::string internal_node;
    uint16_t internal_port = 0;
    uint16_t external_port = 0;
    SimTime last_activity = 0;
    std::set<std::string> remote_hosts;  // address-restricted filtering
};

struct NatDevice {
    std::string owner_node;
    std::string external_host;          // current, from the pool
    int pool_index = 0;
    uint16_t next_external_port = 20000;
    std::map<std::pair<std::string, uint16_t>, NatBinding> bindings;  // by internal endpoint

    NatBinding* by_external_port(uint16_t port);
};

constexpr SimTime kNatBindingTtlMs = 120'000;
constexpr SimTime kDefaultConnectTimeoutMs = 10'000;

// ---------------------------------------------------------------------------
// The simulator
// ---------------------------------------------------------------------------

class SimNet {
public:
    explicit SimNet(uint64_t seed);

    // -- topology (before use) --
    void add_node(const std::string& name, bool behind_nat);
    void add_link(const std::string& a, const std::string& b, SimTime latency_ms);
    bool has_node(const std::string& name) const { return nodes_.count(name) > 0; }
    size_t node_count() const { return nodes_.size(); }
    size_t nat_device_count() const { return nats_.size(); }
    const NatDevice* nat_of(const std::string& node) const;

    // -- clock and scheduling --
    SimTime now() const { return now_; }
    std::mt19937_64& rng() { return rng_; }
    EventLog& log() { return log_; }
    const EventLog& log() const { return log_; }

    uint64_t schedule(SimTime delay_ms, std::function<void()> fn);
    void cancel(uint64_t timer_id);

    size_t advance(SimTime until);        // process events with time <= until
    size_t run(SimTime max_time);         // run until idle or max_time

    // -- transport --
    void listen(const std::string& node, uint16_t port, AcceptFn accept);
    void stop_listen(const std::string& node, uint16_t port);
    ConnId connect(const std::string& node, const NetAddress& remote, ConnHandlers handlers,
                   SimTime timeout_ms = kDefaultConnectTimeoutMs);
    void send(ConnId conn, Bytes frame);
    void close(ConnId conn);
    bool is_open(ConnId conn) const;
    NetAddress remote_address(ConnId conn, const std::string& local_node) const;
    // The address other nodes would use to reach (node, port); for NAT'd
    // nodes this is only meaningful per existing binding.
    NetAddress public_address(const std::string& node, uint16_t port) const;

    // -- faults --
    void load_fault_script(const FaultScript& script);
    void address_rebind(const std::string& node);
    // Agent-level fault hooks (ConfigMutate, TanCorrupt, ...), keyed by node.
    void set_fault_hook(const std::string& node, std::function<void(FaultKind)> hook);
    // Consumed by the broker's proxy relay.
    std::optional<std::pair<size_t, uint8_t>> take_relay_tamper();

    // -- accounting --
    struct Counters {
        uint64_t packets_sent = 0;
        uint64_t packets_delivered = 0;
        std::map<std::string, uint64_t> drops;  // by reason name
        uint64_t dropped_total() const;
    };
    const Counters& counters() const { return counters_; }
    uint64_t pending_packets() const;

private:
    struct Node {
        std::string name;
        int nat_index = -1;  // index into nats_, -1 = public
        uint16_t next_port = 30000;
    };

    enum class PacketKind { Syn, SynAck, Rst, Data, Fin };

    struct Packet {
        PacketKind kind = PacketKind::Data;
        ConnId conn = 0;
        bool from_initiator = true;
        NetAddress src;  // observed (post-NAT) source
        NetAddress dst;
        std::string src_node;
        std::string dst_node;
        uint16_t dst_port = 0;  // internal destination port
        Bytes payload;
    };

    enum class ConnState { Connecting, Open, Closed };

    struct Conn {
        ConnId id = 0;
        ConnState state = ConnState::Connecting;
        std::string init_node;
        uint16_t init_port = 0;
        std::string resp_node;
        uint16_t resp_port = 0;
        NetAddress init_observed;  // initiator's address as the responder sees it
        NetAddress resp_observed;  // address the initiator dialed
        ConnHandlers init_handlers;
        ConnHandlers resp_handlers;
        bool init_closed_local = false;  // that side called close()
        bool resp_closed_local = false;
        uint64_t timeout_timer = 0;
    };

    struct Event {
        SimTime time = 0;
        uint64_t seq = 0;
        std::function<void()> fn;
        bool cancelled = false;
    };

    struct EventCmp {
        bool operator()(const std::shared_ptr<Event>& a, const std::shared_ptr<Event>& b) const {
            if (a->time != b->time) return a->time > b->time;
            return a->seq > b->seq;
        }
    };

    Node& node(const std::string& name);
    const Node& node(const std::string& name) const;
    SimTime path_latency(const std::string& a, const std::string& b);
    bool node_down(const std::string& n) const;
    void transmit(Packet pkt);  // egress processing + scheduling
    void arrive(Packet pkt);    // ingress processing + delivery
    void drop(const Packet& pkt, DropReason reason);
    void break_conn(ConnId id, CloseReason reason);
    NatBinding& ensure_binding(Node& n, uint16_t port);
    void fire_fault(const Fault& f);
    ConnHandlers& handlers_for(Conn& c, bool initiator_side);

    SimTime now_ = 0;
    uint64_t next_event_seq_ = 1;
    uint64_t next_conn_id_ = 1;
    std::mt19937_64 rng_;
    EventLog log_;

    std::map<std::string, Node> nodes_;
    std::vector<NatDevice> nats_;
    std::map<std::string, int> host_to_nat_;  // ext host (incl. retired) -> nat index
    std::map<std::string, std::map<std::string, SimTime>> links_;
    std::map<std::pair<std::string, std::string>, SimTime> latency_cache_;

    std::priority_queue<std::shared_ptr<Event>, std::vector<std::shared_ptr<Event>>, EventCmp>
        events_;
    std::map<uint64_t, std::shared_ptr<Event>> timers_;

    std::map<std::pair<std::string, uint16_t>, AcceptFn> listeners_;
    std::map<ConnId, Conn> conns_;

    uint64_t drop_next_ = 0;
    std::optional<std::pair<size_t, uint8_t>> relay_tamper_;
    std::map<std::string, SimTime> down_until_;
    std::map<std::string, std::function<void(FaultKind)>> fault_hooks_;

    Counters counters_;
    uint64_t in_flight_ = 0;
};

}  // namespace asia::netsim

#endif
