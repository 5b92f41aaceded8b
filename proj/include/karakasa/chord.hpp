#pragma once

#include "karakasa/hash.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace karakasa {

struct BadM : Error {
    using Error::Error;
};
struct EmptyRing : Error {
    using Error::Error;
};
struct NotEnoughNodes : Error {
    using Error::Error;
};
struct NotStabilized : Error {
    using Error::Error;
};
struct IdCollision : Error {
    using Error::Error;
};
struct UnknownNode : Error {
    using Error::Error;
};

// Point on the m-bit identifier circle, 1 <= m <= 160. Stored as three
// little-endian 64-bit limbs; values are always reduced mod 2^m.
struct RingId {
    std::array<std::uint64_t, 3> w{};

    friend bool operator==(const RingId&, const RingId&) = default;
    friend std::strong_ordering operator<=>(const RingId& a, const RingId& b) {
        for (int i = 2; i >= 0; --i)
            if (auto c = a.w[i] <=> b.w[i]; c != 0) return c;
        return std::strong_ordering::equal;
    }

    static RingId from_u64(std::uint64_t v) { return RingId{{v, 0, 0}}; }
    std::string str(unsigned m) const; // zero-padded hex, ceil(m/4) digits
};

// Top m bits of SHA-256(bytes), read big-endian. Throws BadM outside [1,160].
RingId ring_id(std::span<const std::uint8_t> bytes, unsigned m);
RingId ring_id(const Hash256& h, unsigned m);

RingId ring_add_pow2(RingId a, unsigned k, unsigned m); // a + 2^k mod 2^m

// Clockwise interval membership. An empty-looking interval (a == b) spans the
// whole circle: (a, a] contains everything, (a, a) everything but a.
bool in_interval_oc(const RingId& x, const RingId& a, const RingId& b);
bool in_interval_oo(const RingId& x, const RingId& a, const RingId& b);

struct RoutingTable {
    std::vector<RingId> successors;    // next distinct nodes clockwise, <= Suc of them
    std::optional<RingId> predecessor; // previous node clockwise; self when alone
    std::vector<RingId> fingers;       // fingers[i] = first node at or after self + 2^i

    friend bool operator==(const RoutingTable&, const RoutingTable&) = default;
};

struct LookupResult {
    RingId owner;
    std::uint64_t hops = 0;
};

// Global-view ring simulation. Joins and leaves only edit membership; tables
// go stale until stabilize() rebuilds them, and lookup refuses to route on a
// stale ring. A node owns the half-open arc (predecessor, self].
//
// Message accounting: lookup is iterative; every remote node consulted costs
// one routing query message, and reading the origin's own table is free. hops
// as returned by lookup is that query count (0 when the origin already owns
// the key). stabilize() charges 1 message per table entry whose value
// actually changed.
class Ring {
  public:
    Ring(unsigned m, unsigned suc);

    unsigned m() const { return m_; }
    unsigned suc() const { return suc_; }
    std::size_t size() const { return ids_.size(); }
    bool contains(const RingId& id) const;
    const std::vector<RingId>& ids() const { return ids_; } // ascending

    void join(RingId id);  // IdCollision if already present
    void leave(RingId id); // UnknownNode if absent

    // Rebuilds every routing table to ground truth; returns messages charged.
    std::uint64_t stabilize();
    bool stabilized() const { return stabilized_; }

    RingId responsible(const RingId& key) const; // EmptyRing on empty ring

    // Primary owner plus r distinct clockwise successors, primary first.
    // NotEnoughNodes unless r <= suc and r + 1 <= ring size.
    std::vector<RingId> replica_set(const RingId& key, unsigned r) const;

    LookupResult lookup(const RingId& origin, const RingId& key) const;

    const RoutingTable& table(const RingId& id) const;
    std::string snapshot() const;

  private:
    RingId successor_of(const RingId& key) const;
    RoutingTable ground_truth(std::size_t index) const;
    RingId closest_preceding(const RoutingTable& t, const RingId& self, const RingId& key) const;

    unsigned m_;
    unsigned suc_;
    std::vector<RingId> ids_;
    std::map<RingId, RoutingTable> tables_;
    bool stabilized_ = true;
};

} // namespace karakasa
