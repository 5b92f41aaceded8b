#include "karakasa/chord.hpp"

#include <algorithm>
#include <sstream>

namespace karakasa {

namespace {

RingId shift_right(const RingId& a, unsigned s) {
    RingId out;
    unsigned limb = s / 64, bit = s % 64;
    for (unsigned k = 0; k < 3; ++k) {
        std::uint64_t v = 0;
        if (k + limb < 3) v = a.w[k + limb] >> bit;
        if (bit && k + limb + 1 < 3) v |= a.w[k + limb + 1] << (64 - bit);
        out.w[k] = v;
    }
    return out;
}

RingId mask_to_m(RingId a, unsigned m) {
    for (unsigned k = 0; k < 3; ++k) {
        unsigned lo = 64 * k;
        if (m <= lo)
            a.w[k] = 0;
        else if (m - lo < 64)
            a.w[k] &= (std::uint64_t(1) << (m - lo)) - 1;
    }
    return a;
}

} // namespace

std::string RingId::str(unsigned m) const {
    static const char* digits = "0123456789abcdef";
    unsigned width = (m + 3) / 4;
    std::string s(width, '0');
    for (unsigned i = 0; i < width; ++i) {
        unsigned nib = width - 1 - i; // nibble index from the low end
        s[i] = digits[(w[nib / 16] >> (4 * (nib % 16))) & 15];
    }
    return s;
}

RingId ring_id(std::span<const std::uint8_t> bytes, unsigned m) {
    if (m < 1 || m > 160) throw BadM("ring_id: m must be in [1, 160]");
    Hash256 d = sha256(bytes);
    RingId v;
    // First 24 digest bytes as a big-endian 192-bit value, then keep the top m bits.
    for (unsigned k = 0; k < 3; ++k) {
        std::uint64_t limb = 0;
        for (unsigned b = 0; b < 8; ++b) limb = limb << 8 | d.bytes[8 * (2 - k) + b];
        v.w[k] = limb;
    }
    return shift_right(v, 192 - m);
}

RingId ring_id(const Hash256& h, unsigned m) {
    return ring_id(std::span<const std::uint8_t>(h.bytes), m);
}

RingId ring_add_pow2(RingId a, unsigned k, unsigned m) {
    unsigned limb = k / 64, bit = k % 64;
    std::uint64_t add = std::uint64_t(1) << bit;
    for (unsigned i = limb; i < 3; ++i) {
        std::uint64_t before = a.w[i];
        a.w[i] += add;
        if (a.w[i] >= before) break; // no carry
        add = 1;
    }
    return mask_to_m(a, m);
}

bool in_interval_oc(const RingId& x, const RingId& a, const RingId& b) {
    if (a == b) return true;
    if (a < b) return a < x && x <= b;
    return x > a || x <= b;
}

bool in_interval_oo(const RingId& x, const RingId& a, const RingId& b) {
    if (a == b) return x != a;
    if (a < b) return a < x && x < b;
    return x > a || x < b;
}

Ring::Ring(unsigned m, unsigned suc) : m_(m), suc_(std::max(1u, suc)) {
    if (m < 1 || m > 160) throw BadM("Ring: m must be in [1, 160]");
}

bool Ring::contains(const RingId& id) const {
    return std::binary_search(ids_.begin(), ids_.end(), id);
}

void Ring::join(RingId id) {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it != ids_.end() && *it == id) throw IdCollision("join: node id already on ring");
    ids_.insert(it, id);
    tables_[id] = {};
    stabilized_ = false;
}

void Ring::leave(RingId id) {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) throw UnknownNode("leave: node id not on ring");
    ids_.erase(it);
    tables_.erase(id);
    stabilized_ = false;
}

RingId Ring::successor_of(const RingId& key) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), key);
    return it == ids_.end() ? ids_.front() : *it;
}

RingId Ring::responsible(const RingId& key) const {
    if (ids_.empty()) throw EmptyRing("responsible: ring has no nodes");
    return successor_of(key);
}

std::vector<RingId> Ring::replica_set(const RingId& key, unsigned r) const {
    if (ids_.empty()) throw EmptyRing("replica_set: ring has no nodes");
    if (r > suc_) throw NotEnoughNodes("replica_set: r exceeds successor list length");
    if (std::size_t(r) + 1 > ids_.size())
        throw NotEnoughNodes("replica_set: fewer than r+1 nodes on ring");
    std::vector<RingId> out;
    out.reserve(r + 1);
    auto it = std::lower_bound(ids_.begin(), ids_.end(), key);
    std::size_t i = (it == ids_.end()) ? 0 : std::size_t(it - ids_.begin());
    for (unsigned k = 0; k <= r; ++k) out.push_back(ids_[(i + k) % ids_.size()]);
    return out;
}

RoutingTable Ring::ground_truth(std::size_t index) const {
    RoutingTable t;
    std::size_t n = ids_.size();
    const RingId& self = ids_[index];
    if (n == 1) {
        t.successors = {self};
        t.predecessor = self;
    } else {
        std::size_t count = std::min<std::size_t>(suc_, n - 1);
        t.successors.reserve(count);
        for (std::size_t k = 1; k <= count; ++k) t.successors.push_back(ids_[(index + k) % n]);
        t.predecessor = ids_[(index + n - 1) % n];
    }
    t.fingers.reserve(m_);
    for (unsigned k = 0; k < m_; ++k)
        t.fingers.push_back(successor_of(ring_add_pow2(self, k, m_)));
    return t;
}

std::uint64_t Ring::stabilize() {
    std::uint64_t changed = 0;
    auto count_vec = [&](const std::vector<RingId>& a, const std::vector<RingId>& b) {
        std::size_t hi = std::max(a.size(), b.size());
        for (std::size_t i = 0; i < hi; ++i)
            if (i >= a.size() || i >= b.size() || a[i] != b[i]) ++changed;
    };
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        RoutingTable want = ground_truth(i);
        RoutingTable& cur = tables_[ids_[i]];
        count_vec(cur.successors, want.successors);
        count_vec(cur.fingers, want.fingers);
        if (cur.predecessor != want.predecessor) ++changed;
        cur = std::move(want);
    }
    stabilized_ = true;
    return changed;
}

const RoutingTable& Ring::table(const RingId& id) const {
    auto it = tables_.find(id);
    if (it == tables_.end()) throw UnknownNode("table: node id not on ring");
    return it->second;
}

RingId Ring::closest_preceding(const RoutingTable& t, const RingId& self,
                               const RingId& key) const {
    RingId best = self;
    for (auto it = t.fingers.rbegin(); it != t.fingers.rend(); ++it) {
        if (in_interval_oo(*it, best, key) && in_interval_oo(*it, self, key)) {
            best = *it;
            break; // fingers are scanned longest jump first
        }
    }
    for (const auto& s : t.successors)
        if (in_interval_oo(s, best, key) && in_interval_oo(s, self, key)) best = s;
    return best;
}

LookupResult Ring::lookup(const RingId& origin, const RingId& key) const {
    if (ids_.empty()) throw EmptyRing("lookup: ring has no nodes");
    if (!stabilized_) throw NotStabilized("lookup: ring has stale routing tables");
    auto ot = tables_.find(origin);
    if (ot == tables_.end()) throw UnknownNode("lookup: origin not on ring");

    if (ids_.size() == 1) return {origin, 0};
    if (in_interval_oc(key, *ot->second.predecessor, origin)) return {origin, 0};

    RingId cur = origin;
    std::uint64_t hops = 0;
    while (true) {
        const RoutingTable& t = tables_.at(cur);
        const RingId& succ = t.successors.front();
        if (in_interval_oc(key, cur, succ)) return {succ, hops};
        RingId next = closest_preceding(t, cur, key);
        if (next == cur) return {succ, hops}; // defensive; unreachable on a stable ring
        cur = next;
        hops += 1; // one routing query per node consulted
    }
}

std::string Ring::snapshot() const {
    std::ostringstream os;
    os << "ring m=" << m_ << " suc=" << suc_ << " nodes=" << ids_.size()
       << (stabilized_ ? "" : " (stale)") << "\n";
    for (const auto& id : ids_) {
        const RoutingTable& t = tables_.at(id);
        os << "node " << id.str(m_) << " pred=";
        os << (t.predecessor ? t.predecessor->str(m_) : std::string("-"));
        os << " succ=[";
        for (std::size_t i = 0; i < t.successors.size(); ++i)
            os << (i ? "," : "") << t.successors[i].str(m_);
        os << "] fingers=";
        // Run-compressed: consecutive finger slots holding the same node fold together.
        for (std::size_t i = 0; i < t.fingers.size();) {
            std::size_t j = i;
            while (j + 1 < t.fingers.size() && t.fingers[j + 1] == t.fingers[i]) ++j;
            if (i) os << " ";
            if (i == j)
                os << "[" << i << "]=" << t.fingers[i].str(m_);
            else
                os << "[" << i << ".." << j << "]=" << t.fingers[i].str(m_);
            i = j + 1;
        }
        os << "\n";
    }
    return os.str();
}

} // namespace karakasa
