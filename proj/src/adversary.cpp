#include "karakasa/adversary.hpp"

#include <algorithm>
#include <set>

namespace karakasa {

namespace {

std::uint32_t rd_u32(const std::vector<std::uint8_t>& v, std::size_t off) {
    return std::uint32_t(v[off]) | std::uint32_t(v[off + 1]) << 8 |
           std::uint32_t(v[off + 2]) << 16 | std::uint32_t(v[off + 3]) << 24;
}

std::uint64_t rd_u64(const std::vector<std::uint8_t>& v, std::size_t off) {
    std::uint64_t x = 0;
    for (int i = 7; i >= 0; --i) x = x << 8 | v[off + i];
    return x;
}

// byte range of each transaction inside canonical block bytes
std::vector<std::pair<std::size_t, std::size_t>> tx_spans(const std::vector<std::uint8_t>& bytes) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    if (bytes.size() < 84) return spans;
    std::size_t off = 80;
    std::uint32_t count = rd_u32(bytes, off);
    off += 4;
    for (std::uint32_t t = 0; t < count; ++t) {
        if (off + 4 > bytes.size()) return {};
        std::uint32_t len = rd_u32(bytes, off);
        off += 4;
        if (off + len > bytes.size()) return {};
        spans.emplace_back(off, len);
        off += len;
    }
    return spans;
}

std::vector<std::uint8_t> canonical_bytes(Cluster& c, const Hash256& id) {
    RingId key = c.block_ring_key(id);
    for (const RingId& holder : c.placement_set(key)) {
        const auto& store = c.node(holder).store;
        auto it = store.find(key);
        if (it != store.end() && copy_verifies(it->second, id)) return it->second.bytes;
    }
    throw TargetNotFound("no intact copy of " + id.hex());
}

} // namespace

void tamper_block(Cluster& cluster, const RingId& node, const Hash256& id, const Mutation& mut) {
    RingId key = cluster.block_ring_key(id);
    auto& store = cluster.node(node).store;
    auto it = store.find(key);
    if (it == store.end()) throw NoCopyHeld("node holds no copy of " + id.hex());
    auto& bytes = it->second.bytes;
    bytes[mut.offset % bytes.size()] ^= mut.xor_mask;
}

CampaignReport rewrite_campaign(Cluster& cluster, const AttackPlan& plan) {
    std::set<RingId> compromised(plan.compromised.begin(), plan.compromised.end());
    for (const RingId& n : compromised) cluster.node(n); // membership check

    const HeaderChain* chain = nullptr;
    for (const auto& [id, n] : cluster.nodes())
        if (n.state.chain && (!chain || n.state.chain->size() > chain->size()))
            chain = n.state.chain.get();
    if (!chain || plan.target_height >= chain->size())
        throw TargetNotFound("no block at target height");

    std::uint64_t height = chain->size();
    CampaignReport rep;
    rep.stacked = height - 1 - plan.target_height;
    unsigned r = cluster.options().replicas;
    rep.blocks_required = std::uint64_t(r + 1) * (rep.stacked + 1);
    rep.blocks_required_stacked_only = std::uint64_t(r + 1) * rep.stacked;

    std::vector<Hash256> affected(chain->ids.begin() + plan.target_height, chain->ids.end());
    for (const Hash256& id : affected) {
        RingId key = cluster.block_ring_key(id);
        for (const RingId& holder : cluster.placement_set(key))
            if (cluster.node(holder).store.count(key)) rep.total_copies += 1;
    }

    std::vector<std::uint8_t> target = canonical_bytes(cluster, affected.front());
    if (plan.target_tx >= tx_spans(target).size())
        throw TargetNotFound("no transaction at target position");

    if (plan.mutation.xor_mask == 0 || compromised.empty()) {
        // identity edit, or nobody to act: byte-for-byte nothing changes
        rep.detected = true;
        rep.via = DetectionVia::nothing_rewritten;
        return rep;
    }

    // forge the branch: splice the edit into the target transaction, then
    // re-derive merkle roots, re-link prev hashes, and re-mine every header
    Hash256 prev{};
    for (std::size_t i = 0; i < affected.size(); ++i) {
        std::vector<std::uint8_t> bytes =
            i == 0 ? std::move(target) : canonical_bytes(cluster, affected[i]);
        auto spans = tx_spans(bytes);
        if (i == 0) {
            auto [start, len] = spans[plan.target_tx];
            bytes[start + plan.mutation.offset % len] ^= plan.mutation.xor_mask;
        }
        std::vector<Hash256> txids;
        txids.reserve(spans.size());
        for (auto [start, len] : spans)
            txids.push_back(sha256(std::span(bytes.data() + start, len)));

        BlockHeader h;
        if (i == 0)
            std::copy_n(bytes.begin(), 32, h.hash_prev_block.bytes.begin());
        else
            h.hash_prev_block = prev;
        h.hash_merkle_root = merkle_root(txids);
        h.bits = rd_u64(bytes, 64);
        mine_header(h);
        auto hb = h.serialize();
        std::copy(hb.begin(), hb.end(), bytes.begin());

        prev = hash_header(h);
        rep.rewritten_headers.push_back(h);
        rep.rewritten_ids.push_back(prev);
        rep.rewritten_bytes.push_back(std::move(bytes));
    }

    // overwrite what the compromised set holds; the storage keys stay put
    for (std::size_t i = 0; i < affected.size(); ++i) {
        RingId key = cluster.block_ring_key(affected[i]);
        for (const RingId& holder : cluster.placement_set(key)) {
            if (!compromised.count(holder)) continue;
            auto& store = cluster.node(holder).store;
            auto it = store.find(key);
            if (it == store.end()) continue;
            it->second.bytes = rep.rewritten_bytes[i];
            rep.copies_reached += 1;
        }
    }
    rep.fully_consistent = rep.copies_reached == rep.total_copies && rep.copies_reached > 0;

    if (rep.copies_reached == 0) {
        rep.detected = true;
        rep.via = DetectionVia::nothing_rewritten;
        return rep;
    }
    if (!rep.fully_consistent) {
        // honest audit: check every copy of every affected block against the
        // id the chain says should live under that key
        bool bad_copy = false;
        for (const Hash256& id : affected) {
            RingId key = cluster.block_ring_key(id);
            for (const RingId& holder : cluster.placement_set(key)) {
                const auto& store = cluster.node(holder).store;
                auto it = store.find(key);
                if (it != store.end() && !copy_verifies(it->second, id)) bad_copy = true;
            }
        }
        rep.detected = bad_copy;
        rep.via = DetectionVia::hash_check;
        return rep;
    }

    // every copy rewritten: an honest verifier that knows the true tip treats
    // the forged branch as a fork at the target's parent, and the incumbent
    // survives unless the challenger's cumulative difficulty is strictly larger
    unsigned __int128 incumbent = 0, challenger = 0;
    for (std::uint64_t hgt = plan.target_height; hgt < height; ++hgt)
        incumbent += static_cast<unsigned __int128>(1)
                     << std::min<std::uint64_t>(chain->headers[hgt].bits, 100);
    for (const BlockHeader& h : rep.rewritten_headers)
        challenger += static_cast<unsigned __int128>(1)
                      << std::min<std::uint64_t>(h.bits, 100);
    rep.detected = challenger <= incumbent;
    rep.via = DetectionVia::fork_rule;
    return rep;
}

} // namespace karakasa
