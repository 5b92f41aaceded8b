#include "karakasa/cluster.hpp"

#include <algorithm>
#include <utility>

namespace karakasa {

namespace {

std::shared_ptr<const HeaderChain> chain_append(const std::shared_ptr<const HeaderChain>& base,
                                                const BlockHeader& h) {
    auto next = base ? std::make_shared<HeaderChain>(*base) : std::make_shared<HeaderChain>();
    Hash256 id = hash_header(h);
    next->height_of[id] = next->ids.size();
    next->headers.push_back(h);
    next->ids.push_back(id);
    return next;
}

std::shared_ptr<const HeaderChain> chain_from_blocks(const std::vector<Block>& blocks) {
    auto hc = std::make_shared<HeaderChain>();
    hc->headers.reserve(blocks.size());
    hc->ids.reserve(blocks.size());
    for (const auto& b : blocks) {
        Hash256 id = b.id();
        hc->height_of[id] = hc->ids.size();
        hc->headers.push_back(b.header);
        hc->ids.push_back(id);
    }
    return hc;
}

bool merkle_consistent(const Block& b) {
    if (b.placement_only()) return true;
    std::vector<Hash256> txids;
    txids.reserve(b.txs.size());
    for (const auto& t : b.txs) txids.push_back(t.txid());
    return merkle_root(txids) == b.header.hash_merkle_root;
}

// Sum of 2^bits over a header range; the shift is clamped so a hostile bits
// field cannot overflow the accumulator.
unsigned __int128 difficulty_sum(const std::vector<BlockHeader>& headers, std::size_t from) {
    unsigned __int128 d = 0;
    for (std::size_t i = from; i < headers.size(); ++i)
        d += static_cast<unsigned __int128>(1) << std::min<std::uint64_t>(headers[i].bits, 100);
    return d;
}

unsigned __int128 difficulty_sum(const std::vector<Block>& blocks) {
    unsigned __int128 d = 0;
    for (const auto& b : blocks)
        d += static_cast<unsigned __int128>(1) << std::min<std::uint64_t>(b.header.bits, 100);
    return d;
}

} // namespace

const UtxoSet& NodeState::utxoset() const {
    static const UtxoSet empty;
    return utxo ? *utxo : empty;
}

bool copy_verifies(const StoredCopy& copy, const Hash256& id) {
    auto b = Block::deserialize(copy.bytes);
    return b && b->id() == id && merkle_consistent(*b);
}

RingId block_key(const Block& b, unsigned m) { return ring_id(b.id(), m); }

Cluster::Cluster(ClusterOptions opt, std::vector<std::uint8_t> key)
    : opt_(opt), key_(std::move(key)), ring_(opt.m, opt.suc) {}

Cluster Cluster::bootstrap(const std::vector<Block>& chain, const std::string& address,
                           std::vector<std::uint8_t> cluster_key, ClusterOptions opt) {
    auto verdict = verify_chain(chain);
    if (!verdict.ok())
        throw InvalidChain("bootstrap: chain invalid at height " + std::to_string(verdict.height));
    Cluster c(opt, std::move(cluster_key));
    RingId id = c.admit(std::nullopt, address, c.key_);
    c.stabilize_and_repair();
    for (const auto& b : chain) c.place_copies(b);
    auto& n = c.nodes_.at(id);
    n.state.chain = chain_from_blocks(chain);
    n.state.utxo = std::make_shared<UtxoSet>(build_utxoset(chain));
    return c;
}

Cluster Cluster::build(const std::vector<Block>& chain, const std::vector<std::string>& addresses,
                       std::vector<std::uint8_t> cluster_key, ClusterOptions opt) {
    auto verdict = verify_chain(chain);
    if (!verdict.ok())
        throw InvalidChain("build: chain invalid at height " + std::to_string(verdict.height));
    if (addresses.empty()) throw InvalidParams("build: no addresses");
    Cluster c(opt, std::move(cluster_key));
    for (const auto& a : addresses) c.admit(std::nullopt, a, c.key_);
    c.stabilize_and_repair();
    for (const auto& b : chain) c.place_copies(b);
    // every member carries the same header chain; the replayed set is shared
    // and copied only if a node later diverges
    auto hc = chain_from_blocks(chain);
    auto ut = std::make_shared<UtxoSet>(build_utxoset(chain));
    for (auto& [id, n] : c.nodes_) {
        n.state.chain = hc;
        n.state.utxo = ut;
    }
    return c;
}

RingId Cluster::admit(std::optional<RingId> forced_id, const std::string& address,
                      std::span<const std::uint8_t> presented_key) {
    if (presented_key.size() != key_.size() ||
        !std::equal(presented_key.begin(), presented_key.end(), key_.begin()))
        throw JoinRejected("cluster key mismatch for " + address);
    RingId id = forced_id ? *forced_id
                          : ring_id(std::span(reinterpret_cast<const std::uint8_t*>(address.data()),
                                              address.size()),
                                    opt_.m);
    ring_.join(id); // IdCollision propagates with the cluster unchanged
    nodes_[id] = ClusterNode{address, {}, {}};
    return id;
}

Cluster::JoinStats Cluster::join(const std::string& address,
                                 std::span<const std::uint8_t> presented_key) {
    RingId id = admit(std::nullopt, address, presented_key);
    stabilize_and_repair();
    return {id, rebuild_state(id)};
}

Cluster::JoinStats Cluster::join_with_id(RingId id, const std::string& address,
                                         std::span<const std::uint8_t> presented_key) {
    RingId got = admit(id, address, presented_key);
    stabilize_and_repair();
    return {got, rebuild_state(got)};
}

void Cluster::leave(const RingId& node_id) {
    ring_.leave(node_id); // UnknownNode propagates
    auto handoff = std::move(nodes_.at(node_id).store);
    nodes_.erase(node_id);
    if (nodes_.empty()) return;
    // graceful departure: the leaver pushes each held copy to whichever new
    // placement members lack it, so even unreplicated shards survive
    for (auto& [key, copy] : handoff) {
        for (const RingId& w : placement_set(key)) {
            auto& store = nodes_.at(w).store;
            if (!store.count(key)) {
                store[key] = copy;
                trace_.transfers += 1;
            }
        }
    }
    stabilize_and_repair();
}

RingId Cluster::block_ring_key(const Hash256& id) const { return ring_id(id, opt_.m); }

std::vector<RingId> Cluster::placement_set(const RingId& key) const {
    unsigned r = opt_.replicas;
    if (ring_.size() > 0) r = std::min<unsigned>(r, static_cast<unsigned>(ring_.size()) - 1);
    r = std::min(r, ring_.suc());
    return ring_.replica_set(key, r);
}

void Cluster::place_copies(const Block& b) {
    RingId key = block_key(b, opt_.m);
    StoredCopy copy{b.serialize(), b.nominal_size};
    for (const RingId& w : placement_set(key)) nodes_.at(w).store[key] = copy;
}

void Cluster::stabilize_and_repair() {
    trace_.stabilize += ring_.stabilize();
    if (nodes_.empty()) return;

    // union of every stored shard; prefer a holder whose copy is internally
    // consistent so tampered bytes are not what repair spreads around
    auto source_ok = [this](const StoredCopy& c, const RingId& key) {
        auto b = Block::deserialize(c.bytes);
        return b && ring_id(b->id(), opt_.m) == key && merkle_consistent(*b);
    };
    std::map<RingId, const StoredCopy*> have;
    for (const auto& [nid, node] : nodes_)
        for (const auto& [key, copy] : node.store) {
            auto [it, fresh] = have.try_emplace(key, &copy);
            if (!fresh && !source_ok(*it->second, key) && source_ok(copy, key))
                it->second = &copy;
        }

    const ClusterNode* ref = best_peer(std::nullopt);
    if (ref && ref->state.chain)
        for (const Hash256& id : ref->state.chain->ids)
            if (!have.count(block_ring_key(id)))
                throw Error("shard lost from every node: " + id.hex());

    std::map<RingId, std::vector<RingId>> wants;
    for (const auto& [key, copy] : have) {
        auto want = placement_set(key);
        for (const RingId& w : want) {
            auto& store = nodes_.at(w).store;
            if (!store.count(key)) {
                store[key] = *copy;
                trace_.transfers += 1;
            }
        }
        wants.emplace(key, std::move(want));
    }
    for (auto& [nid, node] : nodes_)
        for (auto it = node.store.begin(); it != node.store.end();) {
            const auto& want = wants.at(it->first);
            if (std::find(want.begin(), want.end(), nid) == want.end())
                it = node.store.erase(it);
            else
                ++it;
        }
}

const ClusterNode* Cluster::best_peer(const std::optional<RingId>& exclude) const {
    const ClusterNode* best = nullptr;
    for (const auto& [id, n] : nodes_) {
        if (exclude && id == *exclude) continue;
        if (!best || n.state.height() > best->state.height()) best = &n;
    }
    return best;
}

std::uint64_t Cluster::rebuild_state(const RingId& id) {
    auto& me = nodes_.at(id);
    const ClusterNode* ref = best_peer(id);
    if (!ref || !ref->state.chain) {
        me.state.chain = std::make_shared<HeaderChain>();
        me.state.utxo = std::make_shared<UtxoSet>();
        return 0;
    }
    me.state.chain = ref->state.chain;
    std::uint64_t msgs = 0;
    UtxoSet u;
    for (std::uint64_t h = 0; h < me.state.chain->size(); ++h) {
        GetResult gr = get_block(id, me.state.chain->ids[h]);
        msgs += gr.messages;
        if (!gr.ok()) throw Error("join: fetch failed at height " + std::to_string(h));
        if (apply_block(u, gr.block)) throw Error("join: replay failed at height " + std::to_string(h));
    }
    me.state.utxo = std::make_shared<UtxoSet>(std::move(u));
    return msgs;
}

GetResult Cluster::get_block(const RingId& requester, const Hash256& id) {
    RingId key = block_ring_key(id);
    LookupResult lr = ring_.lookup(requester, key);
    trace_.lookup_hops += lr.hops;

    GetResult res;
    res.messages = lr.hops;
    bool any_copy = false;
    for (const RingId& holder : placement_set(key)) {
        auto it = nodes_.at(holder).store.find(key);
        if (it == nodes_.at(holder).store.end()) continue;
        any_copy = true;
        res.attempts += 1;
        res.messages += 1; // one transfer per attempt, verified or not
        trace_.transfers += 1;
        auto b = Block::deserialize(it->second.bytes);
        if (b && b->id() == id && merkle_consistent(*b)) {
            b->nominal_size = it->second.nominal_size;
            res.status = GetStatus::ok;
            res.block = std::move(*b);
            return res;
        }
    }
    res.status = any_copy ? GetStatus::all_replicas_corrupt : GetStatus::not_found;
    return res;
}

std::uint64_t Cluster::store_block(const RingId& origin, const Block& block) {
    RingId key = block_key(block, opt_.m);
    auto want = ring_.replica_set(key, opt_.replicas); // NotEnoughNodes propagates
    LookupResult lr = ring_.lookup(origin, key);
    trace_.lookup_hops += lr.hops;
    StoredCopy copy{block.serialize(), block.nominal_size};
    for (const RingId& w : want) nodes_.at(w).store[key] = copy;
    trace_.transfers += want.size();
    return lr.hops + want.size();
}

ReceiveResult Cluster::receive_new_block(const RingId& node_id, const Block& block) {
    ClusterNode& n = node(node_id);
    ReceiveResult res;

    Hash256 id = block.id();
    if (!meets_target(id, block.header.bits)) {
        res.cause = RejectCause::bad_pow;
        return res;
    }
    const Hash256& prev = block.header.hash_prev_block;
    if (n.state.chain && prev == n.state.tip()) {
        if (!merkle_consistent(block)) {
            res.cause = RejectCause::bad_merkle;
            return res;
        }
        UtxoSet u = n.state.utxoset();
        if (apply_block(u, block)) {
            res.cause = RejectCause::bad_tx;
            return res;
        }
        n.state.chain = chain_append(n.state.chain, block.header);
        n.state.utxo = std::make_shared<UtxoSet>(std::move(u));
        // the first node to accept a broadcast block places the copies;
        // later recipients find the primary already holding it
        RingId key = block_ring_key(id);
        if (!nodes_.at(placement_set(key).front()).store.count(key))
            res.messages = store_block(node_id, block);
        res.status = ReceiveStatus::accepted;
        return res;
    }
    if (n.state.chain && n.state.chain->height_of.count(prev)) {
        res.status = ReceiveStatus::forked;
        res.fork = resolve_fork(node_id, block);
        res.messages = res.fork.messages;
        return res;
    }
    res.cause = RejectCause::unknown_parent;
    return res;
}

ForkResult Cluster::resolve_fork(const RingId& node_id, const Block& branch_tip) {
    ClusterNode& n = node(node_id);
    ForkResult res;
    if (!n.state.chain || n.state.chain->ids.empty()) {
        res.outcome = ForkOutcome::orphan;
        return res;
    }
    const HeaderChain& cur = *n.state.chain;

    // walk prev links back to a block this node knows; each step is a
    // storage fetch and is charged like any other get
    std::vector<Block> branch{branch_tip};
    Hash256 cursor = branch_tip.header.hash_prev_block;
    while (!cur.height_of.count(cursor)) {
        if (cursor.is_zero() || branch.size() > cur.size() + 1) {
            res.outcome = ForkOutcome::orphan;
            return res;
        }
        GetResult gr = get_block(node_id, cursor);
        res.messages += gr.messages;
        if (gr.status == GetStatus::all_replicas_corrupt) {
            res.outcome = ForkOutcome::fetch_failed;
            return res;
        }
        if (!gr.ok() || !meets_target(gr.block.id(), gr.block.header.bits)) {
            res.outcome = ForkOutcome::orphan;
            return res;
        }
        cursor = gr.block.header.hash_prev_block;
        branch.push_back(std::move(gr.block));
    }

    std::uint64_t fork_h = cur.height_of.at(cursor);
    unsigned __int128 incumbent = difficulty_sum(cur.headers, fork_h + 1);
    unsigned __int128 challenger = difficulty_sum(branch);
    if (challenger <= incumbent) { // ties keep the current chain
        res.outcome = ForkOutcome::keep_current;
        return res;
    }

    std::vector<Block> blocks;
    blocks.reserve(fork_h + 1 + branch.size());
    for (std::uint64_t h = 0; h <= fork_h; ++h) {
        GetResult gr = get_block(node_id, cur.ids[h]);
        res.messages += gr.messages;
        if (gr.status == GetStatus::all_replicas_corrupt) {
            res.outcome = ForkOutcome::fetch_failed;
            return res;
        }
        if (!gr.ok()) {
            res.outcome = ForkOutcome::fetch_failed;
            return res;
        }
        blocks.push_back(std::move(gr.block));
    }
    for (auto it = branch.rbegin(); it != branch.rend(); ++it) blocks.push_back(std::move(*it));

    // full replay from scratch; a heavier branch that fails validation is
    // discarded rather than adopted
    if (!verify_chain(blocks).ok()) {
        res.outcome = ForkOutcome::orphan;
        return res;
    }
    n.state.chain = chain_from_blocks(blocks);
    n.state.utxo = std::make_shared<UtxoSet>(build_utxoset(blocks));

    RingId tip_key = block_ring_key(branch_tip.id());
    if (!nodes_.at(placement_set(tip_key).front()).store.count(tip_key))
        res.messages += store_block(node_id, branch_tip);
    res.outcome = ForkOutcome::switched;
    return res;
}

ClusterNode& Cluster::node(const RingId& id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw UnknownNode("no such cluster node");
    return it->second;
}

const ClusterNode& Cluster::node(const RingId& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw UnknownNode("no such cluster node");
    return it->second;
}

std::string Cluster::snapshot() const {
    std::string out = "cluster n=" + std::to_string(nodes_.size()) +
                      " m=" + std::to_string(opt_.m) + " r=" + std::to_string(opt_.replicas) +
                      " mode=" + (opt_.mode == BlockMode::full ? "full" : "placement") + "\n";
    for (const auto& [id, n] : nodes_) {
        out += "node " + id.str(opt_.m) + " addr=" + n.address +
               " shards=" + std::to_string(n.store.size()) +
               " height=" + std::to_string(n.state.height()) +
               " tip=" + n.state.tip().hex().substr(0, 16) + "\n";
    }
    return out;
}

} // namespace karakasa
