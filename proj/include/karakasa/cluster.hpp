#pragma once

#include "karakasa/chain.hpp"
#include "karakasa/chord.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace karakasa {

struct InvalidChain : Error {
    using Error::Error;
};
struct JoinRejected : Error {
    using Error::Error;
};

enum class BlockMode { full, placement };

struct ClusterOptions {
    unsigned m = 64;
    unsigned suc = 8;
    unsigned replicas = 0; // R extra copies beyond the primary
    BlockMode mode = BlockMode::full;
};

// One node's stored view of a block: the canonical block bytes (header alone
// for placement-only blocks). Every byte is covered by the integrity check in
// get_block, so any stored-byte mutation is detectable. The nominal size is
// bookkeeping, not part of the tamper surface.
struct StoredCopy {
    std::vector<std::uint8_t> bytes;
    std::uint64_t nominal_size = 0;
};

bool copy_verifies(const StoredCopy& copy, const Hash256& id);

// The header chain every honest node carries (the per-node lightweight index:
// height -> header/id). Immutable and shared between nodes that agree on the
// chain, so big experiment clusters don't hold a thousand identical copies.
struct HeaderChain {
    std::vector<BlockHeader> headers;
    std::vector<Hash256> ids; // ids[h] = hash_header(headers[h])
    std::map<Hash256, std::uint64_t> height_of;

    std::uint64_t size() const { return ids.size(); }
    Hash256 tip() const { return ids.empty() ? Hash256{} : ids.back(); }
};

struct NodeState {
    std::shared_ptr<const HeaderChain> chain;
    std::shared_ptr<const UtxoSet> utxo;

    Hash256 tip() const { return chain ? chain->tip() : Hash256{}; }
    std::uint64_t height() const { return chain ? chain->size() : 0; }
    const UtxoSet& utxoset() const;
};

struct ClusterNode {
    std::string address;
    std::map<RingId, StoredCopy> store;
    NodeState state;
};

struct MessageTrace {
    std::uint64_t lookup_hops = 0;
    std::uint64_t transfers = 0;
    std::uint64_t stabilize = 0;
};

enum class GetStatus { ok, not_found, all_replicas_corrupt };

struct GetResult {
    GetStatus status = GetStatus::ok;
    Block block;
    std::uint64_t messages = 0;
    std::uint64_t attempts = 0;

    bool ok() const { return status == GetStatus::ok; }
};

enum class RejectCause { none, bad_pow, bad_merkle, bad_tx, unknown_parent };
enum class ReceiveStatus { accepted, forked, rejected };
enum class ForkOutcome { none, keep_current, switched, orphan, fetch_failed };

struct ForkResult {
    ForkOutcome outcome = ForkOutcome::none;
    std::uint64_t messages = 0;
};

struct ReceiveResult {
    ReceiveStatus status = ReceiveStatus::rejected;
    RejectCause cause = RejectCause::none;
    ForkResult fork;       // filled when status == forked
    std::uint64_t messages = 0;
};

RingId block_key(const Block& b, unsigned m);

// A KARAKASA cluster: blocks sharded over a Chord ring keyed by header hash,
// each block held by its owner plus R clockwise successors. Admission is a
// shared-secret equality check. After every membership change the ring is
// stabilized and replicas are eagerly re-placed to ground truth.
//
// A joining node receives the header chain from the best-advanced peer (how a
// newcomer learns which ids to fetch is not otherwise observable), then
// rebuilds its UtxoSet by fetching every block in height order; the messages
// reported for a join are exactly sum over blocks of (lookup hops + 1 fetch).
class Cluster {
  public:
    struct JoinStats {
        RingId id;
        std::uint64_t messages = 0;
    };

    // Single node holding the whole verified chain. Throws InvalidChain.
    static Cluster bootstrap(const std::vector<Block>& chain, const std::string& address,
                             std::vector<std::uint8_t> cluster_key, ClusterOptions opt);

    // Batch construction for experiments: all nodes admitted at once, tables
    // stabilized, copies placed; no per-join message accounting.
    static Cluster build(const std::vector<Block>& chain, const std::vector<std::string>& addresses,
                         std::vector<std::uint8_t> cluster_key, ClusterOptions opt);

    JoinStats join(const std::string& address, std::span<const std::uint8_t> presented_key);
    // Test hook: join with an explicit ring id instead of hashing the address.
    JoinStats join_with_id(RingId id, const std::string& address,
                           std::span<const std::uint8_t> presented_key);
    void leave(const RingId& node_id); // UnknownNode

    GetResult get_block(const RingId& requester, const Hash256& id);
    std::uint64_t store_block(const RingId& origin, const Block& block); // NotEnoughNodes
    ReceiveResult receive_new_block(const RingId& node_id, const Block& block);
    ForkResult resolve_fork(const RingId& node_id, const Block& branch_tip);

    RingId block_ring_key(const Hash256& id) const;
    // Replica set with R clamped to the ring size, primary first; this is the
    // placement ground truth while the cluster is still smaller than R+1.
    std::vector<RingId> placement_set(const RingId& key) const;

    const Ring& ring() const { return ring_; }
    const ClusterOptions& options() const { return opt_; }
    BlockMode mode() const { return opt_.mode; }
    const std::map<RingId, ClusterNode>& nodes() const { return nodes_; }
    ClusterNode& node(const RingId& id);
    const ClusterNode& node(const RingId& id) const;
    const NodeState& state(const RingId& id) const { return node(id).state; }
    const MessageTrace& trace() const { return trace_; }

    std::string snapshot() const; // deterministic per-node shard counts and tips

  private:
    Cluster(ClusterOptions opt, std::vector<std::uint8_t> key);

    RingId admit(std::optional<RingId> forced_id, const std::string& address,
                 std::span<const std::uint8_t> presented_key);
    void stabilize_and_repair();
    void place_copies(const Block& b);
    std::uint64_t rebuild_state(const RingId& id); // header copy + utxo replay via gets
    const ClusterNode* best_peer(const std::optional<RingId>& exclude) const;

    ClusterOptions opt_;
    std::vector<std::uint8_t> key_;
    Ring ring_;
    std::map<RingId, ClusterNode> nodes_;
    MessageTrace trace_;
};

} // namespace karakasa
