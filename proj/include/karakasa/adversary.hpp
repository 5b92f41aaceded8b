#pragma once

#include "karakasa/cluster.hpp"

namespace karakasa {

struct NoCopyHeld : Error {
    using Error::Error;
};
struct TargetNotFound : Error {
    using Error::Error;
};

// Single-byte edit: xor the byte at offset mod the region size. A zero mask
// is the identity edit.
struct Mutation {
    std::size_t offset = 0;
    std::uint8_t xor_mask = 0;
};

struct AttackPlan {
    std::uint64_t target_height = 0;
    std::size_t target_tx = 0;
    std::vector<RingId> compromised; // must all be cluster members
    Mutation mutation;
};

enum class DetectionVia { nothing_rewritten, hash_check, fork_rule };

struct CampaignReport {
    std::uint64_t stacked = 0;                      // S, blocks on top of the target
    std::uint64_t blocks_required = 0;              // (R+1) * (S+1)
    std::uint64_t blocks_required_stacked_only = 0; // (R+1) * S, the other prose reading
    std::uint64_t total_copies = 0;                 // copies present for affected blocks
    std::uint64_t copies_reached = 0;               // copies the compromised set rewrote
    bool fully_consistent = false;
    bool detected = false;
    DetectionVia via = DetectionVia::nothing_rewritten;

    // the forged branch, target first; raw block bytes (a hostile edit need
    // not keep the transaction structure parseable)
    std::vector<std::vector<std::uint8_t>> rewritten_bytes;
    std::vector<BlockHeader> rewritten_headers;
    std::vector<Hash256> rewritten_ids;
};

// Flips one stored byte on one node. The storage key stays what honest nodes
// look up; the attacker cannot move it.
void tamper_block(Cluster& cluster, const RingId& node, const Hash256& id, const Mutation& mut);

// Rewrites the target transaction, re-links and re-mines every block stacked
// on it, and overwrites the copies held by compromised nodes (under the
// original keys). Detection is then evaluated the way an honest verifier
// would: surviving-copy hash audit first, fork difficulty rule if the rewrite
// covered every copy. A storage-rewriting adversary only; routing-layer
// misbehavior is out of scope.
CampaignReport rewrite_campaign(Cluster& cluster, const AttackPlan& plan);

} // namespace karakasa
