#pragma once

#include "karakasa/hash.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace karakasa {

// Simplified Bitcoin-style chain model. Headers hash with a single SHA-256
// pass over the canonical serialization (not Bitcoin's double hash).
//
// Canonical byte layouts (all integers little-endian):
//   header (80 bytes): prev hash (32) || merkle root (32) || bits (u64) || nonce (u64)
//   tx:    u32 input count || inputs || u32 output count || outputs
//     input:  prev txid (32) || u32 prev index || u32 script len || unlocking script
//     output: u64 amount || u32 script len || locking script
//   block: header (80) || u32 tx count || per tx: u32 tx len || tx bytes
// A placement-only block serializes as header alone (tx count 0).

inline constexpr std::uint64_t kMaxBlockBytes = 1'000'000;
inline constexpr std::uint64_t kCoinbaseReward = 5'000'000'000; // satoshi, fixed; fees are zero
inline constexpr std::uint64_t kSyntheticBits = 4;              // target accepts ~1/16 of hashes

struct InvalidParams : Error {
    using Error::Error;
};
struct EmptyList : Error {
    using Error::Error;
};

struct TxOut {
    std::uint64_t amount = 0; // satoshi
    std::vector<std::uint8_t> locking_script;

    friend bool operator==(const TxOut&, const TxOut&) = default;
};

struct TxIn {
    Hash256 prev_txid;
    std::uint32_t prev_index = 0;
    std::vector<std::uint8_t> unlocking_script;

    friend bool operator==(const TxIn&, const TxIn&) = default;
};

struct Transaction {
    std::vector<TxIn> inputs;
    std::vector<TxOut> outputs;

    // Coinbase: single input spending the all-zero txid at index 0.
    bool is_coinbase() const;
    std::vector<std::uint8_t> serialize() const;
    Hash256 txid() const;

    friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct BlockHeader {
    Hash256 hash_prev_block;
    Hash256 hash_merkle_root;
    std::uint64_t bits = 0; // required leading zero bits of the header hash
    std::uint64_t nonce = 0;

    std::array<std::uint8_t, 80> serialize() const;

    friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

Hash256 hash_header(const BlockHeader& h);

// True when the hash, read as a big-endian 256-bit number, is below 2^(256-bits),
// i.e. its top `bits` bits are zero.
bool meets_target(const Hash256& h, std::uint64_t bits);

// Mutates nonce until the header meets its own target. Deterministic: starts at 0.
void mine_header(BlockHeader& h);

struct Block {
    BlockHeader header;
    std::vector<Transaction> txs; // empty => placement-only block
    std::uint64_t nominal_size = 0;

    Hash256 id() const { return hash_header(header); }
    bool placement_only() const { return txs.empty(); }
    std::vector<std::uint8_t> serialize() const;
    static std::optional<Block> deserialize(std::span<const std::uint8_t> bytes);

    friend bool operator==(const Block&, const Block&) = default;
};

// Bitcoin-style merkle: pairs hashed by concatenation, odd levels duplicate the
// last element, a single txid is its own root. Throws on an empty list.
Hash256 merkle_root(const std::vector<Hash256>& txids);

struct OutPoint {
    Hash256 txid;
    std::uint32_t index = 0;

    friend auto operator<=>(const OutPoint&, const OutPoint&) = default;
};

class UtxoSet {
  public:
    bool contains(const OutPoint& op) const { return entries_.count(op) != 0; }
    const TxOut* find(const OutPoint& op) const;
    void add(const OutPoint& op, TxOut out) { entries_[op] = std::move(out); }
    bool erase(const OutPoint& op) { return entries_.erase(op) != 0; }
    std::size_t size() const { return entries_.size(); }
    std::uint64_t total_amount() const;
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    friend bool operator==(const UtxoSet&, const UtxoSet&) = default;

  private:
    std::map<OutPoint, TxOut> entries_;
};

enum class TxError { ok, missing_utxo, script_mismatch, value_overspend };

struct TxVerdict {
    TxError code = TxError::ok;
    std::size_t input_index = 0;

    bool ok() const { return code == TxError::ok; }
};

// Checks one transaction against the set: every input must reference a live
// UTXO, unlocking script must equal the locking script byte-wise, and input
// value must cover output value. Coinbase transactions are exempt.
TxVerdict verify_transaction(const Transaction& tx, const UtxoSet& utxo);

struct ApplyError {
    TxVerdict verdict;
    std::size_t tx_pos = 0;
};

// Applies all transactions of a block in order, verifying each against the
// progressively updated set. On error the set is left exactly as it was.
std::optional<ApplyError> apply_block(UtxoSet& utxo, const Block& block);

enum class ChainError { ok, empty_list, broken_link, bad_pow, bad_merkle, bad_tx };

struct ChainVerdict {
    ChainError code = ChainError::ok;
    std::uint64_t height = 0;
    std::size_t tx_pos = 0;
    TxVerdict tx_verdict;

    bool ok() const { return code == ChainError::ok; }
};

// Whole-chain check, run in passes so the reported error is deterministic:
// prev-hash links first (genesis must link to the zero hash), then proof of
// work, then merkle roots of full-content blocks, then transaction replay.
ChainVerdict verify_chain(const std::vector<Block>& blocks);

// Replays the chain from genesis; throws Error if any block fails to apply.
UtxoSet build_utxoset(const std::vector<Block>& blocks);

// Deterministic synthetic chain: a fixed genesis block plus block_count - 1
// mined blocks. Every block carries one coinbase; remaining txs_per_block - 1
// slots spend previously created outputs picked by a seeded PRNG. Zero fees.
std::vector<Block> make_synthetic_chain(std::uint64_t block_count, std::uint32_t txs_per_block,
                                        std::uint64_t seed);

// Header-only chain for large placement experiments: real linked, mined
// headers, no transactions, nominal size fixed at kMaxBlockBytes.
std::vector<Block> make_placement_chain(std::uint64_t block_count, std::uint64_t seed);

// Length-prefixed binary dump: u32 magic, u32 version, u64 block count, then
// per block u64 payload length || canonical block bytes || u64 nominal size.
void write_chain(const std::string& path, const std::vector<Block>& blocks);
std::vector<Block> read_chain(const std::string& path);

} // namespace karakasa
