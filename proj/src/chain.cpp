#include "karakasa/chain.hpp"

#include <cstring>
#include <fstream>
#include <random>
#include <string>

namespace karakasa {

namespace {

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) v.push_back(std::uint8_t(x >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& v, std::uint64_t x) {
    for (int i = 0; i < 8; ++i) v.push_back(std::uint8_t(x >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& v, std::span<const std::uint8_t> b) {
    v.insert(v.end(), b.begin(), b.end());
}

// Bounds-checked little-endian reader for deserialization.
struct Reader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
    bool fail = false;

    bool take(std::size_t n) {
        if (fail || data.size() - pos < n) {
            fail = true;
            return false;
        }
        return true;
    }
    std::uint32_t u32() {
        if (!take(4)) return 0;
        std::uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= std::uint32_t(data[pos + i]) << (8 * i);
        pos += 4;
        return x;
    }
    std::uint64_t u64() {
        if (!take(8)) return 0;
        std::uint64_t x = 0;
        for (int i = 0; i < 8; ++i) x |= std::uint64_t(data[pos + i]) << (8 * i);
        pos += 8;
        return x;
    }
    Hash256 hash() {
        Hash256 h;
        if (take(32)) {
            std::memcpy(h.bytes.data(), data.data() + pos, 32);
            pos += 32;
        }
        return h;
    }
    std::vector<std::uint8_t> bytes(std::size_t n) {
        std::vector<std::uint8_t> out;
        if (take(n)) {
            out.assign(data.begin() + pos, data.begin() + pos + n);
            pos += n;
        }
        return out;
    }
};

std::vector<std::uint8_t> to_bytes(const std::string& s) {
    return {s.begin(), s.end()};
}

} // namespace

bool Transaction::is_coinbase() const {
    return inputs.size() == 1 && inputs[0].prev_txid.is_zero() && inputs[0].prev_index == 0;
}

std::vector<std::uint8_t> Transaction::serialize() const {
    std::vector<std::uint8_t> v;
    put_u32(v, std::uint32_t(inputs.size()));
    for (const auto& in : inputs) {
        put_bytes(v, in.prev_txid.bytes);
        put_u32(v, in.prev_index);
        put_u32(v, std::uint32_t(in.unlocking_script.size()));
        put_bytes(v, in.unlocking_script);
    }
    put_u32(v, std::uint32_t(outputs.size()));
    for (const auto& out : outputs) {
        put_u64(v, out.amount);
        put_u32(v, std::uint32_t(out.locking_script.size()));
        put_bytes(v, out.locking_script);
    }
    return v;
}

Hash256 Transaction::txid() const {
    return sha256(std::span<const std::uint8_t>(serialize()));
}

std::array<std::uint8_t, 80> BlockHeader::serialize() const {
    std::array<std::uint8_t, 80> out;
    std::memcpy(out.data(), hash_prev_block.bytes.data(), 32);
    std::memcpy(out.data() + 32, hash_merkle_root.bytes.data(), 32);
    for (int i = 0; i < 8; ++i) out[64 + i] = std::uint8_t(bits >> (8 * i));
    for (int i = 0; i < 8; ++i) out[72 + i] = std::uint8_t(nonce >> (8 * i));
    return out;
}

Hash256 hash_header(const BlockHeader& h) {
    auto bytes = h.serialize();
    return sha256(std::span<const std::uint8_t>(bytes));
}

bool meets_target(const Hash256& h, std::uint64_t bits) {
    std::uint64_t zeros = 0;
    for (auto b : h.bytes) {
        if (zeros >= bits) return true;
        if (b == 0) {
            zeros += 8;
            continue;
        }
        for (int i = 7; i >= 0; --i) {
            if (b >> i & 1) return zeros >= bits;
            ++zeros;
        }
    }
    return zeros >= bits;
}

void mine_header(BlockHeader& h) {
    h.nonce = 0;
    while (!meets_target(hash_header(h), h.bits)) ++h.nonce;
}

std::vector<std::uint8_t> Block::serialize() const {
    std::vector<std::uint8_t> v;
    auto hdr = header.serialize();
    put_bytes(v, hdr);
    put_u32(v, std::uint32_t(txs.size()));
    for (const auto& tx : txs) {
        auto tb = tx.serialize();
        put_u32(v, std::uint32_t(tb.size()));
        put_bytes(v, tb);
    }
    return v;
}

std::optional<Block> Block::deserialize(std::span<const std::uint8_t> bytes) {
    Reader r{bytes};
    Block b;
    b.header.hash_prev_block = r.hash();
    b.header.hash_merkle_root = r.hash();
    b.header.bits = r.u64();
    b.header.nonce = r.u64();
    std::uint32_t ntx = r.u32();
    for (std::uint32_t t = 0; t < ntx && !r.fail; ++t) {
        std::uint32_t len = r.u32();
        std::size_t end = r.pos + len;
        if (!r.take(len)) break;
        Transaction tx;
        std::uint32_t nin = r.u32();
        for (std::uint32_t i = 0; i < nin && !r.fail; ++i) {
            TxIn in;
            in.prev_txid = r.hash();
            in.prev_index = r.u32();
            in.unlocking_script = r.bytes(r.u32());
            tx.inputs.push_back(std::move(in));
        }
        std::uint32_t nout = r.u32();
        for (std::uint32_t i = 0; i < nout && !r.fail; ++i) {
            TxOut out;
            out.amount = r.u64();
            out.locking_script = r.bytes(r.u32());
            tx.outputs.push_back(std::move(out));
        }
        if (r.pos != end) r.fail = true; // tx length prefix must be exact
        b.txs.push_back(std::move(tx));
    }
    if (r.fail || r.pos != bytes.size()) return std::nullopt;
    b.nominal_size = bytes.size();
    return b;
}

Hash256 merkle_root(const std::vector<Hash256>& txids) {
    if (txids.empty()) throw EmptyList("merkle_root: empty transaction list");
    std::vector<Hash256> level = txids;
    while (level.size() > 1) {
        if (level.size() % 2) level.push_back(level.back());
        std::vector<Hash256> next;
        next.reserve(level.size() / 2);
        for (std::size_t i = 0; i < level.size(); i += 2) {
            std::uint8_t buf[64];
            std::memcpy(buf, level[i].bytes.data(), 32);
            std::memcpy(buf + 32, level[i + 1].bytes.data(), 32);
            next.push_back(sha256(std::span<const std::uint8_t>(buf, 64)));
        }
        level = std::move(next);
    }
    return level[0];
}

const TxOut* UtxoSet::find(const OutPoint& op) const {
    auto it = entries_.find(op);
    return it == entries_.end() ? nullptr : &it->second;
}

std::uint64_t UtxoSet::total_amount() const {
    std::uint64_t total = 0;
    for (const auto& [op, out] : entries_) total += out.amount;
    return total;
}

TxVerdict verify_transaction(const Transaction& tx, const UtxoSet& utxo) {
    if (tx.is_coinbase()) return {};
    unsigned __int128 total_in = 0;
    std::vector<OutPoint> seen;
    for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
        const auto& in = tx.inputs[i];
        OutPoint op{in.prev_txid, in.prev_index};
        const TxOut* prev = utxo.find(op);
        if (!prev) return {TxError::missing_utxo, i};
        for (const auto& s : seen)
            if (s == op) return {TxError::missing_utxo, i}; // same outpoint twice
        seen.push_back(op);
        if (in.unlocking_script != prev->locking_script) return {TxError::script_mismatch, i};
        total_in += prev->amount;
    }
    unsigned __int128 total_out = 0;
    for (const auto& out : tx.outputs) total_out += out.amount;
    if (total_out > total_in) return {TxError::value_overspend, 0};
    return {};
}

std::optional<ApplyError> apply_block(UtxoSet& utxo, const Block& block) {
    std::vector<std::pair<OutPoint, TxOut>> erased;
    std::vector<OutPoint> added;
    auto rollback = [&] {
        for (const auto& op : added) utxo.erase(op);
        for (auto it = erased.rbegin(); it != erased.rend(); ++it) utxo.add(it->first, it->second);
    };
    for (std::size_t pos = 0; pos < block.txs.size(); ++pos) {
        const auto& tx = block.txs[pos];
        TxVerdict v = verify_transaction(tx, utxo);
        if (!v.ok()) {
            rollback();
            return ApplyError{v, pos};
        }
        if (!tx.is_coinbase()) {
            for (const auto& in : tx.inputs) {
                OutPoint op{in.prev_txid, in.prev_index};
                erased.emplace_back(op, *utxo.find(op));
                utxo.erase(op);
            }
        }
        Hash256 id = tx.txid();
        for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) {
            OutPoint op{id, i};
            utxo.add(op, tx.outputs[i]);
            added.push_back(op);
        }
    }
    return std::nullopt;
}

ChainVerdict verify_chain(const std::vector<Block>& blocks) {
    if (blocks.empty()) return {ChainError::empty_list, 0, 0, {}};
    for (std::uint64_t h = 0; h < blocks.size(); ++h) {
        const Hash256 want =
            h == 0 ? Hash256{} : hash_header(blocks[h - 1].header);
        if (blocks[h].header.hash_prev_block != want) return {ChainError::broken_link, h, 0, {}};
    }
    for (std::uint64_t h = 0; h < blocks.size(); ++h) {
        if (!meets_target(hash_header(blocks[h].header), blocks[h].header.bits))
            return {ChainError::bad_pow, h, 0, {}};
    }
    for (std::uint64_t h = 0; h < blocks.size(); ++h) {
        const Block& b = blocks[h];
        if (b.placement_only()) continue;
        std::vector<Hash256> ids;
        ids.reserve(b.txs.size());
        for (const auto& tx : b.txs) ids.push_back(tx.txid());
        if (merkle_root(ids) != b.header.hash_merkle_root) return {ChainError::bad_merkle, h, 0, {}};
    }
    UtxoSet utxo;
    for (std::uint64_t h = 0; h < blocks.size(); ++h) {
        if (auto err = apply_block(utxo, blocks[h]))
            return {ChainError::bad_tx, h, err->tx_pos, err->verdict};
    }
    return {};
}

UtxoSet build_utxoset(const std::vector<Block>& blocks) {
    UtxoSet utxo;
    for (std::uint64_t h = 0; h < blocks.size(); ++h) {
        if (auto err = apply_block(utxo, blocks[h]))
            throw Error("build_utxoset: block " + std::to_string(h) + " tx " +
                        std::to_string(err->tx_pos) + " failed verification");
    }
    return utxo;
}

namespace {

Transaction make_coinbase(std::uint64_t height, std::vector<std::uint8_t> locking) {
    Transaction tx;
    TxIn in;
    for (int i = 0; i < 8; ++i) in.unlocking_script.push_back(std::uint8_t(height >> (8 * i)));
    tx.inputs.push_back(std::move(in));
    tx.outputs.push_back(TxOut{kCoinbaseReward, std::move(locking)});
    return tx;
}

Block finish_block(const Hash256& prev, std::vector<Transaction> txs) {
    Block b;
    b.txs = std::move(txs);
    std::vector<Hash256> ids;
    ids.reserve(b.txs.size());
    for (const auto& tx : b.txs) ids.push_back(tx.txid());
    b.header.hash_prev_block = prev;
    b.header.hash_merkle_root = merkle_root(ids);
    b.header.bits = kSyntheticBits;
    mine_header(b.header);
    b.nominal_size = b.serialize().size();
    return b;
}

// The genesis block is a constant: every synthetic chain starts from it.
Block make_genesis() {
    return finish_block(Hash256{}, {make_coinbase(0, to_bytes("acct-0"))});
}

} // namespace

std::vector<Block> make_synthetic_chain(std::uint64_t block_count, std::uint32_t txs_per_block,
                                        std::uint64_t seed) {
    if (block_count < 1 || txs_per_block < 1)
        throw InvalidParams("make_synthetic_chain: block_count and txs_per_block must be >= 1");

    struct Spendable {
        OutPoint op;
        std::uint64_t amount;
        std::vector<std::uint8_t> locking;
    };

    std::mt19937_64 rng(seed);
    // rng() % n is biased but deterministic across platforms, which matters more here
    auto pick = [&rng](std::size_t n) { return std::size_t(rng() % n); };
    auto label = [&rng] { return to_bytes("acct-" + std::to_string(rng() % 100000)); };

    std::vector<Block> blocks;
    blocks.reserve(block_count);
    blocks.push_back(make_genesis());

    std::vector<Spendable> pool;
    {
        const Transaction& cb = blocks[0].txs[0];
        pool.push_back({{cb.txid(), 0}, kCoinbaseReward, cb.outputs[0].locking_script});
    }

    for (std::uint64_t h = 1; h < block_count; ++h) {
        std::vector<Transaction> txs;
        Transaction cb = make_coinbase(h, label());
        txs.push_back(cb);
        pool.push_back({{cb.txid(), 0}, kCoinbaseReward, cb.outputs[0].locking_script});

        for (std::uint32_t t = 1; t < txs_per_block && !pool.empty(); ++t) {
            std::size_t idx = pick(pool.size());
            Spendable src = pool[idx];
            pool.erase(pool.begin() + idx);

            Transaction tx;
            tx.inputs.push_back(TxIn{src.op.txid, src.op.index, src.locking});
            if (src.amount >= 2) {
                std::uint64_t a = src.amount / 2;
                tx.outputs.push_back(TxOut{a, label()});
                tx.outputs.push_back(TxOut{src.amount - a, label()});
            } else {
                tx.outputs.push_back(TxOut{src.amount, label()});
            }
            Hash256 id = tx.txid();
            for (std::uint32_t i = 0; i < tx.outputs.size(); ++i)
                pool.push_back({{id, i}, tx.outputs[i].amount, tx.outputs[i].locking_script});
            txs.push_back(std::move(tx));
        }
        blocks.push_back(finish_block(blocks.back().id(), std::move(txs)));
    }
    return blocks;
}

std::vector<Block> make_placement_chain(std::uint64_t block_count, std::uint64_t seed) {
    if (block_count < 1) throw InvalidParams("make_placement_chain: block_count must be >= 1");
    std::vector<Block> blocks;
    blocks.reserve(block_count);
    Hash256 prev{};
    for (std::uint64_t h = 0; h < block_count; ++h) {
        Block b;
        b.header.hash_prev_block = prev;
        std::vector<std::uint8_t> tag;
        put_u64(tag, seed);
        put_u64(tag, h);
        b.header.hash_merkle_root = sha256(std::span<const std::uint8_t>(tag));
        b.header.bits = kSyntheticBits;
        mine_header(b.header);
        b.nominal_size = kMaxBlockBytes;
        prev = b.id();
        blocks.push_back(std::move(b));
    }
    return blocks;
}

namespace {
constexpr std::uint32_t kChainMagic = 0x4e48434b; // "KCHN"
constexpr std::uint32_t kChainVersion = 1;
} // namespace

void write_chain(const std::string& path, const std::vector<Block>& blocks) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("write_chain: cannot open " + path);
    std::vector<std::uint8_t> head;
    put_u32(head, kChainMagic);
    put_u32(head, kChainVersion);
    put_u64(head, blocks.size());
    f.write(reinterpret_cast<const char*>(head.data()), std::streamsize(head.size()));
    for (const auto& b : blocks) {
        std::vector<std::uint8_t> rec;
        auto payload = b.serialize();
        put_u64(rec, payload.size());
        put_bytes(rec, payload);
        put_u64(rec, b.nominal_size);
        f.write(reinterpret_cast<const char*>(rec.data()), std::streamsize(rec.size()));
    }
    if (!f) throw Error("write_chain: write failed for " + path);
}

std::vector<Block> read_chain(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("read_chain: cannot open " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    Reader r{data};
    if (r.u32() != kChainMagic || r.u32() != kChainVersion)
        throw Error("read_chain: bad magic or version in " + path);
    std::uint64_t count = r.u64();
    std::vector<Block> blocks;
    blocks.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t len = r.u64();
        auto payload = r.bytes(len);
        std::uint64_t nominal = r.u64();
        if (r.fail) throw Error("read_chain: truncated record in " + path);
        auto b = Block::deserialize(payload);
        if (!b) throw Error("read_chain: malformed block record in " + path);
        b->nominal_size = nominal;
        blocks.push_back(std::move(*b));
    }
    if (r.pos != data.size()) throw Error("read_chain: trailing bytes in " + path);
    return blocks;
}

} // namespace karakasa
