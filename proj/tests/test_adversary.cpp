#include "karakasa/adversary.hpp"

#include "doctest.h"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

using namespace karakasa;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) {
    return {s.begin(), s.end()};
}

const std::vector<std::uint8_t> kKey = bytes_of("unit-secret");

std::vector<std::string> addresses(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back("node-" + std::to_string(i));
    return out;
}

std::vector<RingId> member_ids(const Cluster& c) {
    std::vector<RingId> out;
    for (const auto& [id, node] : c.nodes())
        out.push_back(id);
    return out;
}

std::vector<RingId> holders_of(const Cluster& c, const RingId& key) {
    std::vector<RingId> out;
    for (const auto& [id, node] : c.nodes())
        if (node.store.count(key)) out.push_back(id);
    return out;
}

Cluster small_cluster(const std::vector<Block>& chain, unsigned replicas) {
    return Cluster::build(chain, addresses(8), kKey,
                          {.m = 64, .suc = 7, .replicas = replicas, .mode = BlockMode::full});
}

} // namespace

TEST_CASE("tamper_block flips one stored byte in place") {
    auto chain = make_synthetic_chain(6, 3, 50);
    auto c = small_cluster(chain, 1);
    const Block& target = chain[3];
    RingId key = c.block_ring_key(target.id());
    auto holders = holders_of(c, key);
    REQUIRE(holders.size() == 2);

    auto before = c.node(holders[0]).store.at(key).bytes;
    tamper_block(c, holders[0], target.id(), {90, 0x40});
    auto after = c.node(holders[0]).store.at(key).bytes;
    CHECK(after != before);
    CHECK(after[90] == (before[90] ^ 0x40));
    CHECK_FALSE(copy_verifies(c.node(holders[0]).store.at(key), target.id()));
    CHECK(copy_verifies(c.node(holders[1]).store.at(key), target.id()));

    // offsets wrap around the copy length
    tamper_block(c, holders[1], target.id(), {before.size() + 90, 0x40});
    CHECK(c.node(holders[1]).store.at(key).bytes[90] == (before[90] ^ 0x40));

    // identity mask leaves the copy valid
    tamper_block(c, holders[1], target.id(), {before.size() + 90, 0x40}); // undo
    tamper_block(c, holders[1], target.id(), {5, 0x00});
    CHECK(copy_verifies(c.node(holders[1]).store.at(key), target.id()));

    // only actual holders can be hit
    for (const auto& id : member_ids(c))
        if (std::find(holders.begin(), holders.end(), id) == holders.end()) {
            CHECK_THROWS_AS(tamper_block(c, id, target.id(), {0, 1}), NoCopyHeld);
            break;
        }
    CHECK_THROWS_AS(tamper_block(c, holders[0], sha256("missing"), {0, 1}), NoCopyHeld);
}

TEST_CASE("any surviving replica defeats tampering, R=1 exhaustive") {
    auto chain = make_synthetic_chain(6, 3, 51);
    auto c = small_cluster(chain, 1);
    RingId asker = member_ids(c)[0];

    for (const auto& b : chain) {
        RingId key = c.block_ring_key(b.id());
        auto holders = holders_of(c, key);
        REQUIRE(holders.size() == 2);
        const Mutation mut{33, 0x80};

        // strict subsets: nobody, or exactly one of the two holders
        for (unsigned mask = 0; mask < 3; ++mask) {
            for (unsigned i = 0; i < 2; ++i)
                if (mask & (1u << i)) tamper_block(c, holders[i], b.id(), mut);
            auto got = c.get_block(asker, b.id());
            REQUIRE(got.ok());
            CHECK(got.block == b);
            for (unsigned i = 0; i < 2; ++i)
                if (mask & (1u << i)) tamper_block(c, holders[i], b.id(), mut); // undo
        }

        tamper_block(c, holders[0], b.id(), mut);
        tamper_block(c, holders[1], b.id(), mut);
        CHECK(c.get_block(asker, b.id()).status == GetStatus::all_replicas_corrupt);
        tamper_block(c, holders[0], b.id(), mut);
        tamper_block(c, holders[1], b.id(), mut);
        CHECK(c.get_block(asker, b.id()).ok());
    }
}

TEST_CASE("full rewrite campaign forges a consistent branch yet is detected") {
    auto chain = make_synthetic_chain(7, 3, 52);
    REQUIRE(chain[2].txs.size() >= 2);
    auto c = small_cluster(chain, 2);

    AttackPlan plan;
    plan.target_height = 2;
    plan.target_tx = 1;
    plan.compromised = member_ids(c); // the attacker owns every machine
    plan.mutation = {std::size_t(chain[2].txs[1].serialize().size() - 1), 0x01};

    auto rep = rewrite_campaign(c, plan);
    CHECK(rep.stacked == 4);
    CHECK(rep.blocks_required == 15); // (R+1) * (S+1)
    CHECK(rep.blocks_required_stacked_only == 12);
    CHECK(rep.total_copies == 15);
    CHECK(rep.copies_reached == 15);
    CHECK(rep.fully_consistent);
    CHECK(rep.detected);
    CHECK(rep.via == DetectionVia::fork_rule);

    REQUIRE(rep.rewritten_bytes.size() == 5);
    REQUIRE(rep.rewritten_headers.size() == 5);
    REQUIRE(rep.rewritten_ids.size() == 5);

    // the forged branch is internally consistent: parseable, linked, mined,
    // merkle-correct, and actually different from the original suffix
    Hash256 want_prev = chain[1].id();
    for (std::size_t i = 0; i < 5; ++i) {
        auto parsed = Block::deserialize(rep.rewritten_bytes[i]);
        REQUIRE(parsed.has_value());
        CHECK(parsed->id() == rep.rewritten_ids[i]);
        CHECK(parsed->header == rep.rewritten_headers[i]);
        CHECK(parsed->header.hash_prev_block == want_prev);
        CHECK(meets_target(rep.rewritten_ids[i], parsed->header.bits));
        std::vector<Hash256> txids;
        for (const auto& tx : parsed->txs)
            txids.push_back(tx.txid());
        CHECK(parsed->header.hash_merkle_root == merkle_root(txids));
        CHECK(rep.rewritten_ids[i] != chain[2 + i].id());
        want_prev = rep.rewritten_ids[i];
    }
    auto forged_target = Block::deserialize(rep.rewritten_bytes[0]);
    auto orig_tx = chain[2].txs[1].serialize();
    auto forged_tx = forged_target->txs[1].serialize();
    REQUIRE(orig_tx.size() == forged_tx.size());
    CHECK(forged_tx.back() == (orig_tx.back() ^ 0x01));

    // compromised holders now carry the forgery under the original keys
    for (std::size_t i = 0; i < 5; ++i) {
        RingId key = c.block_ring_key(chain[2 + i].id());
        for (const auto& h : holders_of(c, key))
            CHECK(c.node(h).store.at(key).bytes == rep.rewritten_bytes[i]);
        CHECK(c.get_block(member_ids(c)[0], chain[2 + i].id()).status ==
              GetStatus::all_replicas_corrupt);
    }
}

TEST_CASE("campaign against the tip needs only R+1 copies") {
    auto chain = make_synthetic_chain(5, 3, 53);
    auto c = small_cluster(chain, 2);
    AttackPlan plan;
    plan.target_height = 4;
    plan.target_tx = 0;
    plan.compromised = member_ids(c);
    plan.mutation = {std::size_t(chain[4].txs[0].serialize().size() - 1), 0x02};

    auto rep = rewrite_campaign(c, plan);
    CHECK(rep.stacked == 0);
    CHECK(rep.blocks_required == 3);
    CHECK(rep.blocks_required_stacked_only == 0);
    CHECK(rep.copies_reached == 3);
    CHECK(rep.fully_consistent);
    CHECK(rep.rewritten_bytes.size() == 1);
}

TEST_CASE("empty and identity campaigns rewrite nothing") {
    auto chain = make_synthetic_chain(6, 3, 54);
    auto c = small_cluster(chain, 1);

    auto dump = [&] {
        std::vector<std::vector<std::uint8_t>> all;
        for (const auto& [id, node] : c.nodes())
            for (const auto& [k, copy] : node.store)
                all.push_back(copy.bytes);
        return all;
    };
    auto before = dump();

    AttackPlan plan;
    plan.target_height = 3;
    plan.target_tx = 0;
    plan.mutation = {7, 0x10};
    auto rep = rewrite_campaign(c, plan); // nobody compromised
    CHECK(rep.copies_reached == 0);
    CHECK_FALSE(rep.fully_consistent);
    CHECK(rep.detected);
    CHECK(rep.via == DetectionVia::nothing_rewritten);
    CHECK(dump() == before);

    plan.compromised = member_ids(c);
    plan.mutation = {7, 0x00}; // identity edit: re-mining reproduces the bytes
    rep = rewrite_campaign(c, plan);
    CHECK(rep.detected);
    CHECK(rep.via == DetectionVia::nothing_rewritten);
    CHECK(dump() == before);
}

TEST_CASE("partial compromise is caught by the copy audit") {
    auto chain = make_synthetic_chain(7, 3, 55);
    auto c = small_cluster(chain, 2);
    RingId target_key = c.block_ring_key(chain[2].id());
    auto compromised = holders_of(c, target_key); // 3 of 8 nodes
    REQUIRE(compromised.size() == 3);

    AttackPlan plan;
    plan.target_height = 2;
    plan.target_tx = 0;
    plan.compromised = compromised;
    plan.mutation = {std::size_t(chain[2].txs[0].serialize().size() - 1), 0x04};

    auto rep = rewrite_campaign(c, plan);
    CHECK(rep.copies_reached < rep.total_copies);
    CHECK(rep.copies_reached >= 3); // at least the target's own copies fell
    CHECK_FALSE(rep.fully_consistent);
    CHECK(rep.detected);
    CHECK(rep.via == DetectionVia::hash_check);

    // per block: any clean survivor serves the original, full loss is loud
    std::set<RingId> bad(compromised.begin(), compromised.end());
    RingId asker = member_ids(c)[0];
    for (std::uint64_t h = 2; h < 7; ++h) {
        RingId key = c.block_ring_key(chain[h].id());
        bool survivor = false;
        for (const auto& holder : holders_of(c, key))
            if (!bad.count(holder)) survivor = true;
        auto got = c.get_block(asker, chain[h].id());
        if (survivor) {
            REQUIRE(got.ok());
            CHECK(got.block == chain[h]);
        } else {
            CHECK(got.status == GetStatus::all_replicas_corrupt);
        }
    }
}

TEST_CASE("reach grows with the compromised set") {
    auto chain = make_synthetic_chain(6, 3, 56);
    auto ids_all = member_ids(small_cluster(chain, 2));

    std::uint64_t last = 0;
    for (std::size_t take : {0u, 2u, 4u, 6u, 8u}) {
        auto c = small_cluster(chain, 2);
        AttackPlan plan;
        plan.target_height = 2;
        plan.target_tx = 0;
        plan.compromised.assign(ids_all.begin(), ids_all.begin() + take);
        plan.mutation = {std::size_t(chain[2].txs[0].serialize().size() - 1), 0x08};
        auto rep = rewrite_campaign(c, plan);
        CHECK(rep.copies_reached >= last);
        last = rep.copies_reached;
        if (take == 8) CHECK(rep.copies_reached == rep.total_copies);
    }
}

TEST_CASE("campaign input validation") {
    auto chain = make_synthetic_chain(5, 2, 57);
    auto c = small_cluster(chain, 1);
    AttackPlan plan;
    plan.compromised = member_ids(c);

    plan.target_height = 99;
    CHECK_THROWS_AS(rewrite_campaign(c, plan), TargetNotFound);

    plan.target_height = 2;
    plan.target_tx = 99;
    CHECK_THROWS_AS(rewrite_campaign(c, plan), TargetNotFound);

    plan.target_tx = 0;
    plan.compromised = {RingId::from_u64(12345)};
    CHECK_THROWS_AS(rewrite_campaign(c, plan), UnknownNode);
}

TEST_CASE("the forged branch loses the fork fight") {
    auto chain = make_synthetic_chain(6, 3, 58);
    REQUIRE(chain[3].txs.size() >= 2);
    auto c = small_cluster(chain, 1);

    AttackPlan plan;
    plan.target_height = 3;
    plan.target_tx = 1;
    plan.compromised = member_ids(c);
    plan.mutation = {std::size_t(chain[3].txs[1].serialize().size() - 1), 0x01};
    auto rep = rewrite_campaign(c, plan);
    REQUIRE(rep.fully_consistent);

    // the attacker goes further and publishes the branch as new blocks
    RingId attacker = member_ids(c)[7];
    std::vector<Block> branch;
    for (const auto& bytes : rep.rewritten_bytes) {
        auto b = Block::deserialize(bytes);
        REQUIRE(b.has_value());
        branch.push_back(*b);
        c.store_block(attacker, branch.back());
    }

    RingId honest = member_ids(c)[0];
    Hash256 tip_before = c.state(honest).tip();
    UtxoSet utxo_before = c.state(honest).utxoset();

    auto fork = c.resolve_fork(honest, branch.back());
    CHECK(fork.outcome == ForkOutcome::keep_current); // same length, same work
    CHECK(c.state(honest).tip() == tip_before);
    CHECK(c.state(honest).utxoset() == utxo_before);
}
