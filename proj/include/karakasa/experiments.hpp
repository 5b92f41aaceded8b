#pragma once

#include "karakasa/adversary.hpp"
#include "karakasa/metrics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace karakasa {

// "n", "lo:hi", or "lo:hi:step"; hi inclusive
struct Range {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;
    std::uint64_t step = 1;

    static Range parse(const std::string& text); // InvalidParams on bad grammar
    std::vector<std::uint64_t> values() const;
};

// CSV cell: integers print bare, reals with six decimals
struct Value {
    bool integral = true;
    std::int64_t i = 0;
    double d = 0;

    static Value integer(std::int64_t v) { return {true, v, 0}; }
    static Value real(double v) { return {false, 0, v}; }
    std::string csv() const;
};

struct ResultRow {
    std::string experiment;
    std::uint64_t n_nodes = 0;
    std::uint64_t block_count = 0;
    unsigned replicas = 0;
    unsigned suc = 0;
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::string metric;
    Value measured;
    Value estimated;
    std::string unit;
};

inline constexpr char kCsvHeader[] =
    "experiment,n_nodes,block_count,replicas,suc,seed,trial,metric,measured,estimated,unit";

std::string to_csv(const std::vector<ResultRow>& rows);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

struct StorageParams {
    Range nodes{500, 1000, 100};
    std::uint64_t block_count = 512000;
    unsigned replicas = 0;
    std::optional<unsigned> suc;
    std::uint64_t trials = 1;
    std::uint64_t seed = 1;
    BlockMode mode = BlockMode::placement;
};
std::vector<ResultRow> exp_storage(const StorageParams& p);

struct ReplicationParams {
    std::uint64_t n_nodes = 1000;
    std::uint64_t block_count = 50000;
    Range replicas{0, 4, 1};
    std::optional<unsigned> suc;
    std::uint64_t trials = 1;
    std::uint64_t seed = 1;
    BlockMode mode = BlockMode::placement;
};
std::vector<ResultRow> exp_replication(const ReplicationParams& p);

struct UtxoBuildParams {
    std::uint64_t n_nodes = 1000;
    Range block_count{1000, 5000, 1000};
    unsigned replicas = 0;
    std::optional<unsigned> suc;
    std::uint64_t trials = 10;
    std::uint64_t seed = 1;
    BlockMode mode = BlockMode::full;
    std::uint32_t txs_per_block = 2;
};
std::vector<ResultRow> exp_utxo_build(const UtxoBuildParams& p);

struct AttackParams {
    std::uint64_t n_nodes = 8;
    unsigned replicas = 2;
    std::optional<unsigned> suc;
    std::uint64_t stack_depth = 4;
    std::vector<double> fractions{0.0, 0.25, 0.5, 0.75, 1.0};
    std::uint64_t trials = 100;
    std::uint64_t seed = 1;
};
std::vector<ResultRow> exp_attack(const AttackParams& p);

} // namespace karakasa
