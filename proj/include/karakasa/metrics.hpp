#pragma once

#include "karakasa/cluster.hpp"

#include <cstdint>
#include <vector>

namespace karakasa {

inline constexpr std::uint64_t kHeaderBytes = 80;
inline constexpr std::uint64_t kDefaultBlockSize = 1'000'000; // decimal MB

// Nonnegative exact rational, kept reduced. Estimator checks compare through
// 128-bit cross multiplication, so no float drift enters acceptance math.
struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    Rational() = default;
    Rational(std::uint64_t n, std::uint64_t d); // InvalidParams on zero denominator

    double value() const { return double(num) / double(den); }
    friend bool operator==(const Rational&, const Rational&) = default;

    // |this - ref| <= (pct/100) * ref, exactly
    bool within_percent(const Rational& ref, unsigned pct) const;
};

struct ExperimentConfig {
    std::uint64_t block_size = kDefaultBlockSize;
    std::uint64_t block_count = 1;
    std::uint64_t n_nodes = 1;
    unsigned suc = 0;
    unsigned replicas = 0;
    std::uint64_t seed = 1;
    BlockMode mode = BlockMode::placement;

    void validate() const; // InvalidParams on violated restrictions
};

// max(replicas, 8), capped at n_nodes - 1
unsigned default_suc(std::uint64_t n_nodes, unsigned replicas);

Rational estimate_full_node(const ExperimentConfig& cfg);      // bytes total
Rational estimate_karakasa(const ExperimentConfig& cfg);       // bytes per node
Rational estimate_blocks_per_node(const ExperimentConfig& cfg);
std::uint64_t estimate_spv(std::uint64_t block_count);         // bytes

// Node count beyond which the sharded per-node share of one block drops
// below one header. 2^30-byte blocks with 80-byte headers give 13421772;
// decimal-MB blocks give 12500.
std::uint64_t spv_crossover(std::uint64_t block_size, std::uint64_t header_size);

struct StorageDistribution {
    std::vector<std::uint64_t> counts; // per node, ascending node id
    std::uint64_t total = 0;
    std::uint64_t min = 0;
    std::uint64_t max = 0;
    double mean = 0;
    double stddev = 0;
    std::uint64_t block_size = 0;

    double mean_bytes() const { return mean * double(block_size); }
};

StorageDistribution measure_storage(const Cluster& cluster, std::uint64_t block_size);

struct MessageTotals {
    std::uint64_t lookup_hops = 0;
    std::uint64_t transfers = 0;
    std::uint64_t stabilize = 0;

    std::uint64_t total() const { return lookup_hops + transfers + stabilize; }
};

MessageTotals measure_messages(const MessageTrace& trace);

} // namespace karakasa
