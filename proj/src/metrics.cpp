#include "karakasa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace karakasa {

Rational::Rational(std::uint64_t n, std::uint64_t d) : num(n), den(d) {
    if (den == 0) throw InvalidParams("zero denominator");
    if (std::uint64_t g = std::gcd(num, den); g > 1) {
        num /= g;
        den /= g;
    }
}

bool Rational::within_percent(const Rational& ref, unsigned pct) const {
    using u128 = unsigned __int128;
    u128 lhs = u128(num) * ref.den;
    u128 rhs = u128(ref.num) * den;
    u128 diff = lhs > rhs ? lhs - rhs : rhs - lhs;
    return diff * 100 <= u128(ref.num) * den * pct;
}

void ExperimentConfig::validate() const {
    if (block_size == 0) throw InvalidParams("block_size must be positive");
    if (block_count == 0) throw InvalidParams("block_count must be at least 1");
    if (n_nodes == 0) throw InvalidParams("n_nodes must be at least 1");
    if (std::uint64_t(suc) > n_nodes - 1) throw InvalidParams("suc exceeds n_nodes - 1");
    if (replicas > suc) throw InvalidParams("replicas exceeds suc");
}

unsigned default_suc(std::uint64_t n_nodes, unsigned replicas) {
    std::uint64_t s = std::max<std::uint64_t>(replicas, 8);
    return unsigned(std::min(s, n_nodes == 0 ? 0 : n_nodes - 1));
}

Rational estimate_full_node(const ExperimentConfig& cfg) {
    return {cfg.block_count * cfg.block_size, 1};
}

Rational estimate_karakasa(const ExperimentConfig& cfg) {
    return {cfg.block_count * cfg.block_size * (cfg.replicas + 1), cfg.n_nodes};
}

Rational estimate_blocks_per_node(const ExperimentConfig& cfg) {
    return {cfg.block_count * (cfg.replicas + 1), cfg.n_nodes};
}

std::uint64_t estimate_spv(std::uint64_t block_count) { return block_count * kHeaderBytes; }

std::uint64_t spv_crossover(std::uint64_t block_size, std::uint64_t header_size) {
    if (header_size == 0) throw InvalidParams("zero header size");
    return block_size / header_size;
}

StorageDistribution measure_storage(const Cluster& cluster, std::uint64_t block_size) {
    StorageDistribution d;
    d.block_size = block_size;
    for (const auto& [id, node] : cluster.nodes()) d.counts.push_back(node.store.size());
    if (d.counts.empty()) return d;
    d.total = std::accumulate(d.counts.begin(), d.counts.end(), std::uint64_t(0));
    auto [mn, mx] = std::minmax_element(d.counts.begin(), d.counts.end());
    d.min = *mn;
    d.max = *mx;
    d.mean = double(d.total) / double(d.counts.size());
    double var = 0;
    for (std::uint64_t c : d.counts) var += (double(c) - d.mean) * (double(c) - d.mean);
    d.stddev = std::sqrt(var / double(d.counts.size()));
    return d;
}

MessageTotals measure_messages(const MessageTrace& trace) {
    return {trace.lookup_hops, trace.transfers, trace.stabilize};
}

} // namespace karakasa
