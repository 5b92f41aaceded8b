#include "karakasa/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace karakasa {

namespace {

const std::vector<std::uint8_t> kClusterKey = {'s', 'h', 'a', 'r', 'e', 'd', '-',
                                               's', 'e', 'c', 'r', 'e', 't'};

std::vector<std::string> make_addresses(std::uint64_t n) {
    std::vector<std::string> a;
    a.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) a.push_back("node-" + std::to_string(i));
    return a;
}

void sort_rows(std::vector<ResultRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        auto key = [](const ResultRow& r) {
            return std::tie(r.experiment, r.n_nodes, r.block_count, r.replicas, r.suc, r.seed,
                            r.trial, r.metric);
        };
        return key(a) < key(b);
    });
}

std::uint64_t parse_u64(const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw InvalidParams("bad number '" + s + "'");
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) throw InvalidParams("bad number '" + s + "'");
    return v;
}

} // namespace

Range Range::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t colon = text.find(':', pos);
        parts.push_back(text.substr(pos, colon - pos));
        if (colon == std::string::npos) break;
        pos = colon + 1;
    }
    if (parts.size() > 3) throw InvalidParams("range '" + text + "' has too many fields");
    Range r;
    r.lo = parse_u64(parts[0]);
    r.hi = parts.size() > 1 ? parse_u64(parts[1]) : r.lo;
    r.step = parts.size() > 2 ? parse_u64(parts[2]) : 1;
    if (r.step == 0) throw InvalidParams("range step must be positive");
    if (r.hi < r.lo) throw InvalidParams("range upper bound below lower bound");
    return r;
}

std::vector<std::uint64_t> Range::values() const {
    std::vector<std::uint64_t> v;
    for (std::uint64_t x = lo; x <= hi; x += step) v.push_back(x);
    return v;
}

std::string Value::csv() const {
    if (integral) return std::to_string(i);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", d);
    return buf;
}

std::string to_csv(const std::vector<ResultRow>& rows) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const ResultRow& r : rows) {
        out += r.experiment + ',' + std::to_string(r.n_nodes) + ',' +
               std::to_string(r.block_count) + ',' + std::to_string(r.replicas) + ',' +
               std::to_string(r.suc) + ',' + std::to_string(r.seed) + ',' +
               std::to_string(r.trial) + ',' + r.metric + ',' + r.measured.csv() + ',' +
               r.estimated.csv() + ',' + r.unit + '\n';
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<ResultRow> exp_storage(const StorageParams& p) {
    if (p.trials == 0) throw InvalidParams("trials must be at least 1");
    std::vector<std::uint64_t> node_counts = p.nodes.values();
    std::vector<ExperimentConfig> cfgs;
    for (std::uint64_t n : node_counts) {
        ExperimentConfig cfg;
        cfg.block_count = p.block_count;
        cfg.n_nodes = n;
        cfg.replicas = p.replicas;
        cfg.suc = p.suc ? *p.suc : default_suc(n, p.replicas);
        cfg.seed = p.seed;
        cfg.mode = p.mode;
        cfg.validate();
        cfgs.push_back(cfg);
    }

    std::vector<ResultRow> rows;
    for (std::uint64_t t = 0; t < p.trials; ++t) {
        std::uint64_t chain_seed = mix_seed(p.seed, t);
        std::vector<Block> chain = p.mode == BlockMode::placement
                                       ? make_placement_chain(p.block_count, chain_seed)
                                       : make_synthetic_chain(p.block_count, 2, chain_seed);
        for (const ExperimentConfig& cfg : cfgs) {
            ClusterOptions opt{64, cfg.suc, cfg.replicas, cfg.mode};
            Cluster cl = Cluster::build(chain, make_addresses(cfg.n_nodes), kClusterKey, opt);
            StorageDistribution dist = measure_storage(cl, cfg.block_size);
            rows.push_back({"exp-storage", cfg.n_nodes, cfg.block_count, cfg.replicas, cfg.suc,
                            p.seed, t, "mean_blocks_per_node", Value::real(dist.mean),
                            Value::real(estimate_blocks_per_node(cfg).value()), "blocks"});
        }
    }
    sort_rows(rows);
    return rows;
}

std::vector<ResultRow> exp_replication(const ReplicationParams& p) {
    if (p.trials == 0) throw InvalidParams("trials must be at least 1");
    std::vector<std::uint64_t> rs = p.replicas.values();
    std::vector<ExperimentConfig> cfgs;
    for (std::uint64_t r : rs) {
        ExperimentConfig cfg;
        cfg.block_count = p.block_count;
        cfg.n_nodes = p.n_nodes;
        cfg.replicas = unsigned(r);
        cfg.suc = p.suc ? *p.suc : default_suc(p.n_nodes, unsigned(r));
        cfg.seed = p.seed;
        cfg.mode = p.mode;
        cfg.validate();
        cfgs.push_back(cfg);
    }

    std::vector<ResultRow> rows;
    for (std::uint64_t t = 0; t < p.trials; ++t) {
        std::uint64_t chain_seed = mix_seed(p.seed, t);
        std::vector<Block> chain = p.mode == BlockMode::placement
                                       ? make_placement_chain(p.block_count, chain_seed)
                                       : make_synthetic_chain(p.block_count, 2, chain_seed);
        for (const ExperimentConfig& cfg : cfgs) {
            ClusterOptions opt{64, cfg.suc, cfg.replicas, cfg.mode};
            Cluster cl = Cluster::build(chain, make_addresses(cfg.n_nodes), kClusterKey, opt);
            StorageDistribution dist = measure_storage(cl, cfg.block_size);
            rows.push_back({"exp-replication", cfg.n_nodes, cfg.block_count, cfg.replicas,
                            cfg.suc, p.seed, t, "mean_blocks_per_node", Value::real(dist.mean),
                            Value::real(estimate_blocks_per_node(cfg).value()), "blocks"});
        }
    }
    sort_rows(rows);
    return rows;
}

std::vector<ResultRow> exp_utxo_build(const UtxoBuildParams& p) {
    if (p.trials == 0) throw InvalidParams("trials must be at least 1");
    std::vector<std::uint64_t> counts = p.block_count.values();
    unsigned suc = p.suc ? *p.suc : default_suc(p.n_nodes, p.replicas);

    std::vector<ResultRow> rows;
    for (std::uint64_t b : counts) {
        ExperimentConfig cfg;
        cfg.block_count = b;
        cfg.n_nodes = p.n_nodes;
        cfg.replicas = p.replicas;
        cfg.suc = suc;
        cfg.seed = p.seed;
        cfg.mode = p.mode;
        cfg.validate();

        std::uint64_t chain_seed = mix_seed(p.seed, b);
        std::vector<Block> chain = p.mode == BlockMode::placement
                                       ? make_placement_chain(b, chain_seed)
                                       : make_synthetic_chain(b, p.txs_per_block, chain_seed);
        ClusterOptions opt{64, suc, p.replicas, p.mode};
        Cluster cl = Cluster::build(chain, make_addresses(p.n_nodes), kClusterKey, opt);
        double est = double(b) * (std::log2(double(p.n_nodes)) + 1.0);
        for (std::uint64_t t = 0; t < p.trials; ++t) {
            auto stats = cl.join("probe-" + std::to_string(t), kClusterKey);
            rows.push_back({"exp-utxo-build", p.n_nodes, b, p.replicas, suc, p.seed, t,
                            "join_messages", Value::integer(std::int64_t(stats.messages)),
                            Value::real(est), "messages"});
            cl.leave(stats.id);
        }
    }
    sort_rows(rows);
    return rows;
}

std::vector<ResultRow> exp_attack(const AttackParams& p) {
    if (p.trials == 0) throw InvalidParams("trials must be at least 1");
    for (double f : p.fractions)
        if (!(f >= 0.0 && f <= 1.0)) throw InvalidParams("fractions must lie in [0, 1]");
    std::uint64_t block_count = p.stack_depth + 2; // genesis, target, then the stack
    unsigned suc = p.suc ? *p.suc : default_suc(p.n_nodes, p.replicas);
    ExperimentConfig cfg;
    cfg.block_count = block_count;
    cfg.n_nodes = p.n_nodes;
    cfg.replicas = p.replicas;
    cfg.suc = suc;
    cfg.seed = p.seed;
    cfg.mode = BlockMode::full;
    cfg.validate();

    std::vector<Block> chain = make_synthetic_chain(block_count, 2, mix_seed(p.seed, 0x6b11));
    std::size_t target_tx = chain[1].txs.size() > 1 ? 1 : 0;
    ClusterOptions opt{64, suc, p.replicas, BlockMode::full};

    std::vector<ResultRow> rows;
    std::uint64_t required = std::uint64_t(p.replicas + 1) * (p.stack_depth + 1);
    rows.push_back({"exp-attack", p.n_nodes, block_count, p.replicas, suc, p.seed, 0,
                    "blocks_required", Value::integer(std::int64_t(required)),
                    Value::integer(std::int64_t(required)), "copies"});

    for (std::size_t fi = 0; fi < p.fractions.size(); ++fi) {
        double f = p.fractions[fi];
        std::uint64_t k = std::min<std::uint64_t>(p.n_nodes,
                                                  std::uint64_t(std::lround(f * double(p.n_nodes))));
        std::uint64_t detected = 0;
        std::uint64_t copies_sum = 0;
        for (std::uint64_t t = 0; t < p.trials; ++t) {
            Cluster cl = Cluster::build(chain, make_addresses(p.n_nodes), kClusterKey, opt);
            std::vector<RingId> all;
            for (const auto& [id, n] : cl.nodes()) all.push_back(id);
            std::mt19937_64 rng(mix_seed(mix_seed(p.seed, 0xF00D + fi), t));
            for (std::uint64_t i = 0; i < k; ++i) {
                // rng() % n is biased but deterministic across platforms
                std::uint64_t j = i + rng() % (all.size() - i);
                std::swap(all[i], all[j]);
            }
            AttackPlan plan;
            plan.target_height = 1;
            plan.target_tx = target_tx;
            plan.compromised.assign(all.begin(), all.begin() + k);
            plan.mutation = {std::size_t(rng()), std::uint8_t(1 + rng() % 255)};
            CampaignReport rep = rewrite_campaign(cl, plan);
            detected += rep.detected ? 1 : 0;
            copies_sum += rep.copies_reached;
        }
        char label[16];
        std::snprintf(label, sizeof label, "f%03d", int(std::lround(f * 100)));
        rows.push_back({"exp-attack", p.n_nodes, block_count, p.replicas, suc, p.seed, 0,
                        std::string("detection_rate_") + label,
                        Value::real(double(detected) / double(p.trials)), Value::real(1.0),
                        "ratio"});
        rows.push_back({"exp-attack", p.n_nodes, block_count, p.replicas, suc, p.seed, 0,
                        std::string("copies_reached_") + label,
                        Value::real(double(copies_sum) / double(p.trials)),
                        Value::real(double(required) * double(k) / double(p.n_nodes)), "copies"});
    }
    sort_rows(rows);
    return rows;
}

} // namespace karakasa
