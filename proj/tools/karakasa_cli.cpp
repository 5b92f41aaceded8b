#include "karakasa/experiments.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

namespace kk = karakasa;

namespace {

std::uint64_t seed_from_env() {
    const char* s = std::getenv("KARAKASA_SEED");
    if (!s || !*s) return 1;
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (errno != 0 || *end != '\0') throw kk::InvalidParams("bad KARAKASA_SEED value");
    return v;
}

kk::BlockMode parse_mode(const std::string& s) {
    if (s == "placement") return kk::BlockMode::placement;
    if (s == "full") return kk::BlockMode::full;
    throw kk::InvalidParams("mode must be 'placement' or 'full'");
}

std::vector<double> parse_fractions(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string part = text.substr(pos, comma - pos);
        char* end = nullptr;
        errno = 0;
        double v = std::strtod(part.c_str(), &end);
        if (part.empty() || errno != 0 || end != part.c_str() + part.size())
            throw kk::InvalidParams("bad fraction '" + part + "'");
        out.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (out.empty()) throw kk::InvalidParams("empty fraction list");
    return out;
}

int emit(const std::vector<kk::ResultRow>& rows, const std::string& out_path) {
    std::string csv = kk::to_csv(rows);
    if (out_path.empty()) {
        std::fputs(csv.c_str(), stdout);
        return 0;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) {
        std::fprintf(stderr, "cannot open %s for writing\n", out_path.c_str());
        return 3;
    }
    f << csv;
    f.close();
    std::printf("wrote %zu rows to %s\n", rows.size(), out_path.c_str());
    std::printf("%-26s %8s %10s %3s %4s %6s %14s %14s %s\n", "metric", "n_nodes", "blocks", "R",
                "suc", "trial", "measured", "estimated", "unit");
    for (const kk::ResultRow& r : rows)
        std::printf("%-26s %8llu %10llu %3u %4u %6llu %14s %14s %s\n", r.metric.c_str(),
                    (unsigned long long)r.n_nodes, (unsigned long long)r.block_count, r.replicas,
                    r.suc, (unsigned long long)r.trial, r.measured.csv().c_str(),
                    r.estimated.csv().c_str(), r.unit.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"KARAKASA sharded-blockchain cluster experiments"};
    app.require_subcommand(1);

    struct {
        std::string nodes = "500:1000:100";
        std::uint64_t block_count = 512000;
        unsigned replicas = 0;
        unsigned suc = 0;
        std::uint64_t trials = 1;
        std::uint64_t seed = 1;
        std::string mode = "placement";
        std::string out;
    } st;
    auto* st_cmd = app.add_subcommand("exp-storage", "per-node storage vs cluster size");
    st_cmd->add_option("--nodes", st.nodes, "node count range lo:hi:step");
    st_cmd->add_option("--block-count", st.block_count, "number of blocks");
    st_cmd->add_option("--replicas", st.replicas, "extra copies per block");
    auto* st_suc = st_cmd->add_option("--suc", st.suc, "successor list length");
    st_cmd->add_option("--trials", st.trials, "trials per configuration");
    auto* st_seed = st_cmd->add_option("--seed", st.seed, "PRNG seed");
    st_cmd->add_option("--mode", st.mode, "placement|full");
    st_cmd->add_option("--out", st.out, "CSV output path");

    struct {
        std::uint64_t n_nodes = 1000;
        std::uint64_t block_count = 50000;
        std::string replicas = "0:4";
        unsigned suc = 0;
        std::uint64_t trials = 1;
        std::uint64_t seed = 1;
        std::string mode = "placement";
        std::string out;
    } re;
    auto* re_cmd = app.add_subcommand("exp-replication", "per-node storage vs replica count");
    re_cmd->add_option("--nodes", re.n_nodes, "cluster size");
    re_cmd->add_option("--block-count", re.block_count, "number of blocks");
    re_cmd->add_option("--replicas", re.replicas, "replica range lo[:hi]");
    auto* re_suc = re_cmd->add_option("--suc", re.suc, "successor list length");
    re_cmd->add_option("--trials", re.trials, "trials per configuration");
    auto* re_seed = re_cmd->add_option("--seed", re.seed, "PRNG seed");
    re_cmd->add_option("--mode", re.mode, "placement|full");
    re_cmd->add_option("--out", re.out, "CSV output path");

    struct {
        std::uint64_t n_nodes = 1000;
        std::string counts = "1000:5000:1000";
        unsigned replicas = 0;
        unsigned suc = 0;
        std::uint64_t trials = 10;
        std::uint64_t seed = 1;
        std::string mode = "full";
        std::string out;
    } ux;
    auto* ux_cmd = app.add_subcommand("exp-utxo-build", "join-time UTXO rebuild message cost");
    ux_cmd->add_option("--nodes", ux.n_nodes, "cluster size");
    ux_cmd->add_option("--block-count", ux.counts, "block count range lo[:hi:step]");
    ux_cmd->add_option("--replicas", ux.replicas, "extra copies per block");
    auto* ux_suc = ux_cmd->add_option("--suc", ux.suc, "successor list length");
    ux_cmd->add_option("--trials", ux.trials, "joins per block count");
    auto* ux_seed = ux_cmd->add_option("--seed", ux.seed, "PRNG seed");
    ux_cmd->add_option("--mode", ux.mode, "placement|full");
    ux_cmd->add_option("--out", ux.out, "CSV output path");

    struct {
        std::uint64_t n_nodes = 8;
        unsigned replicas = 2;
        unsigned suc = 0;
        std::uint64_t stack_depth = 4;
        std::string fractions = "0,0.25,0.5,0.75,1";
        std::uint64_t trials = 100;
        std::uint64_t seed = 1;
        std::string out;
    } at;
    auto* at_cmd = app.add_subcommand("exp-attack", "rewrite-campaign cost and detection");
    at_cmd->add_option("--nodes", at.n_nodes, "cluster size");
    at_cmd->add_option("--replicas", at.replicas, "extra copies per block");
    auto* at_suc = at_cmd->add_option("--suc", at.suc, "successor list length");
    at_cmd->add_option("--stack-depth", at.stack_depth, "blocks stacked on the target");
    at_cmd->add_option("--fractions", at.fractions, "compromised fractions, comma separated");
    at_cmd->add_option("--trials", at.trials, "trials per fraction");
    auto* at_seed = at_cmd->add_option("--seed", at.seed, "PRNG seed");
    at_cmd->add_option("--out", at.out, "CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        std::uint64_t env = seed_from_env();
        if (*st_cmd) {
            kk::StorageParams p;
            p.nodes = kk::Range::parse(st.nodes);
            p.block_count = st.block_count;
            p.replicas = st.replicas;
            if (st_suc->count()) p.suc = st.suc;
            p.trials = st.trials;
            p.seed = st_seed->count() ? st.seed : env;
            p.mode = parse_mode(st.mode);
            return emit(kk::exp_storage(p), st.out);
        }
        if (*re_cmd) {
            kk::ReplicationParams p;
            p.n_nodes = re.n_nodes;
            p.block_count = re.block_count;
            p.replicas = kk::Range::parse(re.replicas);
            if (re_suc->count()) p.suc = re.suc;
            p.trials = re.trials;
            p.seed = re_seed->count() ? re.seed : env;
            p.mode = parse_mode(re.mode);
            return emit(kk::exp_replication(p), re.out);
        }
        if (*ux_cmd) {
            kk::UtxoBuildParams p;
            p.n_nodes = ux.n_nodes;
            p.block_count = kk::Range::parse(ux.counts);
            p.replicas = ux.replicas;
            if (ux_suc->count()) p.suc = ux.suc;
            p.trials = ux.trials;
            p.seed = ux_seed->count() ? ux.seed : env;
            p.mode = parse_mode(ux.mode);
            return emit(kk::exp_utxo_build(p), ux.out);
        }
        kk::AttackParams p;
        p.n_nodes = at.n_nodes;
        p.replicas = at.replicas;
        if (at_suc->count()) p.suc = at.suc;
        p.stack_depth = at.stack_depth;
        p.fractions = parse_fractions(at.fractions);
        p.trials = at.trials;
        p.seed = at_seed->count() ? at.seed : env;
        return emit(kk::exp_attack(p), at.out);
    } catch (const kk::InvalidParams& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const kk::BadM& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
