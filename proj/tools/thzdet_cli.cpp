// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "thzdet/channel.hpp"
#include "thzdet/complexity.hpp"
#include "thzdet/harness.hpp"

namespace {

using namespace thzdet;

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::size_t workers = 0;
    std::string format;
};

SimulationConfig load_with_overrides(const CommonOpts &o) {
    SimulationConfig cfg = load_config_file(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out_dir.empty()) cfg.output.dir = o.out_dir;
    if (o.workers > 0) cfg.workers = o.workers;
    if (!o.format.empty()) cfg.output.format = o.format;
    cfg.validate();
    return cfg;
}

void add_common(CLI::App *app, CommonOpts &o, bool needs_config = true) {
    auto *c = app->add_option("--config", o.config_path, "configuration file (JSON)");
    if (needs_config) c->required();
    app->add_option("--seed", [&o](const std::vector<std::string> &v) {
        o.seed = std::stoull(v.front());
        return true;
    }, "override the config seed");
    app->add_option("--out", o.out_dir, "output directory");
    app->add_option("--workers", o.workers, "worker thread count (0 = hardware)");
    app->add_option("--format", o.format, "csv or plotdata")
        ->check(CLI::IsMember({"csv", "plotdata", ""}));
}

std::vector<double> parse_list_d(const std::string &s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

std::vector<std::uint64_t> parse_list_u(const std::string &s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
    return out;
}

int cmd_complexity(const std::string &qts, const std::string &consts,
                   const std::string &ps, std::uint64_t m, const std::string &fmt) {
    const auto qt_list = parse_list_u(qts);
    const auto cs_list = parse_list_u(consts);
    const auto p_list = parse_list_d(ps);
    const bool csv = (fmt == "csv");
    if (csv) {
        std::printf("scheme,q_t,const_size,m,p,radd,rmul,total\n");
    } else {
        std::printf("%-6s %4s %4s %4s %6s %12s %12s %12s\n", "scheme", "qt", "|M|",
                    "m", "P", "radd", "rmul", "total");
    }
    for (const char *scheme : {"sic", "lord", "ssd"}) {
        for (auto qt : qt_list) {
            for (auto cs : cs_list) {
                for (double p : p_list) {
                    std::optional<ReusePlan> plan;
                    if (p > 0.0) plan = reuse_plan(m, p);
                    const FlopCount f =
                        flops_detector(scheme_from_name(scheme), qt, cs, m, plan);
                    if (csv) {
                        std::printf("%s,%llu,%llu,%llu,%g,%llu,%llu,%llu\n", scheme,
                                    (unsigned long long)qt, (unsigned long long)cs,
                                    (unsigned long long)m, p,
                                    (unsigned long long)f.radd,
                                    (unsigned long long)f.rmul,
                                    (unsigned long long)f.total());
                    } else {
                        std::printf("%-6s %4llu %4llu %4llu %6g %12llu %12llu %12llu\n",
                                    scheme, (unsigned long long)qt,
                                    (unsigned long long)cs, (unsigned long long)m, p,
                                    (unsigned long long)f.radd,
                                    (unsigned long long)f.rmul,
                                    (unsigned long long)f.total());
                    }
                }
            }
        }
    }
    return 0;
}

int cmd_channel_dump(const CommonOpts &o) {
    SimulationConfig cfg = load_with_overrides(o);
    if (cfg.channel.model != "thz_multipath") {
        throw ConfigInvalid("channel-dump requires the thz_multipath model");
    }
    Rng rng = make_rng(cfg.seed);
    const WidebandChannel wb =
        gen_wideband(*cfg.channel.multipath, *cfg.channel.geometry, rng);
    std::filesystem::create_directories(cfg.output.dir);
    std::ofstream os(std::filesystem::path(cfg.output.dir) / "channel.txt",
                     std::ios::binary);
    if (!os) throw IoError("cannot write channel.txt");
    dump_channel(wb, os);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"thzdet: link-level MIMO detection laboratory"};
    app.require_subcommand(1);

    CommonOpts sweep_o, pep_o, wide_o, dump_o;
    auto *sweep = app.add_subcommand("sweep", "Monte Carlo BER/SER sweep");
    add_common(sweep, sweep_o);
    auto *pep = app.add_subcommand("pep", "pairwise error probability experiment");
    add_common(pep, pep_o);
    auto *wide = app.add_subcommand("wideband", "wideband QRD-reuse experiment");
    add_common(wide, wide_o);
    auto *dump = app.add_subcommand("channel-dump", "write a channel realization");
    add_common(dump, dump_o);

    std::string qts = "4,8,16", consts = "4,16", ps = "0,0.25,0.5", fmt = "text";
    std::uint64_t m = 8;
    auto *cplx = app.add_subcommand("complexity", "FLOPs model table");
    cplx->add_option("--qt", qts, "Q_t list (comma separated)");
    cplx->add_option("--const-size", consts, "constellation size list");
    cplx->add_option("--p", ps, "reuse reduction P list");
    cplx->add_option("--m", m, "subcarrier count");
    cplx->add_option("--format", fmt, "text or csv")
        ->check(CLI::IsMember({"text", "csv"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) {
            const SimulationConfig cfg = load_with_overrides(sweep_o);
            emit_results(run_ber_sweep(cfg), cfg);
        } else if (pep->parsed()) {
            const SimulationConfig cfg = load_with_overrides(pep_o);
            emit_pep_results(run_pep_experiment(cfg), cfg);
        } else if (wide->parsed()) {
            const SimulationConfig cfg = load_with_overrides(wide_o);
            emit_results(run_wideband_reuse(cfg), cfg);
            // model FLOPs for the Table rows at these dimensions, per P
            namespace fs = std::filesystem;
            std::ofstream os(fs::path(cfg.output.dir) / "flops.csv",
                             std::ios::binary);
            os << "scheme,p,radd,rmul,total\n";
            for (const char *scheme : {"sic", "lord", "ssd"}) {
                for (double p : cfg.wideband->reuse_p) {
                    std::optional<ReusePlan> plan;
                    if (p > 0.0) {
                        plan = reuse_plan(cfg.channel.multipath->n_subcarriers, p);
                    }
                    const FlopCount f = flops_detector(
                        scheme_from_name(scheme), cfg.channel.q_t,
                        Constellation::from_name(cfg.constellation).order(),
                        cfg.channel.multipath->n_subcarriers, plan);
                    char buf[128];
                    std::snprintf(buf, sizeof(buf), "%s,%g,%llu,%llu,%llu\n", scheme,
                                  p, (unsigned long long)f.radd,
                                  (unsigned long long)f.rmul,
                                  (unsigned long long)f.total());
                    os << buf;
                }
            }
        } else if (dump->parsed()) {
            return cmd_channel_dump(dump_o);
        } else if (cplx->parsed()) {
            return cmd_complexity(qts, consts, ps, m, fmt);
        }
    } catch (const std::exception &e) {
        // single machine-readable error line
        std::fprintf(stderr, "{\"error\":\"%s\"}\n", e.what());
        return 1;
    }
    return 0;
}
