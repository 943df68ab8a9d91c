// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#include "thzdet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

#include "thzdet/complexity.hpp"

namespace thzdet {

using nlohmann::json;

namespace {

constexpr std::uint64_t kChunkTrials = 250;  // stopping-decision granularity
constexpr std::uint64_t kPilotDraws = 64;    // SNR-normalization pilot draws
constexpr std::uint64_t kPilotTag = 0xC0FFEEULL;

void check_keys(const json &j, const std::vector<std::string> &allowed,
                const std::string &ctx) {
    if (!j.is_object()) throw ConfigInvalid(ctx + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw ConfigInvalid(ctx + ": unknown key '" + it.key() + "'");
        }
    }
}

template <typename T>
T get_or(const json &j, const char *key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

} // namespace

void ChannelConfig::validate() const {
    if (q_r < 1 || q_t < 1) throw ConfigInvalid("channel: dims must be >= 1");
    const bool iid = (model == "rayleigh" || model == "alpha_mu" ||
                      model == "mixture_gamma");
    if (model == "alpha_mu") {
        if (!alpha_mu) throw ConfigInvalid("channel: alpha_mu params required");
        alpha_mu->validate();
    } else if (model == "mixture_gamma") {
        if (!mixture_gamma) throw ConfigInvalid("channel: mixture_gamma params required");
        mixture_gamma->validate();
    } else if (model == "thz_multipath") {
        if (!multipath || !geometry) {
            throw ConfigInvalid("channel: thz_multipath needs multipath and geometry");
        }
        multipath->validate();
        geometry->validate();
        if (geometry->q_r() != q_r || geometry->q_t() != q_t) {
            throw ConfigInvalid("channel: geometry SA counts disagree with q_r/q_t");
        }
    } else if (model == "los") {
        if (!geometry) throw ConfigInvalid("channel: los needs geometry");
        geometry->validate();
        if (geometry->q_r() != q_r || geometry->q_t() != q_t) {
            throw ConfigInvalid("channel: geometry SA counts disagree with q_r/q_t");
        }
        if (!(los_distance_m > 0.0) || !(los_carrier_hz > 0.0)) {
            throw ConfigInvalid("channel: los distance/carrier must be positive");
        }
    } else if (!iid) {
        throw ConfigInvalid("channel: unknown model '" + model + "'");
    }
    if (!iid && (correlation.rho_r != 0.0 || correlation.rho_t != 0.0)) {
        throw ConfigInvalid("channel: correlation applies to the i.i.d. fading models only");
    }
}

void SimulationConfig::validate() const {
    if (snr_db.empty()) throw ConfigInvalid("snr_db must be non-empty");
    if (!std::is_sorted(snr_db.begin(), snr_db.end())) {
        throw ConfigInvalid("snr_db must be sorted ascending");
    }
    if (budget.max_trials < 1) throw ConfigInvalid("trials.max must be >= 1");
    Constellation::from_name(constellation);
    channel.validate();
    for (const auto &d : detectors) {
        static const std::vector<std::string> names = {
            "ml", "pml", "zf", "sic", "sic-sorted", "lr-zf",
            "kbest", "lord", "vlord", "ssd", "sqld"};
        if (std::find(names.begin(), names.end(), d.name) == names.end()) {
            throw ConfigInvalid("unknown detector '" + d.name + "'");
        }
        if (d.name == "sqld" && d.eta > channel.q_t) {
            throw ConfigInvalid("sqld: eta must lie in [0, Q_t]");
        }
    }
    if (wideband) {
        if (channel.model != "thz_multipath") {
            throw ConfigInvalid("wideband requires the thz_multipath channel model");
        }
        if (wideband->reuse_p.empty()) throw ConfigInvalid("wideband.reuse_p empty");
        for (double p : wideband->reuse_p) {
            if (!(p >= 0.0 && p < 1.0)) throw ConfigInvalid("wideband P must lie in [0,1)");
        }
        static const std::vector<std::string> wb = {"sic", "lord", "vlord", "ssd", "sqld"};
        if (std::find(wb.begin(), wb.end(), wideband->detector) == wb.end()) {
            throw ConfigInvalid("wideband detector must be sic/lord/vlord/ssd/sqld");
        }
    }
    if (output.format != "csv" && output.format != "plotdata") {
        throw ConfigInvalid("output.format must be csv or plotdata");
    }
}

// --------------------------------------------------------------------------
// config parsing

namespace {

AlphaMuParams parse_alpha_mu(const json &j) {
    check_keys(j, {"alpha", "mu", "mean"}, "alpha_mu");
    AlphaMuParams p;
    p.alpha = j.at("alpha").get<double>();
    p.mu = j.at("mu").get<double>();
    p.mean = get_or(j, "mean", 1.0);
    return p;
}

MixtureGammaParams parse_mixture_gamma(const json &j) {
    check_keys(j, {"components"}, "mixture_gamma");
    MixtureGammaParams p;
    for (const auto &cj : j.at("components")) {
        check_keys(cj, {"weight", "shape", "rate"}, "mixture_gamma.components");
        MixtureGammaComponent c;
        c.weight = cj.at("weight").get<double>();
        c.shape = cj.at("shape").get<double>();
        c.rate = cj.at("rate").get<double>();
        p.components.push_back(c);
    }
    return p;
}

ArrayGeometry parse_geometry(const json &j) {
    check_keys(j,
               {"sa_rows_t", "sa_cols_t", "sa_rows_r", "sa_cols_r", "ae_per_side",
                "ae_spacing_m", "sa_spacing_t_m", "sa_spacing_r_m"},
               "geometry");
    ArrayGeometry g;
    g.sa_rows_t = get_or<std::uint64_t>(j, "sa_rows_t", 1);
    g.sa_cols_t = get_or<std::uint64_t>(j, "sa_cols_t", 1);
    g.sa_rows_r = get_or<std::uint64_t>(j, "sa_rows_r", 1);
    g.sa_cols_r = get_or<std::uint64_t>(j, "sa_cols_r", 1);
    g.ae_per_side = get_or<std::uint64_t>(j, "ae_per_side", 1);
    g.ae_spacing_m = get_or(j, "ae_spacing_m", 0.0);
    g.sa_spacing_t_m = get_or(j, "sa_spacing_t_m", 0.01);
    g.sa_spacing_r_m = get_or(j, "sa_spacing_r_m", 0.01);
    return g;
}

MultipathConfig parse_multipath(const json &j) {
    check_keys(j,
               {"n_clusters", "rays_per_cluster", "carrier_hz", "bandwidth_hz",
                "n_subcarriers", "distance_m", "los_gain_re", "los_gain_im",
                "los_delay_s", "nlos_delay_spread_s", "nlos_mean_power",
                "nlos_cluster_decay", "g_t", "g_r", "nlos_angle_spread_rad",
                "per_pair_los_delay"},
               "multipath");
    MultipathConfig m;
    m.n_clusters = get_or<std::uint64_t>(j, "n_clusters", 0);
    m.rays_per_cluster = get_or<std::uint64_t>(j, "rays_per_cluster", 0);
    m.carrier_hz = get_or(j, "carrier_hz", 0.3e12);
    m.bandwidth_hz = get_or(j, "bandwidth_hz", 1e9);
    m.n_subcarriers = get_or<std::uint64_t>(j, "n_subcarriers", 1);
    m.distance_m = get_or(j, "distance_m", 1.0);
    m.los_gain = {get_or(j, "los_gain_re", 1.0), get_or(j, "los_gain_im", 0.0)};
    m.los_delay_s = get_or(j, "los_delay_s", 0.0);
    m.nlos_delay_spread_s = get_or(j, "nlos_delay_spread_s", 1e-9);
    m.nlos_gain_model.mean_power = get_or(j, "nlos_mean_power", 1.0);
    m.nlos_gain_model.cluster_power_decay = get_or(j, "nlos_cluster_decay", 1.0);
    m.g_t = get_or(j, "g_t", 1.0);
    m.g_r = get_or(j, "g_r", 1.0);
    m.nlos_angle_spread_rad = get_or(j, "nlos_angle_spread_rad", 0.5);
    m.per_pair_los_delay = get_or(j, "per_pair_los_delay", true);
    return m;
}

ChannelConfig parse_channel(const json &j) {
    check_keys(j,
               {"model", "q_r", "q_t", "pathloss", "alpha_mu", "mixture_gamma",
                "correlation", "geometry", "multipath", "los_distance_m",
                "los_carrier_hz"},
               "channel");
    ChannelConfig c;
    c.model = j.at("model").get<std::string>();
    c.q_r = get_or<std::uint64_t>(j, "q_r", 4);
    c.q_t = get_or<std::uint64_t>(j, "q_t", 4);
    c.pathloss = get_or(j, "pathloss", 1.0);
    if (j.contains("alpha_mu")) c.alpha_mu = parse_alpha_mu(j.at("alpha_mu"));
    if (j.contains("mixture_gamma")) {
        c.mixture_gamma = parse_mixture_gamma(j.at("mixture_gamma"));
    }
    if (j.contains("correlation")) {
        check_keys(j.at("correlation"), {"rho_r", "rho_t"}, "correlation");
        c.correlation.rho_r = get_or(j.at("correlation"), "rho_r", 0.0);
        c.correlation.rho_t = get_or(j.at("correlation"), "rho_t", 0.0);
    }
    if (j.contains("geometry")) c.geometry = parse_geometry(j.at("geometry"));
    if (j.contains("multipath")) c.multipath = parse_multipath(j.at("multipath"));
    c.los_distance_m = get_or(j, "los_distance_m", 1.0);
    c.los_carrier_hz = get_or(j, "los_carrier_hz", 0.3e12);
    return c;
}

} // namespace

SimulationConfig parse_config_text(const std::string &json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception &e) {
        throw ConfigInvalid(std::string("config parse error: ") + e.what());
    }
    check_keys(j,
               {"seed", "snr_db", "trials", "constellation", "channel",
                "detectors", "wideband", "pep", "output", "workers"},
               "config");
    SimulationConfig cfg;
    if (!j.contains("seed")) {
        throw ConfigInvalid("config: 'seed' is required (no entropy-source default)");
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.snr_db = get_or<std::vector<double>>(j, "snr_db", {});
    if (j.contains("trials")) {
        check_keys(j.at("trials"), {"max", "target_bit_errors"}, "trials");
        cfg.budget.max_trials = get_or<std::uint64_t>(j.at("trials"), "max", 100000);
        cfg.budget.target_bit_errors =
            get_or<std::uint64_t>(j.at("trials"), "target_bit_errors", 200);
    }
    cfg.constellation = get_or<std::string>(j, "constellation", "qam4");
    if (j.contains("channel")) cfg.channel = parse_channel(j.at("channel"));
    if (j.contains("detectors")) {
        for (const auto &dj : j.at("detectors")) {
            check_keys(dj, {"name", "k", "eta"}, "detectors[]");
            DetectorConfig d;
            d.name = dj.at("name").get<std::string>();
            d.k = get_or<std::uint64_t>(dj, "k", 16);
            d.eta = get_or<std::uint64_t>(dj, "eta", 0);
            cfg.detectors.push_back(std::move(d));
        }
    }
    if (j.contains("wideband")) {
        check_keys(j.at("wideband"), {"reuse_p", "detector", "eta"}, "wideband");
        WidebandConfig w;
        w.reuse_p = get_or<std::vector<double>>(j.at("wideband"), "reuse_p", {0.0});
        w.detector = get_or<std::string>(j.at("wideband"), "detector", "vlord");
        w.eta = get_or<std::uint64_t>(j.at("wideband"), "eta", 0);
        cfg.wideband = std::move(w);
    }
    if (j.contains("pep")) {
        check_keys(j.at("pep"), {"diff_index", "sim_trials", "bound_trials", "psi"},
                   "pep");
        PepConfig p;
        p.diff_index = get_or<std::uint64_t>(j.at("pep"), "diff_index", 0);
        p.sim_trials = get_or<std::uint64_t>(j.at("pep"), "sim_trials", 20000);
        p.bound_trials = get_or<std::uint64_t>(j.at("pep"), "bound_trials", 2000);
        p.psi = get_or<std::uint64_t>(j.at("pep"), "psi", 2);
        cfg.pep = std::move(p);
    }
    if (j.contains("output")) {
        check_keys(j.at("output"), {"dir", "format", "timing"}, "output");
        cfg.output.dir = get_or<std::string>(j.at("output"), "dir", "out");
        cfg.output.format = get_or<std::string>(j.at("output"), "format", "csv");
        cfg.output.timing = get_or(j.at("output"), "timing", true);
    }
    cfg.workers = get_or<std::uint64_t>(j, "workers", 0);
    cfg.validate();
    return cfg;
}

SimulationConfig load_config_file(const std::string &path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

std::string canonical_config(const SimulationConfig &cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["snr_db"] = cfg.snr_db;
    j["trials"] = {{"max", cfg.budget.max_trials},
                   {"target_bit_errors", cfg.budget.target_bit_errors}};
    j["constellation"] = cfg.constellation;
    json ch;
    ch["model"] = cfg.channel.model;
    ch["q_r"] = std::uint64_t(cfg.channel.q_r);
    ch["q_t"] = std::uint64_t(cfg.channel.q_t);
    ch["pathloss"] = cfg.channel.pathloss;
    if (cfg.channel.alpha_mu) {
        ch["alpha_mu"] = {{"alpha", cfg.channel.alpha_mu->alpha},
                          {"mu", cfg.channel.alpha_mu->mu},
                          {"mean", cfg.channel.alpha_mu->mean}};
    }
    if (cfg.channel.mixture_gamma) {
        json comps = json::array();
        for (const auto &c : cfg.channel.mixture_gamma->components) {
            comps.push_back({{"weight", c.weight}, {"shape", c.shape}, {"rate", c.rate}});
        }
        ch["mixture_gamma"] = {{"components", comps}};
    }
    ch["correlation"] = {{"rho_r", cfg.channel.correlation.rho_r},
                         {"rho_t", cfg.channel.correlation.rho_t}};
    if (cfg.channel.geometry) {
        const auto &g = *cfg.channel.geometry;
        ch["geometry"] = {{"sa_rows_t", std::uint64_t(g.sa_rows_t)},
                          {"sa_cols_t", std::uint64_t(g.sa_cols_t)},
                          {"sa_rows_r", std::uint64_t(g.sa_rows_r)},
                          {"sa_cols_r", std::uint64_t(g.sa_cols_r)},
                          {"ae_per_side", std::uint64_t(g.ae_per_side)},
                          {"ae_spacing_m", g.ae_spacing_m},
                          {"sa_spacing_t_m", g.sa_spacing_t_m},
                          {"sa_spacing_r_m", g.sa_spacing_r_m}};
    }
    if (cfg.channel.multipath) {
        const auto &m = *cfg.channel.multipath;
        ch["multipath"] = {{"n_clusters", std::uint64_t(m.n_clusters)},
                           {"rays_per_cluster", std::uint64_t(m.rays_per_cluster)},
                           {"carrier_hz", m.carrier_hz},
                           {"bandwidth_hz", m.bandwidth_hz},
                           {"n_subcarriers", std::uint64_t(m.n_subcarriers)},
                           {"distance_m", m.distance_m},
                           {"los_gain_re", std::real(m.los_gain)},
                           {"los_gain_im", std::imag(m.los_gain)},
                           {"los_delay_s", m.los_delay_s},
                           {"nlos_delay_spread_s", m.nlos_delay_spread_s},
                           {"nlos_mean_power", m.nlos_gain_model.mean_power},
                           {"nlos_cluster_decay", m.nlos_gain_model.cluster_power_decay},
                           {"g_t", m.g_t},
                           {"g_r", m.g_r},
                           {"nlos_angle_spread_rad", m.nlos_angle_spread_rad},
                           {"per_pair_los_delay", m.per_pair_los_delay}};
    }
    ch["los_distance_m"] = cfg.channel.los_distance_m;
    ch["los_carrier_hz"] = cfg.channel.los_carrier_hz;
    j["channel"] = std::move(ch);
    json dets = json::array();
    for (const auto &d : cfg.detectors) {
        dets.push_back({{"name", d.name}, {"k", std::uint64_t(d.k)},
                        {"eta", std::uint64_t(d.eta)}});
    }
    j["detectors"] = std::move(dets);
    if (cfg.wideband) {
        j["wideband"] = {{"reuse_p", cfg.wideband->reuse_p},
                         {"detector", cfg.wideband->detector},
                         {"eta", std::uint64_t(cfg.wideband->eta)}};
    }
    if (cfg.pep) {
        j["pep"] = {{"diff_index", std::uint64_t(cfg.pep->diff_index)},
                    {"sim_trials", cfg.pep->sim_trials},
                    {"bound_trials", cfg.pep->bound_trials},
                    {"psi", std::uint64_t(cfg.pep->psi)}};
    }
    j["output"] = {{"dir", cfg.output.dir},
                   {"format", cfg.output.format},
                   {"timing", cfg.output.timing}};
    return j.dump();
}

std::string config_hash_hex(const SimulationConfig &cfg) {
    // FNV-1a over the canonical serialization; the output dir and timing
    // flag do not change the science, but hashing the full canonical form
    // keeps the rule simple and documented.
    const std::string s = canonical_config(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// --------------------------------------------------------------------------
// channel drawing and SNR normalization

arma::cx_mat draw_channel(const ChannelConfig &cc, Rng &rng) {
    if (cc.model == "rayleigh") {
        return gen_fading_matrix(cc.q_r, cc.q_t, RayleighParams{}, cc.pathloss, rng).h;
    }
    if (cc.model == "alpha_mu") {
        ChannelRealization h =
            gen_fading_matrix(cc.q_r, cc.q_t, *cc.alpha_mu, cc.pathloss, rng);
        if (cc.correlation.rho_r != 0.0 || cc.correlation.rho_t != 0.0) {
            h = apply_correlation(h, cc.correlation);
        }
        return h.h;
    }
    if (cc.model == "mixture_gamma") {
        ChannelRealization h =
            gen_fading_matrix(cc.q_r, cc.q_t, *cc.mixture_gamma, cc.pathloss, rng);
        if (cc.correlation.rho_r != 0.0 || cc.correlation.rho_t != 0.0) {
            h = apply_correlation(h, cc.correlation);
        }
        return h.h;
    }
    if (cc.model == "thz_multipath") {
        return gen_thz_multipath(*cc.multipath, *cc.geometry, 0, rng).h;
    }
    if (cc.model == "los") {
        return gen_los_channel(*cc.geometry, cc.los_distance_m, cc.los_carrier_hz).h;
    }
    throw ConfigInvalid("unknown channel model: " + cc.model);
}

double mean_entry_power(const ChannelConfig &cc, std::uint64_t seed) {
    cc.validate();
    if (cc.model == "rayleigh") return cc.pathloss * cc.pathloss;
    if (cc.model == "alpha_mu") {
        return cc.pathloss * cc.pathloss * fading_second_moment(*cc.alpha_mu);
    }
    if (cc.model == "mixture_gamma") {
        return cc.pathloss * cc.pathloss * fading_second_moment(*cc.mixture_gamma);
    }
    // geometric models: fixed pilot substream, deterministic in the seed
    Rng rng = make_rng(substream_seed(seed, kPilotTag));
    double acc = 0.0;
    const std::uint64_t draws = (cc.model == "los") ? 1 : kPilotDraws;
    for (std::uint64_t i = 0; i < draws; ++i) {
        const arma::cx_mat h = draw_channel(cc, rng);
        acc += std::pow(arma::norm(h, "fro"), 2) / double(h.n_elem);
    }
    return acc / double(draws);
}

// --------------------------------------------------------------------------
// Monte Carlo engine

namespace {

using DetectFn = std::function<DetectionResult(const DetectorInput &)>;

DetectFn make_detector(const DetectorConfig &d) {
    if (d.name == "ml") return [](const DetectorInput &in) { return detect_ml(in); };
    if (d.name == "pml") return [](const DetectorInput &in) { return detect_pml(in); };
    if (d.name == "zf") return [](const DetectorInput &in) { return detect_zf(in); };
    if (d.name == "sic") {
        return [](const DetectorInput &in) { return detect_sic_zf(in, false); };
    }
    if (d.name == "sic-sorted") {
        return [](const DetectorInput &in) { return detect_sic_zf(in, true); };
    }
    if (d.name == "lr-zf") {
        return [](const DetectorInput &in) { return detect_lr_zf(in); };
    }
    if (d.name == "kbest") {
        const std::size_t k = d.k;
        return [k](const DetectorInput &in) { return detect_kbest(in, k); };
    }
    if (d.name == "lord") return [](const DetectorInput &in) { return detect_lord(in); };
    if (d.name == "vlord") {
        return [](const DetectorInput &in) { return detect_vlord(in); };
    }
    if (d.name == "ssd") return [](const DetectorInput &in) { return detect_ssd(in); };
    if (d.name == "sqld") {
        const SqldConfig sc{d.eta};
        return [sc](const DetectorInput &in) { return detect_sqld(in, sc); };
    }
    throw ConfigInvalid("unknown detector '" + d.name + "'");
}

struct TrialCounts {
    std::uint64_t bit_errors = 0;
    std::uint64_t sym_errors = 0;
    double detect_seconds = 0.0;
};

std::size_t resolve_workers(std::size_t requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Run `body(trial_index, worker_slot)` for every index in [t0, t1) across
// the workers. Index assignment is static, so any worker count produces the
// same per-trial results.
void parallel_trials(std::uint64_t t0, std::uint64_t t1, std::size_t workers,
                     const std::function<void(std::uint64_t, std::size_t)> &body) {
    const std::uint64_t count = t1 - t0;
    if (workers <= 1 || count < 2) {
        for (std::uint64_t t = t0; t < t1; ++t) body(t, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::uint64_t t = t0 + w; t < t1; t += workers) body(t, w);
        });
    }
    for (auto &th : pool) th.join();
}

} // namespace

std::vector<ResultRecord> run_ber_sweep(const SimulationConfig &cfg) {
    cfg.validate();
    if (cfg.detectors.empty()) throw ConfigInvalid("sweep: no detectors configured");
    const Constellation c = Constellation::from_name(cfg.constellation);
    const std::size_t bps = c.bits_per_symbol();
    const arma::uword qt = cfg.channel.q_t;
    const double eh2 = mean_entry_power(cfg.channel, cfg.seed);
    const std::string hash = config_hash_hex(cfg);
    const std::size_t workers = resolve_workers(cfg.workers);
    const std::size_t n_det = cfg.detectors.size();

    std::vector<DetectFn> fns;
    fns.reserve(n_det);
    for (const auto &d : cfg.detectors) fns.push_back(make_detector(d));

    std::vector<ResultRecord> records;
    for (std::size_t pi = 0; pi < cfg.snr_db.size(); ++pi) {
        const double snr_lin = std::pow(10.0, cfg.snr_db[pi] / 10.0);
        const double sigma2 = eh2 * double(qt) / snr_lin;

        std::vector<TrialCounts> totals(n_det);
        std::vector<std::uint64_t> trials_done(n_det, 0);
        std::vector<bool> active(n_det, true);
        std::string failure;

        std::uint64_t t0 = 0;
        while (t0 < cfg.budget.max_trials &&
               std::any_of(active.begin(), active.end(), [](bool a) { return a; })) {
            const std::uint64_t t1 =
                std::min(cfg.budget.max_trials, t0 + kChunkTrials);
            std::vector<std::vector<TrialCounts>> partial(
                workers, std::vector<TrialCounts>(n_det));
            std::mutex fail_mu;

            parallel_trials(t0, t1, workers, [&](std::uint64_t t, std::size_t w) {
                Rng rng = make_rng(substream_seed(cfg.seed, pi, t));
                DetectorInput in;
                in.h = draw_channel(cfg.channel, rng);
                in.sigma2 = sigma2;
                in.constellation = &c;
                std::uniform_int_distribution<std::size_t> usym(0, c.order() - 1);
                std::vector<std::size_t> tx(qt);
                cx_vec x(qt);
                for (arma::uword j = 0; j < qt; ++j) {
                    tx[j] = usym(rng);
                    x(j) = c.point(tx[j]);
                }
                std::normal_distribution<double> n01(0.0, 1.0);
                const double s = std::sqrt(sigma2 / 2.0);
                cx_vec noise(cfg.channel.q_r);
                for (arma::uword i = 0; i < cfg.channel.q_r; ++i) {
                    noise(i) = cxd(s * n01(rng), s * n01(rng));
                }
                in.y = in.h * x + noise;

                for (std::size_t di = 0; di < n_det; ++di) {
                    if (!active[di]) continue;
                    try {
                        const auto tic = std::chrono::steady_clock::now();
                        const DetectionResult res = fns[di](in);
                        const auto toc = std::chrono::steady_clock::now();
                        partial[w][di].detect_seconds +=
                            std::chrono::duration<double>(toc - tic).count();
                        for (arma::uword j = 0; j < qt; ++j) {
                            if (res.hard[j] != tx[j]) {
                                partial[w][di].sym_errors += 1;
                                for (std::size_t b = 0; b < bps; ++b) {
                                    partial[w][di].bit_errors +=
                                        std::uint64_t(c.bit(res.hard[j], b) !=
                                                      c.bit(tx[j], b));
                                }
                            }
                        }
                    } catch (const Error &e) {
                        std::lock_guard<std::mutex> lk(fail_mu);
                        failure = e.what();
                    }
                }
            });
            if (!failure.empty()) break;

            for (std::size_t di = 0; di < n_det; ++di) {
                if (!active[di]) continue;
                for (std::size_t w = 0; w < workers; ++w) {
                    totals[di].bit_errors += partial[w][di].bit_errors;
                    totals[di].sym_errors += partial[w][di].sym_errors;
                    totals[di].detect_seconds += partial[w][di].detect_seconds;
                }
                trials_done[di] = t1;
                if (totals[di].bit_errors >= cfg.budget.target_bit_errors) {
                    active[di] = false;
                }
            }
            t0 = t1;
        }

        for (std::size_t di = 0; di < n_det; ++di) {
            ResultRecord r;
            r.detector = cfg.detectors[di].name;
            if (cfg.detectors[di].name == "sqld") {
                r.detector += "(eta=" + std::to_string(cfg.detectors[di].eta) + ")";
            }
            r.snr_db = cfg.snr_db[pi];
            r.config_hash = hash;
            if (!failure.empty()) {
                r.ber = std::nan("");
                r.ser = std::nan("");
            } else {
                r.trials = trials_done[di];
                r.bit_errors = totals[di].bit_errors;
                r.ber = double(totals[di].bit_errors) /
                        (double(trials_done[di]) * double(qt) * double(bps));
                r.ser = double(totals[di].sym_errors) /
                        (double(trials_done[di]) * double(qt));
                r.wall_time_s = totals[di].detect_seconds;
            }
            records.push_back(std::move(r));
        }
    }
    return records;
}

// --------------------------------------------------------------------------

std::vector<ResultRecord> run_wideband_reuse(const SimulationConfig &cfg) {
    cfg.validate();
    if (!cfg.wideband) throw ConfigInvalid("wideband spec missing");
    const WidebandConfig &wb = *cfg.wideband;
    const MultipathConfig &mp = *cfg.channel.multipath;
    const ArrayGeometry &geom = *cfg.channel.geometry;
    const arma::uword big_m = mp.n_subcarriers;
    const Constellation c = Constellation::from_name(cfg.constellation);
    const std::size_t bps = c.bits_per_symbol();
    const arma::uword qt = cfg.channel.q_t;
    const arma::uword qr = cfg.channel.q_r;
    const double eh2 = [&] {
        Rng rng = make_rng(substream_seed(cfg.seed, kPilotTag));
        double acc = 0.0;
        for (std::uint64_t i = 0; i < kPilotDraws; ++i) {
            const WidebandChannel ch = gen_wideband(mp, geom, rng);
            double s = 0.0;
            for (const auto &re : ch.per_subcarrier) {
                s += std::pow(arma::norm(re.h, "fro"), 2) / double(re.h.n_elem);
            }
            acc += s / double(big_m);
        }
        return acc / double(kPilotDraws);
    }();
    const std::string hash = config_hash_hex(cfg);
    const std::size_t workers = resolve_workers(cfg.workers);

    std::vector<ReusePlan> plans;
    plans.reserve(wb.reuse_p.size());
    for (double p : wb.reuse_p) plans.push_back(reuse_plan(big_m, p));
    const std::size_t n_p = plans.size();

    const bool use_sic = (wb.detector == "sic");
    const bool vlord_hard = (wb.detector == "vlord");
    const arma::uword eta = (wb.detector == "ssd") ? qt
                            : (wb.detector == "sqld") ? wb.eta
                                                      : 0;
    const bool presorted = (wb.detector == "sqld");

    std::vector<ResultRecord> records;
    for (std::size_t pi = 0; pi < cfg.snr_db.size(); ++pi) {
        const double snr_lin = std::pow(10.0, cfg.snr_db[pi] / 10.0);
        const double sigma2 = eh2 * double(qt) / snr_lin;

        std::vector<TrialCounts> totals(n_p);
        std::vector<std::uint64_t> trials_done(n_p, 0);
        std::vector<bool> active(n_p, true);

        std::uint64_t t0 = 0;
        while (t0 < cfg.budget.max_trials &&
               std::any_of(active.begin(), active.end(), [](bool a) { return a; })) {
            const std::uint64_t t1 =
                std::min(cfg.budget.max_trials, t0 + kChunkTrials);
            std::vector<std::vector<TrialCounts>> partial(
                workers, std::vector<TrialCounts>(n_p));

            parallel_trials(t0, t1, workers, [&](std::uint64_t t, std::size_t w) {
                Rng rng = make_rng(substream_seed(cfg.seed, pi, t));
                const WidebandChannel ch = gen_wideband(mp, geom, rng);
                std::uniform_int_distribution<std::size_t> usym(0, c.order() - 1);
                std::normal_distribution<double> n01(0.0, 1.0);
                const double s = std::sqrt(sigma2 / 2.0);

                std::vector<std::vector<std::size_t>> tx(big_m);
                std::vector<cx_vec> ys(big_m);
                for (arma::uword m = 0; m < big_m; ++m) {
                    tx[m].resize(qt);
                    cx_vec x(qt);
                    for (arma::uword j = 0; j < qt; ++j) {
                        tx[m][j] = usym(rng);
                        x(j) = c.point(tx[m][j]);
                    }
                    cx_vec noise(qr);
                    for (arma::uword i = 0; i < qr; ++i) {
                        noise(i) = cxd(s * n01(rng), s * n01(rng));
                    }
                    ys[m] = ch.per_subcarrier[m].h * x + noise;
                }

                for (std::size_t ppi = 0; ppi < n_p; ++ppi) {
                    if (!active[ppi]) continue;
                    const auto tic = std::chrono::steady_clock::now();
                    LayeredBank bank;
                    Decomposition sic_dec;
                    std::uint64_t bank_src = std::uint64_t(-1);
                    for (arma::uword m = 0; m < big_m; ++m) {
                        const std::uint64_t src = plans[ppi].source_of(m);
                        if (src != bank_src) {
                            const cx_mat &hsrc = ch.per_subcarrier[src].h;
                            if (use_sic) {
                                sic_dec = qrd(hsrc);
                            } else {
                                bank = make_layered_bank(
                                    hsrc,
                                    presorted ? vblast_order(hsrc)
                                              : Permutation::identity(qt),
                                    eta);
                            }
                            bank_src = src;
                        }
                        DetectorInput in;
                        in.y = ys[m];
                        in.h = ch.per_subcarrier[m].h;
                        in.sigma2 = sigma2;
                        in.constellation = &c;
                        const DetectionResult res =
                            use_sic ? detect_sic_with(in, sic_dec)
                                    : detect_layered_with_bank(in, bank, vlord_hard);
                        for (arma::uword j = 0; j < qt; ++j) {
                            if (res.hard[j] != tx[m][j]) {
                                partial[w][ppi].sym_errors += 1;
                                for (std::size_t b = 0; b < bps; ++b) {
                                    partial[w][ppi].bit_errors +=
                                        std::uint64_t(c.bit(res.hard[j], b) !=
                                                      c.bit(tx[m][j], b));
                                }
                            }
                        }
                    }
                    const auto toc = std::chrono::steady_clock::now();
                    partial[w][ppi].detect_seconds +=
                        std::chrono::duration<double>(toc - tic).count();
                }
            });

            for (std::size_t ppi = 0; ppi < n_p; ++ppi) {
                if (!active[ppi]) continue;
                for (std::size_t w = 0; w < workers; ++w) {
                    totals[ppi].bit_errors += partial[w][ppi].bit_errors;
                    totals[ppi].sym_errors += partial[w][ppi].sym_errors;
                    totals[ppi].detect_seconds += partial[w][ppi].detect_seconds;
                }
                trials_done[ppi] = t1;
                if (totals[ppi].bit_errors >= cfg.budget.target_bit_errors) {
                    active[ppi] = false;
                }
            }
            t0 = t1;
        }

        for (std::size_t ppi = 0; ppi < n_p; ++ppi) {
            ResultRecord r;
            char label[64];
            std::snprintf(label, sizeof(label), "%s@P=%g", wb.detector.c_str(),
                          wb.reuse_p[ppi]);
            r.detector = label;
            r.snr_db = cfg.snr_db[pi];
            r.trials = trials_done[ppi];
            r.bit_errors = totals[ppi].bit_errors;
            const double denom = double(trials_done[ppi]) * double(big_m) *
                                 double(qt);
            r.ber = double(totals[ppi].bit_errors) / (denom * double(bps));
            r.ser = double(totals[ppi].sym_errors) / denom;
            r.wall_time_s = totals[ppi].detect_seconds;
            r.config_hash = hash;
            records.push_back(std::move(r));
        }
    }
    return records;
}

// --------------------------------------------------------------------------

std::vector<PepRecord> run_pep_experiment(const SimulationConfig &cfg) {
    cfg.validate();
    if (!cfg.pep) throw ConfigInvalid("pep spec missing");
    const PepConfig &pc = *cfg.pep;
    const Constellation c = Constellation::from_name(cfg.constellation);
    const arma::uword qt = cfg.channel.q_t;
    if (pc.diff_index >= qt) throw ConfigInvalid("pep.diff_index out of range");
    const double eh2 = mean_entry_power(cfg.channel, cfg.seed);

    // fixed difference: nearest neighbour of the first constellation point
    std::size_t nb = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 1; s < c.order(); ++s) {
        const double d2 = std::norm(c.point(s) - c.point(0));
        if (d2 < best) {
            best = d2;
            nb = s;
        }
    }
    cx_vec x1(qt, arma::fill::value(c.point(0)));
    cx_vec x2 = x1;
    x2(pc.diff_index) = c.point(nb);
    const cx_vec d = x2 - x1;

    // quadrature lower bound: available for the independent alpha-mu model
    std::optional<FrobeniusApprox> fa;
    if (cfg.channel.model == "alpha_mu") {
        AlphaMuParams entry = *cfg.channel.alpha_mu;
        entry.mean *= cfg.channel.pathloss;  // scale closure
        fa = moment_match(std::vector<AlphaMuParams>(qt * cfg.channel.q_r, entry),
                          pc.psi);
    }

    std::vector<PepRecord> out;
    for (std::size_t pi = 0; pi < cfg.snr_db.size(); ++pi) {
        const double snr_lin = std::pow(10.0, cfg.snr_db[pi] / 10.0);
        const double sigma2 = eh2 * double(qt) / snr_lin;

        // the channel stream is owned by the sampler so the simulated and
        // bound estimators see identical draws (paired comparison)
        auto paired_sampler = [&]() {
            auto rng = std::make_shared<Rng>(
                make_rng(substream_seed(cfg.seed, pi, 0x9a1e)));
            return ChannelSampler(
                [rng, &cfg](Rng &) { return draw_channel(cfg.channel, *rng); });
        };

        auto push = [&](const PepEstimate &e, const std::string &method) {
            PepRecord r;
            r.snr_db = cfg.snr_db[pi];
            r.estimate = e.value;
            r.method = method;
            r.trials = e.trials_or_nodes;
            r.std_error = e.std_error;
            out.push_back(std::move(r));
        };

        Rng aux = make_rng(substream_seed(cfg.seed, pi, 0xa0b1));
        push(pep_simulate(paired_sampler(), x1, x2, sigma2, PepDetector::ml,
                          pc.sim_trials, aux),
             "sim-ml");
        push(pep_simulate(paired_sampler(), x1, x2, sigma2, PepDetector::pml,
                          pc.sim_trials, aux),
             "sim-pml");
        push(pep_ml_bound(paired_sampler(), d, sigma2, pc.bound_trials, aux),
             "upper-ml");
        push(pep_pml_bound(paired_sampler(), d, sigma2, pc.bound_trials, false, aux),
             "upper-pml");
        push(pep_pml_bound(paired_sampler(), d, sigma2, pc.bound_trials, true, aux),
             "upper-pml-w");
        if (fa) {
            push(pep_lower_bound(*fa, std::real(arma::cdot(d, d)), sigma2),
                 "lower-quadrature");
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// results emission

namespace {

std::string format_record(const ResultRecord &r, bool timing) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%.6g,%.12e,%.12e,%llu,%llu,%.3f,%s",
                  r.detector.c_str(), r.snr_db, r.ber, r.ser,
                  static_cast<unsigned long long>(r.trials),
                  static_cast<unsigned long long>(r.bit_errors),
                  timing ? r.wall_time_s : 0.0, r.config_hash.c_str());
    return std::string(buf);
}

} // namespace

std::string results_csv_string(const std::vector<ResultRecord> &records,
                               bool timing) {
    std::string out = "detector,snr_db,ber,ser,trials,bit_errors,wall_time_s,config_hash\n";
    for (const auto &r : records) {
        out += format_record(r, timing);
        out += "\n";
    }
    return out;
}

void emit_results(const std::vector<ResultRecord> &records,
                  const SimulationConfig &cfg) {
    if (records.empty()) throw IoError("emit_results: no records");
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output.dir);
    {
        std::ofstream os(fs::path(cfg.output.dir) / "results.csv",
                         std::ios::binary);
        if (!os) throw IoError("cannot write results.csv");
        os << results_csv_string(records, cfg.output.timing);
    }
    {
        std::ofstream os(fs::path(cfg.output.dir) / "config.json", std::ios::binary);
        if (!os) throw IoError("cannot write config snapshot");
        os << canonical_config(cfg) << "\n";
    }
    if (cfg.output.format == "plotdata") {
        std::vector<std::string> names;
        for (const auto &r : records) {
            if (std::find(names.begin(), names.end(), r.detector) == names.end()) {
                names.push_back(r.detector);
            }
        }
        for (const auto &name : names) {
            std::string fname = name;
            for (char &ch : fname) {
                if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
            }
            std::ofstream os(fs::path(cfg.output.dir) / (fname + ".dat"),
                             std::ios::binary);
            if (!os) throw IoError("cannot write plotdata series");
            char buf[80];
            for (const auto &r : records) {
                if (r.detector != name) continue;
                std::snprintf(buf, sizeof(buf), "%.6g %.12e\n", r.snr_db, r.ber);
                os << buf;
            }
        }
    }
}

void emit_pep_results(const std::vector<PepRecord> &records,
                      const SimulationConfig &cfg) {
    if (records.empty()) throw IoError("emit_pep_results: no records");
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output.dir);
    std::ofstream os(fs::path(cfg.output.dir) / "pep.csv", std::ios::binary);
    if (!os) throw IoError("cannot write pep.csv");
    os << "snr_db,estimate,method,trials,stderr\n";
    char buf[160];
    for (const auto &r : records) {
        std::snprintf(buf, sizeof(buf), "%.6g,%.12e,%s,%llu,%.6e\n", r.snr_db,
                      r.estimate, r.method.c_str(),
                      static_cast<unsigned long long>(r.trials), r.std_error);
        os << buf;
    }
    std::ofstream cs(fs::path(cfg.output.dir) / "config.json", std::ios::binary);
    cs << canonical_config(cfg) << "\n";
}

std::vector<ResultRecord> parse_results_csv(std::istream &is) {
    std::vector<ResultRecord> out;
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty CSV");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 8) throw IoError("malformed CSV row: " + line);
        ResultRecord r;
        r.detector = f[0];
        r.snr_db = std::stod(f[1]);
        r.ber = std::stod(f[2]);
        r.ser = std::stod(f[3]);
        r.trials = std::stoull(f[4]);
        r.bit_errors = std::stoull(f[5]);
        r.wall_time_s = std::stod(f[6]);
        r.config_hash = f[7];
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace thzdet
