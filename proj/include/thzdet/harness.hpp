// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#ifndef THZDET_HARNESS_HPP
#define THZDET_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "thzdet/analysis.hpp"
#include "thzdet/channel.hpp"
#include "thzdet/constellation.hpp"
#include "thzdet/detectors.hpp"
#include "thzdet/rng.hpp"

namespace thzdet {

struct TrialBudget {
    std::uint64_t max_trials = 100000;
    std::uint64_t target_bit_errors = 200;  // early-stop floor
};

struct ChannelConfig {
    std::string model = "rayleigh";  // rayleigh|alpha_mu|mixture_gamma|thz_multipath|los
    arma::uword q_r = 4, q_t = 4;
    double pathloss = 1.0;
    std::optional<AlphaMuParams> alpha_mu;
    std::optional<MixtureGammaParams> mixture_gamma;
    CorrelationSpec correlation;
    std::optional<ArrayGeometry> geometry;
    std::optional<MultipathConfig> multipath;
    double los_distance_m = 1.0;
    double los_carrier_hz = 0.3e12;

    void validate() const;
};

struct DetectorConfig {
    std::string name;       // ml|pml|zf|sic|sic-sorted|lr-zf|kbest|lord|vlord|ssd|sqld
    std::size_t k = 16;     // kbest list size
    arma::uword eta = 0;    // sqld punctured-layer count
};

struct WidebandConfig {
    std::vector<double> reuse_p;     // P values to run (0 = recompute everywhere)
    std::string detector = "vlord";  // sic|lord|vlord|ssd|sqld
    arma::uword eta = 0;             // for sqld
};

struct PepConfig {
    arma::uword diff_index = 0;        // coordinate of the difference vector
    std::uint64_t sim_trials = 20000;  // event-frequency trials per point
    std::uint64_t bound_trials = 2000; // Monte Carlo bound trials per point
    std::size_t psi = 2;               // mixture size for the quadrature bound
};

struct OutputConfig {
    std::string dir = "out";
    std::string format = "csv";  // csv | plotdata
    bool timing = true;          // false: wall_time_s column written as 0.000
};

struct SimulationConfig {
    std::uint64_t seed = 0;
    std::vector<double> snr_db;
    TrialBudget budget;
    std::string constellation = "qam4";
    ChannelConfig channel;
    std::vector<DetectorConfig> detectors;
    std::optional<WidebandConfig> wideband;
    std::optional<PepConfig> pep;
    OutputConfig output;
    std::size_t workers = 0;  // 0: hardware concurrency

    void validate() const;
};

// Strict parser: unknown keys anywhere are hard errors (ConfigInvalid).
SimulationConfig parse_config_text(const std::string &json_text);
SimulationConfig load_config_file(const std::string &path);

// Canonical serialization used for hashing and the config snapshot.
std::string canonical_config(const SimulationConfig &cfg);
std::string config_hash_hex(const SimulationConfig &cfg);

struct ResultRecord {
    std::string detector;
    double snr_db = 0.0;
    double ber = 0.0;
    double ser = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t bit_errors = 0;
    double wall_time_s = 0.0;
    std::string config_hash;
};

struct PepRecord {
    double snr_db = 0.0;
    double estimate = 0.0;
    std::string method;
    std::uint64_t trials = 0;
    double std_error = 0.0;
};

// Per-(detector, SNR) Monte Carlo BER/SER with early stopping at the error
// floor, deterministic for any worker count (per-trial RNG substreams,
// chunked stopping decisions, ordered integer reduction).
std::vector<ResultRecord> run_ber_sweep(const SimulationConfig &cfg);

// Per-subcarrier detection with decompositions recomputed only on the
// reuse schedule; one set of records per P value (detector name gets a
// "@P=.." suffix).
std::vector<ResultRecord> run_wideband_reuse(const SimulationConfig &cfg);

// Simulated PEP, Monte Carlo upper bounds and the quadrature lower bound
// per SNR point.
std::vector<PepRecord> run_pep_experiment(const SimulationConfig &cfg);

// CSV (and optional plotdata series files) plus a config snapshot.
void emit_results(const std::vector<ResultRecord> &records,
                  const SimulationConfig &cfg);
void emit_pep_results(const std::vector<PepRecord> &records,
                      const SimulationConfig &cfg);

std::string results_csv_string(const std::vector<ResultRecord> &records,
                               bool timing);
std::vector<ResultRecord> parse_results_csv(std::istream &is);

// Mean per-entry channel power E|h|^2 used by the SNR normalization
// (per-receive-antenna average SNR = Es * E|h|^2 * Q_t / sigma2 with
// unit-energy constellations). Deterministic: fixed pilot substream.
double mean_entry_power(const ChannelConfig &cc, std::uint64_t seed);

// Per-trial channel draw (trial RNG advanced in a fixed order).
arma::cx_mat draw_channel(const ChannelConfig &cc, Rng &rng);

} // namespace thzdet

#endif // THZDET_HARNESS_HPP
