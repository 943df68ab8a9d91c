// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#ifndef THZDET_CHANNEL_HPP
#define THZDET_CHANNEL_HPP

#include <armadillo>
#include <complex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "thzdet/errors.hpp"
#include "thzdet/rng.hpp"

namespace thzdet {

constexpr double kSpeedOfLight = 299792458.0;  // m/s

struct AlphaMuParams {
    double alpha = 2.0;  // fading nonlinearity, > 0
    double mu = 1.0;     // normalized variance parameter, > 0
    double mean = 1.0;   // envelope mean, > 0

    void validate() const;
    double beta() const;  // Gamma(mu + 1/alpha) / Gamma(mu), derived only
};

struct MixtureGammaComponent {
    double weight = 1.0;
    double shape = 1.0;  // beta_i
    double rate = 1.0;   // zeta_i
};

struct MixtureGammaParams {
    std::vector<MixtureGammaComponent> components;
    void validate() const;  // weights sum to 1 within 1e-9, params positive
};

struct RayleighParams {};  // entries CN(0,1) scaled by the path loss

using FadingSpec = std::variant<RayleighParams, AlphaMuParams, MixtureGammaParams>;

struct CorrelationSpec {
    double rho_r = 0.0;
    double rho_t = 0.0;
};

// Subarray grids. Q_t = sa_rows_t * sa_cols_t SAs at the transmitter, each a
// square ae_per_side x ae_per_side element grid with spacing ae_spacing_m.
// SA centers are spaced sa_spacing_t_m / sa_spacing_r_m apart.
struct ArrayGeometry {
    arma::uword sa_rows_t = 1, sa_cols_t = 1;
    arma::uword sa_rows_r = 1, sa_cols_r = 1;
    arma::uword ae_per_side = 1;
    double ae_spacing_m = 0.0;
    double sa_spacing_t_m = 0.01;
    double sa_spacing_r_m = 0.01;

    arma::uword q_t() const { return sa_rows_t * sa_cols_t; }
    arma::uword q_r() const { return sa_rows_r * sa_cols_r; }
    void validate() const;
};

struct PathAngles {
    double az_t = 0.0, el_t = 0.0;  // departure
    double az_r = 0.0, el_r = 0.0;  // arrival
};

struct NlosGainModel {
    double cluster_power_decay = 1.0;  // per-cluster exponential decay factor
    double mean_power = 1.0;           // E|alpha|^2 of the first cluster
};

// Clustered multipath configuration for the frequency-domain SA-level model.
struct MultipathConfig {
    arma::uword n_clusters = 0;
    arma::uword rays_per_cluster = 0;
    double carrier_hz = 0.3e12;
    double bandwidth_hz = 1e9;
    arma::uword n_subcarriers = 1;
    double distance_m = 1.0;
    std::complex<double> los_gain{1.0, 0.0};
    NlosGainModel nlos_gain_model;
    double los_delay_s = 0.0;
    double nlos_delay_spread_s = 1e-9;  // NLoS delays: LoS + U(0,1]*spread
    double g_t = 1.0, g_r = 1.0;        // element gains
    PathAngles los_angles;              // boresight by default
    double nlos_angle_spread_rad = 0.5;
    bool per_pair_los_delay = true;     // LoS delay varies with SA-pair range

    void validate() const;
};

// One channel draw plus how it was produced.
struct ChannelRealization {
    arma::cx_mat h;
    std::string model;
    arma::uword subcarrier = 0;
};

struct WidebandChannel {
    std::vector<ChannelRealization> per_subcarrier;
    double subcarrier_spacing_hz = 0.0;
};

// --- small-scale fading -----------------------------------------------------

double sample_alpha_mu(const AlphaMuParams &p, Rng &rng);
double alpha_mu_pdf(const AlphaMuParams &p, double x);
double alpha_mu_cdf(const AlphaMuParams &p, double x);

double sample_mixture_gamma(const MixtureGammaParams &p, Rng &rng);
double mixture_gamma_pdf(const MixtureGammaParams &p, double x);
double mixture_gamma_cdf(const MixtureGammaParams &p, double x);

// Second moment E[X^2] of the fading law (used for SNR normalization).
double fading_second_moment(const FadingSpec &spec);

// i.i.d. fading matrix: |h| = pathloss * fading sample, phase U[0, 2pi).
ChannelRealization gen_fading_matrix(arma::uword q_r, arma::uword q_t,
                                     const FadingSpec &fading, double pathloss,
                                     Rng &rng);

// H_corr = R_r^{1/2} H R_t^{1/2} with exponential correlation matrices.
ChannelRealization apply_correlation(const ChannelRealization &h,
                                     const CorrelationSpec &spec);

// --- deterministic geometry -------------------------------------------------

double rayleigh_distance(double d_t_m, double d_r_m, double wavelength_m);

// Optimal SA spacing product for near-orthogonal LoS: z*D*c / (Q_t*f) with z
// odd. The value is the required product of transmit and receive spacings;
// splitting it evenly gives per-end spacing sqrt(delta_opt).
double delta_opt(int z, double distance_m, arma::uword q_t, double carrier_hz);

// LoS-only SA-level channel with spherical-wave phases between SA centers
// and free-space amplitude c / (4 pi f d).
ChannelRealization gen_los_channel(const ArrayGeometry &geom, double distance_m,
                                   double carrier_hz);

// --- clustered THz multipath -------------------------------------------------

// Paths drawn once from (cfg, rng); see gen_wideband for reuse across m.
struct DrawnPaths {
    struct Path {
        std::complex<double> gain;
        double delay_s = 0.0;
        PathAngles angles;
        bool is_los = false;
    };
    std::vector<Path> paths;
};

DrawnPaths draw_paths(const MultipathConfig &cfg, Rng &rng);

ChannelRealization assemble_subcarrier(const MultipathConfig &cfg,
                                       const ArrayGeometry &geom,
                                       const DrawnPaths &paths, arma::uword m);

ChannelRealization gen_thz_multipath(const MultipathConfig &cfg,
                                     const ArrayGeometry &geom, arma::uword m,
                                     Rng &rng);

// M realizations sharing one set of drawn paths; they differ only through
// the per-subcarrier phase rotations.
WidebandChannel gen_wideband(const MultipathConfig &cfg,
                             const ArrayGeometry &geom, Rng &rng);

// Textual dump: header "Q_r Q_t M", then one "re im" line per entry,
// row-major, subcarriers in order.
void dump_channel(const WidebandChannel &wb, std::ostream &os);

} // namespace thzdet

#endif // THZDET_CHANNEL_HPP
