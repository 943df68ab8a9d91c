// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#include "thzdet/channel.hpp"

#include <array>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <ostream>

namespace thzdet {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double lgamma_s(double x) { return boost::math::lgamma(x); }

std::complex<double> randn_c(Rng &rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const double re = n01(rng);
    const double im = n01(rng);
    return {re, im};
}

double uniform_phase(Rng &rng) {
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    return u(rng);
}

} // namespace

void AlphaMuParams::validate() const {
    if (!(alpha > 0.0) || !(mu > 0.0) || !(mean > 0.0)) {
        throw ConfigInvalid("alpha-mu parameters must be positive");
    }
}

double AlphaMuParams::beta() const {
    return std::exp(lgamma_s(mu + 1.0 / alpha) - lgamma_s(mu));
}

void MixtureGammaParams::validate() const {
    if (components.empty()) throw ConfigInvalid("mixture gamma needs components");
    double wsum = 0.0;
    for (const auto &c : components) {
        if (!(c.weight >= 0.0) || !(c.shape > 0.0) || !(c.rate > 0.0)) {
            throw ConfigInvalid("mixture gamma component parameters invalid");
        }
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        throw ConfigInvalid("mixture gamma weights must sum to 1");
    }
}

void ArrayGeometry::validate() const {
    if (q_t() < 1 || q_r() < 1) throw ConfigInvalid("array needs at least one SA");
    if (ae_per_side < 1) throw ConfigInvalid("ae_per_side must be >= 1");
    if (ae_per_side > 1 && !(ae_spacing_m > 0.0)) {
        throw ConfigInvalid("ae_spacing_m must be positive");
    }
    if (!(sa_spacing_t_m > 0.0) || !(sa_spacing_r_m > 0.0)) {
        throw ConfigInvalid("SA spacings must be positive");
    }
}

void MultipathConfig::validate() const {
    if (!(carrier_hz > 0.0) || !(bandwidth_hz > 0.0)) {
        throw ConfigInvalid("carrier and bandwidth must be positive");
    }
    if (n_subcarriers < 1) throw ConfigInvalid("need at least one subcarrier");
    if (!(distance_m > 0.0)) throw ConfigInvalid("distance must be positive");
    if (los_delay_s < 0.0 || nlos_delay_spread_s < 0.0) {
        throw ConfigInvalid("delays must be non-negative");
    }
    if (n_clusters > 0 && rays_per_cluster < 1) {
        throw ConfigInvalid("rays_per_cluster must be >= 1 when clusters exist");
    }
}

double sample_alpha_mu(const AlphaMuParams &p, Rng &rng) {
    p.validate();
    std::gamma_distribution<double> g(p.mu, 1.0);
    const double gs = g(rng);
    return (p.mean / p.beta()) * std::pow(gs, 1.0 / p.alpha);
}

double alpha_mu_pdf(const AlphaMuParams &p, double x) {
    p.validate();
    if (x < 0.0) return 0.0;
    const double am = p.alpha * p.mu;
    if (x == 0.0) return (am > 1.0) ? 0.0 : alpha_mu_pdf(p, 1e-300);
    const double beta = p.beta();
    const double t = std::pow(beta * x / p.mean, p.alpha);
    const double lf = std::log(p.alpha) + am * std::log(beta) +
                      (am - 1.0) * std::log(x) - am * std::log(p.mean) -
                      lgamma_s(p.mu) - t;
    return std::exp(lf);
}

double alpha_mu_cdf(const AlphaMuParams &p, double x) {
    p.validate();
    if (x <= 0.0) return 0.0;
    const double t = std::pow(p.beta() * x / p.mean, p.alpha);
    return boost::math::gamma_p(p.mu, t);
}

double sample_mixture_gamma(const MixtureGammaParams &p, Rng &rng) {
    p.validate();
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double u = u01(rng);
    double acc = 0.0;
    const MixtureGammaComponent *chosen = &p.components.back();
    for (const auto &c : p.components) {
        acc += c.weight;
        if (u <= acc) {
            chosen = &c;
            break;
        }
    }
    std::gamma_distribution<double> g(chosen->shape, 1.0 / chosen->rate);
    return g(rng);
}

double mixture_gamma_pdf(const MixtureGammaParams &p, double x) {
    p.validate();
    if (x < 0.0) return 0.0;
    double f = 0.0;
    for (const auto &c : p.components) {
        if (x == 0.0 && c.shape < 1.0) continue;
        const double lf = std::log(c.rate) * c.shape + (c.shape - 1.0) * std::log(x) -
                          c.rate * x - lgamma_s(c.shape);
        f += c.weight * std::exp(lf);
    }
    return f;
}

double mixture_gamma_cdf(const MixtureGammaParams &p, double x) {
    p.validate();
    if (x <= 0.0) return 0.0;
    double f = 0.0;
    for (const auto &c : p.components) {
        f += c.weight * boost::math::gamma_p(c.shape, c.rate * x);
    }
    return f;
}

double fading_second_moment(const FadingSpec &spec) {
    if (std::holds_alternative<RayleighParams>(spec)) return 1.0;
    if (const auto *am = std::get_if<AlphaMuParams>(&spec)) {
        am->validate();
        const double b = am->beta();
        return (am->mean / b) * (am->mean / b) *
               std::exp(lgamma_s(am->mu + 2.0 / am->alpha) - lgamma_s(am->mu));
    }
    const auto &mg = std::get<MixtureGammaParams>(spec);
    mg.validate();
    double m2 = 0.0;
    for (const auto &c : mg.components) {
        m2 += c.weight * c.shape * (c.shape + 1.0) / (c.rate * c.rate);
    }
    return m2;
}

ChannelRealization gen_fading_matrix(arma::uword q_r, arma::uword q_t,
                                     const FadingSpec &fading, double pathloss,
                                     Rng &rng) {
    if (q_r < 1 || q_t < 1) throw ConfigInvalid("matrix dims must be >= 1");
    ChannelRealization out;
    out.h.set_size(q_r, q_t);
    if (std::holds_alternative<RayleighParams>(fading)) {
        out.model = "rayleigh";
        for (arma::uword j = 0; j < q_t; ++j) {
            for (arma::uword i = 0; i < q_r; ++i) {
                out.h(i, j) = pathloss * randn_c(rng) / std::sqrt(2.0);
            }
        }
        return out;
    }
    out.model = std::holds_alternative<AlphaMuParams>(fading) ? "alpha_mu"
                                                              : "mixture_gamma";
    for (arma::uword j = 0; j < q_t; ++j) {
        for (arma::uword i = 0; i < q_r; ++i) {
            const double mag =
                std::holds_alternative<AlphaMuParams>(fading)
                    ? sample_alpha_mu(std::get<AlphaMuParams>(fading), rng)
                    : sample_mixture_gamma(std::get<MixtureGammaParams>(fading), rng);
            const double ph = uniform_phase(rng);
            out.h(i, j) = pathloss * mag * std::complex<double>(std::cos(ph), std::sin(ph));
        }
    }
    return out;
}

namespace {

arma::mat exp_corr_sqrt(arma::uword n, double rho) {
    arma::mat r(n, n);
    for (arma::uword i = 0; i < n; ++i) {
        for (arma::uword j = 0; j < n; ++j) {
            r(i, j) = std::pow(rho, double(i > j ? i - j : j - i));
        }
    }
    arma::vec eval;
    arma::mat evec;
    if (!arma::eig_sym(eval, evec, r)) {
        throw NotPSD("correlation eigendecomposition failed");
    }
    for (arma::uword k = 0; k < n; ++k) {
        if (eval(k) < -1e-12) {
            throw NotPSD("correlation matrix has negative eigenvalue");
        }
        eval(k) = std::sqrt(std::max(eval(k), 0.0));
    }
    return evec * arma::diagmat(eval) * evec.t();
}

} // namespace

ChannelRealization apply_correlation(const ChannelRealization &h,
                                     const CorrelationSpec &spec) {
    if (spec.rho_r < 0.0 || spec.rho_r > 1.0 || spec.rho_t < 0.0 || spec.rho_t > 1.0) {
        throw ConfigInvalid("correlation coefficients must lie in [0, 1]");
    }
    ChannelRealization out = h;
    if (spec.rho_r == 0.0 && spec.rho_t == 0.0) return out;
    const arma::mat sr = exp_corr_sqrt(h.h.n_rows, spec.rho_r);
    const arma::mat st = exp_corr_sqrt(h.h.n_cols, spec.rho_t);
    const arma::cx_mat csr(sr, arma::mat(sr.n_rows, sr.n_cols, arma::fill::zeros));
    const arma::cx_mat cst(st, arma::mat(st.n_rows, st.n_cols, arma::fill::zeros));
    out.h = csr * h.h * cst;
    out.model = h.model + "+corr";
    return out;
}

double rayleigh_distance(double d_t_m, double d_r_m, double wavelength_m) {
    if (!(d_t_m > 0.0) || !(d_r_m > 0.0) || !(wavelength_m > 0.0)) {
        throw ConfigInvalid("rayleigh_distance inputs must be positive");
    }
    const double s = d_t_m + d_r_m;
    return 2.0 * s * s / wavelength_m;
}

double delta_opt(int z, double distance_m, arma::uword q_t, double carrier_hz) {
    if (z < 1 || z % 2 == 0) throw DomainError("delta_opt: z must be odd positive");
    if (!(distance_m > 0.0) || !(carrier_hz > 0.0) || q_t < 1) {
        throw ConfigInvalid("delta_opt inputs invalid");
    }
    return double(z) * distance_m * kSpeedOfLight / (double(q_t) * carrier_hz);
}

namespace {

// SA center coordinates in the array plane (y, z), centered on the origin.
std::vector<std::array<double, 2>> sa_centers(arma::uword rows, arma::uword cols,
                                              double spacing) {
    std::vector<std::array<double, 2>> out;
    out.reserve(rows * cols);
    const double cy = (double(rows) - 1.0) / 2.0;
    const double cz = (double(cols) - 1.0) / 2.0;
    for (arma::uword i = 0; i < rows; ++i) {
        for (arma::uword j = 0; j < cols; ++j) {
            out.push_back({(double(i) - cy) * spacing, (double(j) - cz) * spacing});
        }
    }
    return out;
}

// Planar-wave array factor of one SA (ae_per_side^2 grid) for a path in
// direction `ang` when the SA is steered towards `steer`, at wavelength
// `lambda`. Equals ae_per_side^2 when the path matches the steering.
std::complex<double> sa_array_factor(double az, double el, double az0, double el0,
                                     arma::uword ae_per_side, double ae_spacing,
                                     double lambda) {
    if (ae_per_side == 1) return {1.0, 0.0};
    const double uy = std::cos(el) * std::sin(az) - std::cos(el0) * std::sin(az0);
    const double uz = std::sin(el) - std::sin(el0);
    std::complex<double> sum_y(0.0, 0.0), sum_z(0.0, 0.0);
    for (arma::uword p = 0; p < ae_per_side; ++p) {
        const double phy = kTwoPi / lambda * ae_spacing * double(p) * uy;
        const double phz = kTwoPi / lambda * ae_spacing * double(p) * uz;
        sum_y += std::complex<double>(std::cos(phy), std::sin(phy));
        sum_z += std::complex<double>(std::cos(phz), std::sin(phz));
    }
    return sum_y * sum_z;  // separable rectangular grid
}

} // namespace

DrawnPaths draw_paths(const MultipathConfig &cfg, Rng &rng) {
    cfg.validate();
    DrawnPaths out;
    DrawnPaths::Path los;
    los.gain = cfg.los_gain;
    los.delay_s = cfg.los_delay_s;
    los.angles = cfg.los_angles;
    los.is_los = true;
    out.paths.push_back(los);

    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u01(
        std::nextafter(0.0, 1.0), 1.0);  // (0, 1]: NLoS strictly after LoS
    for (arma::uword c = 0; c < cfg.n_clusters; ++c) {
        const double p_cluster = cfg.nlos_gain_model.mean_power *
                                 std::pow(cfg.nlos_gain_model.cluster_power_decay,
                                          double(c));
        const double p_ray = p_cluster / double(cfg.rays_per_cluster);
        PathAngles center;
        center.az_t = cfg.nlos_angle_spread_rad * n01(rng);
        center.el_t = 0.5 * cfg.nlos_angle_spread_rad * n01(rng);
        center.az_r = cfg.nlos_angle_spread_rad * n01(rng);
        center.el_r = 0.5 * cfg.nlos_angle_spread_rad * n01(rng);
        const double cluster_delay = cfg.los_delay_s + u01(rng) * cfg.nlos_delay_spread_s;
        for (arma::uword l = 0; l < cfg.rays_per_cluster; ++l) {
            DrawnPaths::Path p;
            p.gain = std::sqrt(p_ray / 2.0) * randn_c(rng);
            p.angles = center;
            const double jitter = 0.1 * cfg.nlos_angle_spread_rad;
            p.angles.az_t += jitter * n01(rng);
            p.angles.el_t += jitter * n01(rng);
            p.angles.az_r += jitter * n01(rng);
            p.angles.el_r += jitter * n01(rng);
            p.delay_s = cluster_delay + 0.05 * cfg.nlos_delay_spread_s * u01(rng);
            out.paths.push_back(p);
        }
    }
    return out;
}

ChannelRealization assemble_subcarrier(const MultipathConfig &cfg,
                                       const ArrayGeometry &geom,
                                       const DrawnPaths &paths, arma::uword m) {
    cfg.validate();
    geom.validate();
    if (m >= cfg.n_subcarriers) throw ConfigInvalid("subcarrier index out of range");

    const arma::uword qt = geom.q_t();
    const arma::uword qr = geom.q_r();
    const auto ct = sa_centers(geom.sa_rows_t, geom.sa_cols_t, geom.sa_spacing_t_m);
    const auto cr = sa_centers(geom.sa_rows_r, geom.sa_cols_r, geom.sa_spacing_r_m);
    const double f_m = cfg.carrier_hz +
                       (double(m) / double(cfg.n_subcarriers) - 0.5) * cfg.bandwidth_hz;
    const double lambda_m = kSpeedOfLight / f_m;
    const double lambda_c = kSpeedOfLight / cfg.carrier_hz;
    const double d_ref = cfg.distance_m;

    ChannelRealization out;
    out.model = "thz_multipath";
    out.subcarrier = m;
    out.h.set_size(qr, qt);
    out.h.zeros();

    for (const auto &path : paths.paths) {
        // within-SA responses are common to all SA pairs under HSPWM; the
        // subcarrier frequency enters here, which carries the beam split
        const std::complex<double> at =
            sa_array_factor(path.angles.az_t, path.angles.el_t, cfg.los_angles.az_t,
                            cfg.los_angles.el_t, geom.ae_per_side, geom.ae_spacing_m,
                            lambda_m);
        const std::complex<double> ar =
            sa_array_factor(path.angles.az_r, path.angles.el_r, cfg.los_angles.az_r,
                            cfg.los_angles.el_r, geom.ae_per_side, geom.ae_spacing_m,
                            lambda_m);
        const std::complex<double> common = path.gain * cfg.g_t * cfg.g_r * at * ar;

        for (arma::uword j = 0; j < qt; ++j) {
            for (arma::uword i = 0; i < qr; ++i) {
                std::complex<double> term = common;
                double tau = path.delay_s;
                if (path.is_los) {
                    // spherical wave between SA centers, phase referenced to
                    // the array-center range (the bulk carrier phase lives in
                    // the supplied LoS gain)
                    const double dy = cr[i][0] - ct[j][0];
                    const double dz = cr[i][1] - ct[j][1];
                    const double dist = std::sqrt(d_ref * d_ref + dy * dy + dz * dz);
                    const double ph = -kTwoPi * (dist - d_ref) / lambda_c;
                    term *= std::complex<double>(std::cos(ph), std::sin(ph));
                    if (cfg.per_pair_los_delay) {
                        tau += (dist - d_ref) / kSpeedOfLight;
                    }
                } else {
                    // planar wave across SA centers at the path angles
                    const double ut_y = std::cos(path.angles.el_t) * std::sin(path.angles.az_t);
                    const double ut_z = std::sin(path.angles.el_t);
                    const double ur_y = std::cos(path.angles.el_r) * std::sin(path.angles.az_r);
                    const double ur_z = std::sin(path.angles.el_r);
                    const double ph = -kTwoPi / lambda_c *
                                      (ct[j][0] * ut_y + ct[j][1] * ut_z +
                                       cr[i][0] * ur_y + cr[i][1] * ur_z);
                    term *= std::complex<double>(std::cos(ph), std::sin(ph));
                }
                const double rot = -kTwoPi * (double(m) * cfg.bandwidth_hz /
                                              double(cfg.n_subcarriers)) * tau;
                term *= std::complex<double>(std::cos(rot), std::sin(rot));
                out.h(i, j) += term;
            }
        }
    }
    return out;
}

ChannelRealization gen_thz_multipath(const MultipathConfig &cfg,
                                     const ArrayGeometry &geom, arma::uword m,
                                     Rng &rng) {
    const DrawnPaths paths = draw_paths(cfg, rng);
    return assemble_subcarrier(cfg, geom, paths, m);
}

ChannelRealization gen_los_channel(const ArrayGeometry &geom, double distance_m,
                                   double carrier_hz) {
    geom.validate();
    if (!(distance_m > 0.0) || !(carrier_hz > 0.0)) {
        throw ConfigInvalid("gen_los_channel: distance and carrier must be positive");
    }
    const double lambda = kSpeedOfLight / carrier_hz;
    const auto ct = sa_centers(geom.sa_rows_t, geom.sa_cols_t, geom.sa_spacing_t_m);
    const auto cr = sa_centers(geom.sa_rows_r, geom.sa_cols_r, geom.sa_spacing_r_m);

    ChannelRealization out;
    out.model = "los";
    out.h.set_size(geom.q_r(), geom.q_t());
    for (arma::uword j = 0; j < geom.q_t(); ++j) {
        for (arma::uword i = 0; i < geom.q_r(); ++i) {
            const double dy = cr[i][0] - ct[j][0];
            const double dz = cr[i][1] - ct[j][1];
            const double dist =
                std::sqrt(distance_m * distance_m + dy * dy + dz * dz);
            const double amp = kSpeedOfLight / (4.0 * arma::datum::pi * carrier_hz * dist);
            const double ph = -kTwoPi * dist / lambda;
            out.h(i, j) = amp * std::complex<double>(std::cos(ph), std::sin(ph));
        }
    }
    return out;
}

WidebandChannel gen_wideband(const MultipathConfig &cfg, const ArrayGeometry &geom,
                             Rng &rng) {
    const DrawnPaths paths = draw_paths(cfg, rng);
    WidebandChannel wb;
    wb.subcarrier_spacing_hz = cfg.bandwidth_hz / double(cfg.n_subcarriers);
    wb.per_subcarrier.reserve(cfg.n_subcarriers);
    for (arma::uword m = 0; m < cfg.n_subcarriers; ++m) {
        wb.per_subcarrier.push_back(assemble_subcarrier(cfg, geom, paths, m));
    }
    return wb;
}

void dump_channel(const WidebandChannel &wb, std::ostream &os) {
    if (wb.per_subcarrier.empty()) throw IoError("nothing to dump");
    const auto &h0 = wb.per_subcarrier.front().h;
    os << h0.n_rows << " " << h0.n_cols << " " << wb.per_subcarrier.size() << "\n";
    char buf[80];
    for (const auto &real : wb.per_subcarrier) {
        for (arma::uword i = 0; i < real.h.n_rows; ++i) {
            for (arma::uword j = 0; j < real.h.n_cols; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g %.17g",
                              std::real(real.h(i, j)), std::imag(real.h(i, j)));
                os << buf << "\n";
            }
        }
    }
}

} // namespace thzdet
