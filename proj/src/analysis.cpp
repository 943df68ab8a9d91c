// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#include "thzdet/analysis.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <map>

#include "thzdet/linalg.hpp"

namespace thzdet {

namespace {

double lgamma_s(double x) { return boost::math::lgamma(x); }

double two_term(double x) {
    return std::exp(-0.5 * x * x) / 12.0 + std::exp(-2.0 * x * x / 3.0) / 4.0;
}

double sigma_paper(double sigma2) { return std::sqrt(0.5 * sigma2); }

double mc_std_error(double mean_of_vals, double mean_of_sq, std::uint64_t n) {
    if (n < 2) return 0.0;
    const double var = std::max(0.0, mean_of_sq - mean_of_vals * mean_of_vals);
    return std::sqrt(var / double(n));
}

} // namespace

double q_func(double x, QVariant variant) {
    switch (variant) {
        case QVariant::exact:
            return 0.5 * std::erfc(x / std::sqrt(2.0));
        case QVariant::exp_bound:
            return std::exp(-0.5 * x * x);
        case QVariant::two_term:
            return two_term(x);
    }
    throw Error("q_func: unknown variant");
}

double alpha_mu_moment(const AlphaMuParams &p, double k) {
    p.validate();
    if (k < 0.0) throw DomainError("alpha_mu_moment: k must be >= 0");
    if (k == 0.0) return 1.0;
    const double lg = lgamma_s(p.mu + k / p.alpha) - lgamma_s(p.mu);
    return std::pow(p.mean / p.beta(), k) * std::exp(lg);
}

AlphaMuParams squared_params(const AlphaMuParams &p) {
    p.validate();
    AlphaMuParams out;
    out.alpha = p.alpha / 2.0;
    out.mu = p.mu;
    out.mean = alpha_mu_moment(p, 2.0);
    return out;
}

std::vector<double> frobenius_moments(const std::vector<AlphaMuParams> &per_entry,
                                      std::size_t n_max) {
    if (per_entry.empty()) throw ConfigInvalid("frobenius_moments: empty list");
    if (n_max < 1) throw ConfigInvalid("frobenius_moments: n_max must be >= 1");

    // normalized by z_bar for stability; E[Z^n] = z_bar^n * normalized
    double z_bar = 0.0;
    for (const auto &p : per_entry) z_bar += alpha_mu_moment(p, 2.0);

    // moments of the running partial sum via binomial convolution, which is
    // the collapsed form of the nested multinomial expansion
    std::vector<double> acc(n_max + 1, 0.0);
    acc[0] = 1.0;
    std::vector<double> ym(n_max + 1);
    std::vector<double> next(n_max + 1);
    bool first = true;
    for (const auto &p : per_entry) {
        for (std::size_t k = 0; k <= n_max; ++k) {
            ym[k] = alpha_mu_moment(p, 2.0 * double(k)) / std::pow(z_bar, double(k));
        }
        if (first) {
            acc = ym;
            first = false;
            continue;
        }
        for (std::size_t n = 0; n <= n_max; ++n) {
            double s = 0.0;
            double binom = 1.0;
            for (std::size_t j = 0; j <= n; ++j) {
                s += binom * acc[j] * ym[n - j];
                binom *= double(n - j) / double(j + 1);
            }
            next[n] = s;
        }
        acc = next;
    }

    std::vector<double> out(n_max + 1);
    for (std::size_t n = 0; n <= n_max; ++n) {
        out[n] = acc[n] * std::pow(z_bar, double(n));
        if (!std::isfinite(out[n])) {
            throw Error("frobenius_moments: overflow at n=" + std::to_string(n));
        }
    }
    return out;
}

namespace {

// log of the z->0 tail-coefficient constraint right-hand side.
double log_tail_rhs(const std::vector<AlphaMuParams> &per_entry, double alpha_z,
                    double mu_z, double beta_z, double z_bar) {
    const double am = alpha_z * mu_z;
    const std::size_t big_l = per_entry.size();
    double lr = double(big_l - 1) * std::log(alpha_z) +
                am * std::log(z_bar / beta_z) + lgamma_s(mu_z) - lgamma_s(am);
    for (const auto &p : per_entry) {
        const AlphaMuParams y = squared_params(p);
        const double beta_i = y.beta();
        lr += alpha_z * y.mu * std::log(beta_i / y.mean);
        lr += lgamma_s(alpha_z * y.mu) - lgamma_s(y.mu);
    }
    return lr;
}

double log_xi(double n, double alpha_z, double mu_z) {
    return lgamma_s(mu_z + n / alpha_z) + (n - 1.0) * lgamma_s(mu_z) -
           n * lgamma_s(mu_z + 1.0 / alpha_z);
}

struct MomentSystem {
    std::vector<double> rhs_n;  // n = 0 .. 2 psi - 2
    double log_tail = 0.0;
    double am = 1.0;  // alpha_z * mu_z

    // residuals, moment equations scale-normalized, tail in log domain
    arma::vec residual(const arma::vec &cv, const arma::vec &wv) const {
        const std::size_t psi = cv.n_elem;
        arma::vec res(rhs_n.size() + 1);
        for (std::size_t n = 0; n < rhs_n.size(); ++n) {
            double s = 0.0;
            for (std::size_t m = 0; m < psi; ++m) {
                s += cv(m) * std::pow(wv(m), double(n));
            }
            res(n) = (s - rhs_n[n]) / std::max(1.0, std::abs(rhs_n[n]));
        }
        double lse = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < psi; ++m) {
            if (cv(m) <= 0.0 || wv(m) <= 0.0) return arma::vec(res.n_elem,
                                                               arma::fill::value(1e6));
            const double t = std::log(cv(m)) - am * std::log(wv(m));
            lse = std::max(lse, t) + std::log1p(std::exp(-std::abs(lse - t)));
            if (!std::isfinite(lse)) lse = t;
        }
        res(rhs_n.size()) = (lse - log_tail) / std::max(1.0, std::abs(log_tail));
        return res;
    }
};

} // namespace

FrobeniusApprox moment_match(const std::vector<AlphaMuParams> &per_entry,
                             std::size_t psi) {
    if (psi < 1) throw ConfigInvalid("moment_match: psi must be >= 1");
    if (per_entry.empty()) throw ConfigInvalid("moment_match: empty entry list");
    const double alpha0 = per_entry.front().alpha;
    for (const auto &p : per_entry) {
        p.validate();
        if (std::abs(p.alpha - alpha0) > 1e-12) {
            throw ConfigInvalid("moment_match: entries must share alpha");
        }
    }

    FrobeniusApprox fa;
    fa.psi = psi;
    fa.alpha_z = alpha0 / 2.0;
    fa.mu_z = 0.0;
    fa.z_bar = 0.0;
    for (const auto &p : per_entry) {
        fa.mu_z += p.mu;
        fa.z_bar += alpha_mu_moment(p, 2.0);
    }
    fa.beta_z = std::exp(lgamma_s(fa.mu_z + 1.0 / fa.alpha_z) - lgamma_s(fa.mu_z));

    MomentSystem sys;
    sys.am = fa.alpha_z * fa.mu_z;
    sys.log_tail = log_tail_rhs(per_entry, fa.alpha_z, fa.mu_z, fa.beta_z, fa.z_bar);
    const std::size_t n_eq = 2 * psi - 1;  // n = 0 .. 2 psi - 2
    const auto mom = frobenius_moments(per_entry, std::max<std::size_t>(1, n_eq - 1));
    sys.rhs_n.resize(n_eq);
    for (std::size_t n = 0; n < n_eq; ++n) {
        const double norm_mom = mom[n] / std::pow(fa.z_bar, double(n));
        sys.rhs_n[n] = norm_mom / std::exp(log_xi(double(n), fa.alpha_z, fa.mu_z));
    }

    if (psi == 1) {
        fa.c = {1.0};
        fa.omega = {std::exp(-sys.log_tail / sys.am)};
        return fa;
    }

    // damped Gauss-Newton over (c, omega) with multi-start omega grids
    const std::vector<double> starts = {0.5, 1.0, 2.0};
    arma::vec best_x;
    double best_res = std::numeric_limits<double>::infinity();
    const std::size_t dim = 2 * psi;

    std::vector<std::size_t> grid(psi, 0);
    while (true) {
        arma::vec x(dim);
        for (std::size_t m = 0; m < psi; ++m) {
            x(m) = 1.0 / double(psi);                    // c
            x(psi + m) = starts[grid[m]] * (1.0 + 1e-3 * double(m));  // omega
        }
        auto eval = [&](const arma::vec &xv) {
            return sys.residual(xv.head(psi), xv.tail(psi));
        };
        arma::vec r = eval(x);
        for (int it = 0; it < 300; ++it) {
            arma::mat jac(r.n_elem, dim);
            for (std::size_t p = 0; p < dim; ++p) {
                const double h = 1e-7 * std::max(1.0, std::abs(x(p)));
                arma::vec xp = x;
                xp(p) += h;
                jac.col(p) = (eval(xp) - r) / h;
            }
            arma::vec step;
            if (!arma::solve(step, jac.t() * jac + 1e-12 * arma::eye(dim, dim),
                             -jac.t() * r)) {
                break;
            }
            double lam = 1.0;
            bool improved = false;
            const double cur = arma::norm(r, "inf");
            for (int ls = 0; ls < 30; ++ls) {
                arma::vec xn = x + lam * step;
                arma::vec rn = eval(xn);
                if (arma::norm(rn, "inf") < cur) {
                    x = xn;
                    r = rn;
                    improved = true;
                    break;
                }
                lam *= 0.5;
            }
            if (!improved || arma::norm(r, "inf") < 1e-12) break;
        }
        const double rn = arma::norm(r, "inf");
        if (rn < best_res) {
            best_res = rn;
            best_x = x;
        }

        std::size_t g = 0;
        for (; g < psi; ++g) {
            if (++grid[g] < starts.size()) break;
            grid[g] = 0;
        }
        if (g == psi) break;
    }

    if (best_res > 1e-6) {
        throw SolverFailure("moment_match: residual " + std::to_string(best_res) +
                            " did not reach 1e-6");
    }
    fa.c.resize(psi);
    fa.omega.resize(psi);
    for (std::size_t m = 0; m < psi; ++m) {
        fa.c[m] = best_x(m);
        fa.omega[m] = best_x(psi + m);
    }
    return fa;
}

double frobenius_pdf(const FrobeniusApprox &fa, double z) {
    if (z < 0.0) throw DomainError("frobenius_pdf: z must be >= 0");
    const double am = fa.alpha_z * fa.mu_z;
    if (z == 0.0) return (am > 1.0) ? 0.0 : frobenius_pdf(fa, 1e-300);
    double f = 0.0;
    for (std::size_t m = 0; m < fa.c.size(); ++m) {
        const double lf = std::log(fa.alpha_z) + am * std::log(fa.beta_z) +
                          (am - 1.0) * std::log(z) -
                          am * std::log(fa.omega[m] * fa.z_bar) - lgamma_s(fa.mu_z) -
                          std::pow(fa.beta_z * z / (fa.omega[m] * fa.z_bar), fa.alpha_z);
        f += fa.c[m] * std::exp(lf);
    }
    return f;
}

double frobenius_cdf(const FrobeniusApprox &fa, double z) {
    if (z <= 0.0) return 0.0;
    double f = 0.0;
    for (std::size_t m = 0; m < fa.c.size(); ++m) {
        const double t = std::pow(fa.beta_z * z / (fa.omega[m] * fa.z_bar), fa.alpha_z);
        f += fa.c[m] * boost::math::gamma_p(fa.mu_z, t);
    }
    return f;
}

PepEstimate pep_ml_bound(const ChannelSampler &h_sampler, const arma::cx_vec &d,
                         double sigma2, std::uint64_t trials, Rng &rng) {
    if (trials < 1) throw ConfigInvalid("pep_ml_bound: trials must be >= 1");
    const double sp = sigma_paper(sigma2);
    double sum = 0.0, sum2 = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const arma::cx_mat h = h_sampler(rng);
        const double x = arma::norm(h * d) / (2.0 * sp);
        const double v = two_term(x);
        sum += v;
        sum2 += v * v;
    }
    PepEstimate e;
    e.value = std::min(1.0, sum / double(trials));
    e.method = "bound-upper";
    e.trials_or_nodes = trials;
    e.std_error = mc_std_error(sum / double(trials), sum2 / double(trials), trials);
    return e;
}

PepEstimate pep_pml_bound(const ChannelSampler &h_sampler, const arma::cx_vec &d,
                          double sigma2, std::uint64_t trials, bool use_true_w,
                          Rng &rng) {
    if (trials < 1) throw ConfigInvalid("pep_pml_bound: trials must be >= 1");
    const double sp = sigma_paper(sigma2);
    double sum = 0.0, sum2 = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const arma::cx_mat h = h_sampler(rng);
        const PuncturedDecomposition p = wrd(h);
        const arma::cx_vec rd = p.r_dot * d;
        double v;
        if (use_true_w) {
            const double num = std::real(arma::cdot(rd, rd));
            const double den = 2.0 * sp * arma::norm(p.w * rd);
            v = q_func(num / den, QVariant::exact);
        } else {
            v = two_term(arma::norm(rd) / (2.0 * sp * std::sqrt(double(h.n_rows))));
        }
        sum += v;
        sum2 += v * v;
    }
    PepEstimate e;
    e.value = std::min(1.0, sum / double(trials));
    e.method = "bound-upper";
    e.trials_or_nodes = trials;
    e.std_error = mc_std_error(sum / double(trials), sum2 / double(trials), trials);
    return e;
}

PepEstimate pep_simulate(const ChannelSampler &h_sampler, const arma::cx_vec &x1,
                         const arma::cx_vec &x2, double sigma2,
                         PepDetector detector, std::uint64_t trials, Rng &rng) {
    if (arma::norm(x1 - x2) == 0.0) {
        throw ConfigInvalid("pep_simulate: x2 must differ from x1");
    }
    const arma::cx_vec d = x2 - x1;
    std::normal_distribution<double> n01(0.0, 1.0);
    const double s_entry = std::sqrt(sigma2 / 2.0);  // per real dimension
    std::uint64_t hits = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const arma::cx_mat h = h_sampler(rng);
        arma::cx_vec n(h.n_rows);
        for (arma::uword i = 0; i < h.n_rows; ++i) {
            n(i) = cxd(s_entry * n01(rng), s_entry * n01(rng));
        }
        // y = H x1 + n, compare the decision metrics of x2 and x1
        const arma::cx_vec e2 = n - h * d;
        bool event;
        if (detector == PepDetector::ml) {
            event = std::real(arma::cdot(e2, e2)) <= std::real(arma::cdot(n, n));
        } else {
            const PuncturedDecomposition p = wrd(h);
            const arma::cx_vec f2 = p.w.t() * e2;
            const arma::cx_vec f1 = p.w.t() * n;
            event = std::real(arma::cdot(f2, f2)) <= std::real(arma::cdot(f1, f1));
        }
        if (event) ++hits;
    }
    PepEstimate e;
    e.value = double(hits) / double(trials);
    e.method = "monte-carlo";
    e.trials_or_nodes = trials;
    e.std_error = std::sqrt(std::max(e.value * (1.0 - e.value), 1e-12) /
                            double(trials));
    return e;
}

PepEstimate pep_lower_bound(const FrobeniusApprox &fa, double d_norm2,
                            double sigma2) {
    if (!(d_norm2 > 0.0)) throw DomainError("pep_lower_bound: d_norm2 must be > 0");
    const double sp = sigma_paper(sigma2);
    const double scale = std::sqrt(d_norm2) / (2.0 * sp);

    // upper limit: past it every mixture component's tail mass is < 1e-12
    double z_hi = 0.0;
    const double t_eps = boost::math::gamma_q_inv(fa.mu_z, 1e-13);
    for (double w : fa.omega) {
        z_hi = std::max(z_hi, (w * fa.z_bar / fa.beta_z) *
                                  std::pow(t_eps, 1.0 / fa.alpha_z));
    }

    double err = 0.0;
    const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [&](double z) {
            return q_func(scale * std::sqrt(z), QVariant::exact) *
                   frobenius_pdf(fa, z);
        },
        0.0, z_hi, 15, 1e-12, &err);
    if (!(err < 1e-10)) {
        throw QuadratureFailure("pep_lower_bound: quadrature error " +
                                std::to_string(err));
    }
    PepEstimate e;
    e.value = std::clamp(val, 0.0, 1.0);
    e.method = "bound-lower-quadrature";
    e.trials_or_nodes = 15;
    return e;
}

std::vector<DiffTerm> enumerate_differences(const Constellation &c,
                                            arma::uword q_t,
                                            std::uint64_t max_vectors) {
    const std::size_t q = c.order();
    double total = 1.0;
    for (arma::uword j = 0; j < q_t; ++j) total *= double(q);
    if (total > double(max_vectors)) {
        throw TooLarge("enumerate_differences: lattice exceeds enumeration guard");
    }
    const auto n_vec = std::uint64_t(total);

    auto symbol_at = [&](std::uint64_t code, arma::uword j) {
        for (arma::uword t = 0; t < j; ++t) code /= q;
        return std::size_t(code % q);
    };

    std::map<std::vector<long long>, DiffTerm> terms;
    for (std::uint64_t a = 0; a < n_vec; ++a) {
        for (std::uint64_t b = 0; b < n_vec; ++b) {
            if (a == b) continue;
            std::vector<long long> key(2 * q_t);
            arma::cx_vec d(q_t);
            double bits = 0.0;
            for (arma::uword j = 0; j < q_t; ++j) {
                const std::size_t sa = symbol_at(a, j);
                const std::size_t sb = symbol_at(b, j);
                d(j) = c.point(sb) - c.point(sa);
                key[2 * j] = std::llround((std::real(d(j)) / c.axis_scale()));
                key[2 * j + 1] = std::llround((std::imag(d(j)) / c.axis_scale()));
                for (std::size_t i = 0; i < c.bits_per_symbol(); ++i) {
                    bits += double(c.bit(sa, i) != c.bit(sb, i));
                }
            }
            auto it = terms.find(key);
            if (it == terms.end()) {
                DiffTerm term;
                term.d = d;
                term.bit_errors = bits;
                term.pair_count = 1;
                terms.emplace(std::move(key), std::move(term));
            } else {
                it->second.bit_errors += bits;
                it->second.pair_count += 1;
            }
        }
    }
    std::vector<DiffTerm> out;
    out.reserve(terms.size());
    for (auto &kv : terms) out.push_back(std::move(kv.second));
    return out;
}

double union_bound(PepDetector detector_bound, const Constellation &c,
                   arma::uword q_t, const ChannelSampler &h_sampler,
                   double sigma2, std::uint64_t trials, Rng &rng) {
    if (trials < 1) throw ConfigInvalid("union_bound: trials must be >= 1");
    const auto terms = enumerate_differences(c, q_t);
    const double sp = sigma_paper(sigma2);

    double acc = 0.0;
    for (std::uint64_t t = 0; t < trials; ++t) {
        const arma::cx_mat h = h_sampler(rng);
        double draw = 0.0;
        if (detector_bound == PepDetector::ml) {
            for (const auto &term : terms) {
                draw += term.bit_errors * two_term(arma::norm(h * term.d) / (2.0 * sp));
            }
        } else {
            const PuncturedDecomposition p = wrd(h);
            const double qr_sqrt = std::sqrt(double(h.n_rows));
            for (const auto &term : terms) {
                draw += term.bit_errors *
                        two_term(arma::norm(p.r_dot * term.d) / (2.0 * sp * qr_sqrt));
            }
        }
        acc += draw;
    }
    return acc / double(trials) / double(c.order());
}

} // namespace thzdet
