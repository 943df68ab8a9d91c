// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#ifndef THZDET_ANALYSIS_HPP
#define THZDET_ANALYSIS_HPP

#include <armadillo>
#include <functional>
#include <string>
#include <vector>

#include "thzdet/channel.hpp"
#include "thzdet/constellation.hpp"
#include "thzdet/errors.hpp"
#include "thzdet/rng.hpp"

namespace thzdet {

// All sigma2 arguments below are the total per-complex-entry noise variance
// (same convention as DetectorInput); the Q-function expressions internally
// use the per-real-dimension std sqrt(sigma2/2), which makes the simulated
// pairwise-error events match their conditional Q forms exactly.

enum class QVariant { exact, exp_bound, two_term };

// exact: 0.5 erfc(x/sqrt(2)); exp_bound: e^{-x^2/2} (upper bound for x>=0);
// two_term: e^{-x^2/2}/12 + e^{-2x^2/3}/4.
double q_func(double x, QVariant variant);

struct PepEstimate {
    double value = 0.0;
    std::string method;  // "monte-carlo", "bound-upper", "bound-lower-quadrature"
    std::uint64_t trials_or_nodes = 0;
    double std_error = 0.0;  // Monte Carlo standard error (0 for quadrature)
};

using ChannelSampler = std::function<arma::cx_mat(Rng &)>;

// E[X^k] = (mean/beta)^k Gamma(mu + k/alpha) / Gamma(mu).
double alpha_mu_moment(const AlphaMuParams &p, double k);

// Parameters of Y = X^2: (alpha/2, mu, mean = E[X^2]).
AlphaMuParams squared_params(const AlphaMuParams &p);

// Raw moments E[Z^n], n = 0..n_max, of Z = sum of the squared entries whose
// envelope parameters are given (binomial convolution of the per-entry
// squared-variate moments; log-domain inside).
std::vector<double> frobenius_moments(const std::vector<AlphaMuParams> &per_entry,
                                      std::size_t n_max);

struct FrobeniusApprox {
    std::size_t psi = 1;
    std::vector<double> c;      // mixture weights
    std::vector<double> omega;  // mixture scales
    double alpha_z = 1.0;
    double mu_z = 1.0;
    double beta_z = 1.0;
    double z_bar = 1.0;
};

// Fit {c_m, omega_m} so the mixture reproduces E[Z^n]/E[Z]^n for
// n = 0..2 psi - 2 together with the z->0 tail-coefficient constraint.
// Requires all entries to share the same alpha.
FrobeniusApprox moment_match(const std::vector<AlphaMuParams> &per_entry,
                             std::size_t psi);

double frobenius_pdf(const FrobeniusApprox &approx, double z);
double frobenius_cdf(const FrobeniusApprox &approx, double z);

// Monte Carlo average of the two-term expression in ||H d|| / (2 sigma).
PepEstimate pep_ml_bound(const ChannelSampler &h_sampler, const arma::cx_vec &d,
                         double sigma2, std::uint64_t trials, Rng &rng);

// use_true_w = false: two-term expression in ||Rdot d|| / (2 sigma sqrt(Q_r));
// use_true_w = true: exact conditional Q(||Rdot d||^2 / (2 sigma ||W Rdot d||)).
PepEstimate pep_pml_bound(const ChannelSampler &h_sampler, const arma::cx_vec &d,
                          double sigma2, std::uint64_t trials, bool use_true_w,
                          Rng &rng);

enum class PepDetector { ml, pml };

// Frequency of the pairwise decision event over channel/noise draws.
PepEstimate pep_simulate(const ChannelSampler &h_sampler, const arma::cx_vec &x1,
                         const arma::cx_vec &x2, double sigma2,
                         PepDetector detector, std::uint64_t trials, Rng &rng);

// Adaptive Gauss-Kronrod evaluation of
//   integral Q((||d||/(2 sigma)) sqrt(z)) f_Z(z) dz
// against the fitted mixture; absolute quadrature error below 1e-10.
PepEstimate pep_lower_bound(const FrobeniusApprox &approx, double d_norm2,
                            double sigma2);

// Ordered-pair difference space of the Q_t-fold constellation lattice.
struct DiffTerm {
    arma::cx_vec d;
    double bit_errors = 0.0;        // summed a(pair) over pairs with this d
    std::uint64_t pair_count = 0;
};

std::vector<DiffTerm> enumerate_differences(const Constellation &c,
                                            arma::uword q_t,
                                            std::uint64_t max_vectors = 4096);

// (1/|X|) sum over the difference multiset of a(d) Pr_p(d) with the two-term
// expectation bounds, averaged over `trials` channel draws.
double union_bound(PepDetector detector_bound, const Constellation &c,
                   arma::uword q_t, const ChannelSampler &h_sampler,
                   double sigma2, std::uint64_t trials, Rng &rng);

} // namespace thzdet

#endif // THZDET_ANALYSIS_HPP
