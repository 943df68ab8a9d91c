// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#ifndef THZDET_DETECTORS_HPP
#define THZDET_DETECTORS_HPP

#include <armadillo>
#include <optional>
#include <vector>

#include "thzdet/constellation.hpp"
#include "thzdet/errors.hpp"
#include "thzdet/linalg.hpp"

namespace thzdet {

// Max-log LLR clamp when a counter-hypothesis is missing from a candidate
// list (K-Best and single-candidate detectors).
constexpr double kLlrMax = 50.0;

struct DetectorInput {
    cx_vec y;
    cx_mat h;
    double sigma2 = 1.0;  // total noise variance per complex entry
    const Constellation *constellation = nullptr;

    void validate() const;
};

struct DetectionResult {
    std::vector<std::size_t> hard;  // constellation indices, one per stream
    cx_vec symbols;                 // the same decisions as symbol values
    // max-log LLRs, log2|X| rows x Q_t columns; positive means bit 1
    std::optional<arma::mat> llrs;
    // Euclidean distance ||y - H x_hat||^2 of the hard decision
    double metric = 0.0;
    // for layered detectors: best candidate distance per decomposition, in
    // the metric that decomposition searched
    std::optional<std::vector<double>> layer_metrics;
};

struct SqldConfig {
    arma::uword eta = 0;  // number of punctured (WRD) decompositions
};

DetectionResult detect_ml(const DetectorInput &in);
DetectionResult detect_pml(const DetectorInput &in);
DetectionResult detect_zf(const DetectorInput &in);
DetectionResult detect_sic_zf(const DetectorInput &in, bool sorted);
DetectionResult detect_lr_zf(const DetectorInput &in);
DetectionResult detect_kbest(const DetectorInput &in, std::size_t k);
DetectionResult detect_lord(const DetectorInput &in);
DetectionResult detect_vlord(const DetectorInput &in);
DetectionResult detect_ssd(const DetectorInput &in);
DetectionResult detect_sqld(const DetectorInput &in, const SqldConfig &cfg);

// Precomputed per-layer decompositions of one channel matrix, so wideband
// operation can reuse them across subcarriers instead of refactorizing.
struct LayeredBank {
    std::vector<cx_mat> filt;       // Q or W of each decomposition
    std::vector<cx_mat> tri;        // R or Rdot
    std::vector<Permutation> perms;
    std::vector<bool> punctured;
};

// eta punctured decompositions as in SQLD; presort = identity and eta = 0
// gives the plain LORD bank, eta = Q_t the SSD bank.
LayeredBank make_layered_bank(const cx_mat &h, const Permutation &presort,
                              arma::uword eta);

// LORD/V-LORD/SSD/SQLD detection against a (possibly stale) bank.
DetectionResult detect_layered_with_bank(const DetectorInput &in,
                                         const LayeredBank &bank,
                                         bool vlord_hard);

// SIC against a (possibly stale) decomposition.
DetectionResult detect_sic_with(const DetectorInput &in, const Decomposition &dec);

} // namespace thzdet

#endif // THZDET_DETECTORS_HPP
