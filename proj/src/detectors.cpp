// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#include "thzdet/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace thzdet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double canonical_metric(const cx_vec &y, const cx_mat &h, const cx_vec &x) {
    const cx_vec r = y - h * x;
    return std::real(arma::cdot(r, r));
}

cx_vec symbols_of(const Constellation &c, const std::vector<std::size_t> &idx) {
    cx_vec out(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) out(j) = c.point(idx[j]);
    return out;
}

// Fill `res.symbols` and the canonical metric from `res.hard`.
void finish(DetectionResult &res, const DetectorInput &in) {
    res.symbols = symbols_of(*in.constellation, res.hard);
    res.metric = canonical_metric(in.y, in.h, res.symbols);
}

std::size_t slice(const Constellation &c, cxd v) { return c.nearest(v); }

// Per-stream max-log LLRs around a scalar equalized observation.
void scalar_llrs(const Constellation &c, cxd obs, double noise_var,
                 arma::mat &llrs, arma::uword col) {
    for (std::size_t i = 0; i < c.bits_per_symbol(); ++i) {
        double best[2] = {kInf, kInf};
        for (int b = 0; b < 2; ++b) {
            for (std::size_t idx : c.bit_partition_set(i, b)) {
                best[b] = std::min(best[b], std::norm(obs - c.point(idx)));
            }
        }
        llrs(i, col) = (best[0] - best[1]) / noise_var;
    }
}

} // namespace

void DetectorInput::validate() const {
    if (constellation == nullptr) throw ConfigInvalid("missing constellation");
    if (h.n_rows != y.n_elem) throw ConfigInvalid("y/H dimension mismatch");
    if (h.n_cols < 1) throw ConfigInvalid("H must have at least one column");
    if (!(sigma2 > 0.0)) throw ConfigInvalid("sigma2 must be positive");
}

// --------------------------------------------------------------------------
// ML: exhaustive search with counter-hypothesis tracking (odometer with
// incremental column updates).

DetectionResult detect_ml(const DetectorInput &in) {
    in.validate();
    const Constellation &c = *in.constellation;
    const arma::uword n = in.h.n_cols;
    const std::size_t q = c.order();
    const std::size_t bits = c.bits_per_symbol();

    double total = 1.0;
    for (arma::uword j = 0; j < n; ++j) total *= double(q);
    if (total > double(1u << 24)) {
        throw TooLarge("detect_ml: candidate count exceeds 2^24");
    }

    std::vector<std::size_t> digits(n, 0);
    cx_vec accum = in.y;
    for (arma::uword j = 0; j < n; ++j) accum -= in.h.col(j) * c.point(0);

    arma::cube best_bit(bits, n, 2);
    best_bit.fill(kInf);
    double d_ml = kInf;
    std::vector<std::size_t> x_ml(n, 0);

    while (true) {
        const double d = std::real(arma::cdot(accum, accum));
        if (d < d_ml) {
            d_ml = d;
            x_ml = digits;
        }
        for (arma::uword j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < bits; ++i) {
                double &slot = best_bit(i, j, std::size_t(c.bit(digits[j], i)));
                if (d < slot) slot = d;
            }
        }
        // advance the odometer, updating the residual one column at a time
        arma::uword j = 0;
        for (; j < n; ++j) {
            const std::size_t old = digits[j];
            const std::size_t next = (old + 1) % q;
            digits[j] = next;
            accum -= in.h.col(j) * (c.point(next) - c.point(old));
            if (next != 0) break;
        }
        if (j == n) break;
    }

    DetectionResult res;
    res.hard = x_ml;
    res.llrs = arma::mat(bits, n);
    for (arma::uword j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < bits; ++i) {
            (*res.llrs)(i, j) = best_bit(i, j, 0) - best_bit(i, j, 1);
        }
    }
    finish(res, in);
    return res;
}

// --------------------------------------------------------------------------
// PML: exhaustive search of the punctured metric. The puncture pattern makes
// the metric separable per layer given the root symbol, so the exhaustive
// minimum is computed exactly without walking the full lattice.

DetectionResult detect_pml(const DetectorInput &in) {
    in.validate();
    const Constellation &c = *in.constellation;
    const arma::uword n = in.h.n_cols;
    const std::size_t q = c.order();
    const std::size_t bits = c.bits_per_symbol();

    double total = 1.0;
    for (arma::uword j = 0; j < n; ++j) total *= double(q);
    if (total > double(1u << 24)) {
        throw TooLarge("detect_pml: candidate count exceeds 2^24");
    }

    const PuncturedDecomposition p = wrd(in.h);
    const cx_vec yt = p.w.t() * in.y;

    // layer_min(l, r): min over x_l of the layer-l term given root symbol r;
    // layer_arg: the minimizing symbol; layer_bit_min(l, r, i, b): min with
    // the i-th bit of x_l forced to b.
    arma::mat layer_min(n > 0 ? n - 1 : 0, q, arma::fill::zeros);
    arma::umat layer_arg(n > 0 ? n - 1 : 0, q, arma::fill::zeros);
    std::vector<arma::cube> layer_bit_min(n > 0 ? n - 1 : 0);

    arma::vec root_term(q);
    for (std::size_t r = 0; r < q; ++r) {
        root_term(r) = std::norm(yt(n - 1) - p.r_dot(n - 1, n - 1) * c.point(r));
    }
    for (arma::uword l = 0; l + 1 < n; ++l) {
        layer_bit_min[l] = arma::cube(bits, q, 2);
        layer_bit_min[l].fill(kInf);
        for (std::size_t r = 0; r < q; ++r) {
            const cxd base = yt(l) - p.r_dot(l, n - 1) * c.point(r);
            double best = kInf;
            std::size_t arg = 0;
            for (std::size_t s = 0; s < q; ++s) {
                const double d = std::norm(base - p.r_dot(l, l) * c.point(s));
                if (d < best) {
                    best = d;
                    arg = s;
                }
                for (std::size_t i = 0; i < bits; ++i) {
                    double &slot = layer_bit_min[l](i, r, std::size_t(c.bit(s, i)));
                    if (d < slot) slot = d;
                }
            }
            layer_min(l, r) = best;
            layer_arg(l, r) = arg;
        }
    }

    arma::vec base_d(q);  // unconstrained min given each root symbol
    for (std::size_t r = 0; r < q; ++r) {
        double d = root_term(r);
        for (arma::uword l = 0; l + 1 < n; ++l) d += layer_min(l, r);
        base_d(r) = d;
    }
    const arma::uword r_best = base_d.index_min();

    DetectionResult res;
    res.hard.resize(n);
    res.hard[n - 1] = r_best;
    for (arma::uword l = 0; l + 1 < n; ++l) res.hard[l] = layer_arg(l, r_best);

    arma::mat llrs(bits, n);
    for (std::size_t i = 0; i < bits; ++i) {
        // root-layer bits: constrain the root symbol
        double best[2] = {kInf, kInf};
        for (std::size_t r = 0; r < q; ++r) {
            double &slot = best[std::size_t(c.bit(r, i))];
            slot = std::min(slot, base_d(r));
        }
        llrs(i, n - 1) = best[0] - best[1];
    }
    for (arma::uword l = 0; l + 1 < n; ++l) {
        for (std::size_t i = 0; i < bits; ++i) {
            double best[2] = {kInf, kInf};
            for (int b = 0; b < 2; ++b) {
                for (std::size_t r = 0; r < q; ++r) {
                    const double d = base_d(r) - layer_min(l, r) +
                                     layer_bit_min[l](i, r, std::size_t(b));
                    best[b] = std::min(best[b], d);
                }
            }
            llrs(i, l) = best[0] - best[1];
        }
    }
    res.llrs = std::move(llrs);
    finish(res, in);
    return res;
}

// --------------------------------------------------------------------------

DetectionResult detect_zf(const DetectorInput &in) {
    in.validate();
    const Constellation &c = *in.constellation;
    const arma::uword n = in.h.n_cols;

    const cx_mat gram = in.h.t() * in.h;
    cx_mat ginv;
    if (!arma::inv(ginv, gram)) {
        throw RankDeficient("detect_zf: H^H H not invertible");
    }
    const cx_vec y_zf = ginv * (in.h.t() * in.y);

    DetectionResult res;
    res.hard.resize(n);
    arma::mat llrs(c.bits_per_symbol(), n);
    for (arma::uword j = 0; j < n; ++j) {
        res.hard[j] = slice(c, y_zf(j));
        const double svar = in.sigma2 * std::real(ginv(j, j));
        scalar_llrs(c, y_zf(j), svar, llrs, j);
    }
    res.llrs = std::move(llrs);
    finish(res, in);
    return res;
}

// --------------------------------------------------------------------------

DetectionResult detect_sic_zf(const DetectorInput &in, bool sorted) {
    in.validate();
    return detect_sic_with(in, sorted ? sorted_qrd(in.h) : qrd(in.h));
}

// --------------------------------------------------------------------------
// LR-aided ZF: round in the LLL-reduced basis, map back, clip per axis.

DetectionResult detect_lr_zf(const DetectorInput &in) {
    in.validate();
    const Constellation &c = *in.constellation;
    const arma::uword n = in.h.n_cols;
    const std::size_t levels = std::size_t(std::llround(
        std::sqrt(double(c.order()))));
    const double a = c.axis_scale();
    const double top = double(levels) - 1.0;

    const ReducedBasis rb = lll_reduce(in.h);

    // x = s - 2a z with z a Gaussian integer in {0..L-1}^2 per coordinate
    const cxd s_off(a * top, a * top);
    const cx_vec ones(n, arma::fill::ones);
    const cx_vec y_shift = (in.h * (s_off * ones) - in.y) / (2.0 * a);

    cx_vec w;
    if (!arma::solve(w, rb.h_reduced, y_shift)) {
        throw RankDeficient("detect_lr_zf: reduced basis solve failed");
    }
    cx_vec w_round(n);
    for (arma::uword j = 0; j < n; ++j) {
        w_round(j) = cxd(std::round(std::real(w(j))), std::round(std::imag(w(j))));
    }
    const cx_vec z = rb.unimodular * w_round;
    const cx_vec x_soft = s_off * ones - 2.0 * a * (rb.unimodular * w);

    DetectionResult res;
    res.hard.resize(n);
    arma::mat llrs(c.bits_per_symbol(), n);
    const cx_mat gram = in.h.t() * in.h;
    cx_mat ginv;
    if (!arma::inv(ginv, gram)) {
        throw RankDeficient("detect_lr_zf: H^H H not invertible");
    }
    for (arma::uword j = 0; j < n; ++j) {
        const double zr = std::clamp(std::real(z(j)), 0.0, top);
        const double zi = std::clamp(std::imag(z(j)), 0.0, top);
        const cxd x(a * top - 2.0 * a * zr, a * top - 2.0 * a * zi);
        res.hard[j] = c.nearest(x);
        const double svar = in.sigma2 * std::real(ginv(j, j));
        scalar_llrs(c, x_soft(j), svar, llrs, j);
    }
    res.llrs = std::move(llrs);
    finish(res, in);
    return res;
}

// --------------------------------------------------------------------------

DetectionResult detect_kbest(const DetectorInput &in, std::size_t k) {
    in.validate();
    if (k < 1) throw ConfigInvalid("detect_kbest: k must be >= 1");
    const Constellation &c = *in.constellation;
    const arma::uword n = in.h.n_cols;
    const std::size_t q = c.order();
    const std::size_t bits = c.bits_per_symbol();

    const Decomposition dec = qrd(in.h);
    const cx_vec yt = dec.q.t() * in.y;

    struct Path {
        double metric = 0.0;
        std::vector<std::size_t> sym;  // filled from the last layer down
    };
    std::vector<Path> survivors{Path{}};

    for (arma::uword depth = 0; depth < n; ++depth) {
        const arma::uword row = n - 1 - depth;
        std::vector<Path> expanded;
        expanded.reserve(survivors.size() * q);
        for (const Path &p : survivors) {
            cxd resid = yt(row);
            for (arma::uword e = row + 1; e < n; ++e) {
                resid -= dec.r(row, e) * c.point(p.sym[n - 1 - e]);
            }
            for (std::size_t s = 0; s < q; ++s) {
                Path np = p;
                np.metric += std::norm(resid - dec.r(row, row) * c.point(s));
                np.sym.push_back(s);
                expanded.push_back(std::move(np));
            }
        }
        if (expanded.size() > k) {
            std::nth_element(expanded.begin(), expanded.begin() + long(k) - 1,
                             expanded.end(), [](const Path &a, const Path &b) {
                                 return a.metric < b.metric;
                             });
            expanded.resize(k);
        }
        survivors = std::move(expanded);
    }

    const Path *best = &survivors.front();
    for (const Path &p : survivors) {
        if (p.metric < best->metric) best = &p;
    }

    DetectionResult res;
    res.hard.resize(n);
    for (arma::uword j = 0; j < n; ++j) res.hard[j] = best->sym[n - 1 - j];

    arma::mat llrs(bits, n);
    for (arma::uword j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < bits; ++i) {
            double bmin[2] = {kInf, kInf};
            for (const Path &p : survivors) {
                const int b = c.bit(p.sym[n - 1 - j], i);
                bmin[b] = std::min(bmin[std::size_t(b)], p.metric);
            }
            const int hb = c.bit(res.hard[j], i);
            if (std::isinf(bmin[0]) || std::isinf(bmin[1])) {
                llrs(i, j) = (hb == 1) ? kLlrMax : -kLlrMax;
            } else {
                llrs(i, j) = bmin[0] - bmin[1];
            }
        }
    }
    res.llrs = std::move(llrs);
    finish(res, in);
    return res;
}

// --------------------------------------------------------------------------
// Shared engine for the layered detectors (LORD / V-LORD / SSD / SQLD).
// One decomposition per layer; the root symbol is enumerated and the lower
// layers are projected. With `punctured` the projection decouples per layer.

namespace {

struct LayerOutcome {
    std::vector<std::size_t> best_perm_syms;  // in decomposition order
    double best_d = kInf;
    arma::vec llr_root;  // per bit of the root symbol, (min0-min1)/sigma2
};

LayerOutcome run_decomposition(const cx_vec &y, const cx_mat &filt,
                               const cx_mat &rr, bool punctured,
                               const Constellation &c, double sigma2) {
    const arma::uword n = rr.n_cols;
    const std::size_t q = c.order();
    const std::size_t bits = c.bits_per_symbol();
    const cx_vec yt = filt.t() * y;

    LayerOutcome out;
    out.llr_root.set_size(bits);
    double bit_min[2 * 16];  // bits <= 6 in practice
    for (std::size_t i = 0; i < 2 * bits; ++i) bit_min[i] = kInf;

    std::vector<std::size_t> cand(n, 0);
    for (std::size_t root = 0; root < q; ++root) {
        cand[n - 1] = root;
        double d = std::norm(yt(n - 1) - rr(n - 1, n - 1) * c.point(root));
        for (arma::uword ii = n - 1; ii-- > 0;) {
            cxd resid = yt(ii) - rr(ii, n - 1) * c.point(root);
            if (!punctured) {
                for (arma::uword e = ii + 1; e + 1 < n; ++e) {
                    resid -= rr(ii, e) * c.point(cand[e]);
                }
            }
            const std::size_t s = c.nearest(resid / rr(ii, ii));
            cand[ii] = s;
            d += std::norm(resid - rr(ii, ii) * c.point(s));
        }
        if (d < out.best_d) {
            out.best_d = d;
            out.best_perm_syms = cand;
        }
        for (std::size_t i = 0; i < bits; ++i) {
            double &slot = bit_min[2 * i + std::size_t(c.bit(root, i))];
            if (d < slot) slot = d;
        }
    }
    for (std::size_t i = 0; i < bits; ++i) {
        out.llr_root(i) = (bit_min[2 * i] - bit_min[2 * i + 1]) / sigma2;
    }
    return out;
}

} // namespace

LayeredBank make_layered_bank(const cx_mat &h, const Permutation &presort,
                              arma::uword eta) {
    const arma::uword n = h.n_cols;
    if (eta > n) throw ConfigInvalid("make_layered_bank: eta must lie in [0, Q_t]");
    const auto cyc = cyclic_permutations(n);
    LayeredBank bank;
    bank.filt.reserve(n);
    bank.tri.reserve(n);
    bank.perms.reserve(n);
    bank.punctured.reserve(n);
    for (arma::uword l = 0; l < n; ++l) {
        const Permutation perm = presort.then(cyc[l]);
        const cx_mat hp = perm.apply(h);
        const bool punct = (l >= n - eta);
        if (punct) {
            PuncturedDecomposition p = wrd(hp);
            bank.filt.push_back(std::move(p.w));
            bank.tri.push_back(std::move(p.r_dot));
        } else {
            Decomposition d = qrd(hp);
            bank.filt.push_back(std::move(d.q));
            bank.tri.push_back(std::move(d.r));
        }
        bank.perms.push_back(perm);
        bank.punctured.push_back(punct);
    }
    return bank;
}

DetectionResult detect_layered_with_bank(const DetectorInput &in,
                                         const LayeredBank &bank,
                                         bool vlord_hard) {
    const Constellation &c = *in.constellation;
    const arma::uword n = in.h.n_cols;
    const std::size_t bits = c.bits_per_symbol();

    DetectionResult res;
    res.hard.assign(n, 0);
    arma::mat llrs(bits, n);
    std::vector<double> layer_d(n, 0.0);

    double best_global = kInf;
    std::size_t best_l = 0;
    std::vector<std::size_t> best_vec;

    for (arma::uword l = 0; l < n; ++l) {
        const LayerOutcome out =
            run_decomposition(in.y, bank.filt[l], bank.tri[l], bank.punctured[l],
                              c, in.sigma2);
        const arma::uword root_orig = bank.perms[l].order[n - 1];
        res.hard[root_orig] = out.best_perm_syms[n - 1];
        llrs.col(root_orig) = out.llr_root;
        layer_d[l] = out.best_d;

        if (vlord_hard && out.best_d < best_global) {
            best_global = out.best_d;
            best_vec = out.best_perm_syms;
            best_l = l;
        }
    }

    if (vlord_hard) {
        for (arma::uword j = 0; j < n; ++j) {
            res.hard[bank.perms[best_l].order[j]] = best_vec[j];
        }
    }
    res.llrs = std::move(llrs);
    res.layer_metrics = std::move(layer_d);
    finish(res, in);
    return res;
}

DetectionResult detect_sic_with(const DetectorInput &in, const Decomposition &dec) {
    const Constellation &c = *in.constellation;
    const arma::uword n = in.h.n_cols;
    const cx_vec yt = dec.q.t() * in.y;

    std::vector<std::size_t> hard_p(n, 0);
    arma::mat llrs_p(c.bits_per_symbol(), n);
    for (arma::uword ii = n; ii-- > 0;) {
        cxd resid = yt(ii);
        for (arma::uword e = ii + 1; e < n; ++e) {
            resid -= dec.r(ii, e) * c.point(hard_p[e]);
        }
        hard_p[ii] = slice(c, resid / dec.r(ii, ii));
        const cxd obs = resid / dec.r(ii, ii);
        const double svar = in.sigma2 / std::norm(dec.r(ii, ii));
        scalar_llrs(c, obs, svar, llrs_p, ii);
    }

    DetectionResult res;
    res.hard.resize(n);
    arma::mat llrs(c.bits_per_symbol(), n);
    for (arma::uword j = 0; j < n; ++j) {
        res.hard[dec.perm.order[j]] = hard_p[j];
        llrs.col(dec.perm.order[j]) = llrs_p.col(j);
    }
    res.llrs = std::move(llrs);
    finish(res, in);
    return res;
}

namespace {

DetectionResult layered_detect(const DetectorInput &in, const Permutation &presort,
                               arma::uword eta, bool vlord_hard) {
    const LayeredBank bank = make_layered_bank(in.h, presort, eta);
    return detect_layered_with_bank(in, bank, vlord_hard);
}

} // namespace

DetectionResult detect_lord(const DetectorInput &in) {
    in.validate();
    return layered_detect(in, Permutation::identity(in.h.n_cols), 0, false);
}

DetectionResult detect_vlord(const DetectorInput &in) {
    in.validate();
    return layered_detect(in, Permutation::identity(in.h.n_cols), 0, true);
}

DetectionResult detect_ssd(const DetectorInput &in) {
    in.validate();
    return layered_detect(in, Permutation::identity(in.h.n_cols), in.h.n_cols,
                          false);
}

DetectionResult detect_sqld(const DetectorInput &in, const SqldConfig &cfg) {
    in.validate();
    if (cfg.eta > in.h.n_cols) {
        throw ConfigInvalid("detect_sqld: eta must lie in [0, Q_t]");
    }
    return layered_detect(in, vblast_order(in.h), cfg.eta, false);
}

} // namespace thzdet
