// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#include "thzdet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace thzdet {

namespace {

constexpr double kPivotTol = 1e-12;

void check_input(const cx_mat &h) {
    if (h.n_rows < 1 || h.n_cols < 1) {
        throw Error("matrix must be non-empty");
    }
    if (h.n_rows < h.n_cols) {
        throw Error("matrix must have rows >= cols");
    }
    if (!h.is_finite()) {
        throw Error("matrix entries must be finite");
    }
}

// Multiply Q columns by a phase so the R diagonal becomes real >= 0.
void normalize_diag_phase(cx_mat &q, cx_mat &r) {
    const arma::uword n = r.n_cols;
    for (arma::uword k = 0; k < n; ++k) {
        const cxd d = r(k, k);
        const double m = std::abs(d);
        if (m == 0.0) continue;
        const cxd ph = d / m;  // e^{j arg d}
        r.row(k) *= std::conj(ph);
        q.col(k) *= ph;
        r(k, k) = cxd(m, 0.0);
    }
}

} // namespace

bool Permutation::is_identity() const {
    for (arma::uword j = 0; j < size(); ++j) {
        if (order[j] != j) return false;
    }
    return true;
}

bool Permutation::is_bijection() const {
    std::vector<bool> seen(order.size(), false);
    for (arma::uword v : order) {
        if (v >= order.size() || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

Permutation Permutation::identity(arma::uword n) {
    Permutation p;
    p.order.resize(n);
    std::iota(p.order.begin(), p.order.end(), arma::uword(0));
    return p;
}

Permutation Permutation::then(const Permutation &p) const {
    Permutation out;
    out.order.resize(p.order.size());
    for (arma::uword j = 0; j < p.size(); ++j) {
        out.order[j] = order[p.order[j]];
    }
    return out;
}

cx_mat Permutation::apply(const cx_mat &h) const {
    cx_mat out(h.n_rows, h.n_cols);
    for (arma::uword j = 0; j < size(); ++j) {
        out.col(j) = h.col(order[j]);
    }
    return out;
}

cx_vec Permutation::apply_inverse(const cx_vec &x) const {
    cx_vec out(x.n_elem);
    for (arma::uword j = 0; j < size(); ++j) {
        out(order[j]) = x(j);
    }
    return out;
}

Decomposition qrd(const cx_mat &h, FlopTally *tally) {
    check_input(h);
    const arma::uword m = h.n_rows;
    const arma::uword n = h.n_cols;

    cx_mat a = h;                      // becomes R in the upper triangle
    cx_mat vs(m, n, arma::fill::zeros);  // Householder vectors
    std::vector<double> betas(n, 0.0);

    for (arma::uword k = 0; k < n; ++k) {
        // Householder vector for column k
        double xnorm = arma::norm(a.submat(k, k, m - 1, k));
        if (tally) {
            tally->rmul += 2 * (m - k);      // |re|^2+|im|^2 per entry
            tally->radd += 2 * (m - k) - 1;
        }
        if (xnorm < kPivotTol) {
            throw RankDeficient("qrd: pivot norm below 1e-12 at column " +
                                std::to_string(k));
        }
        const cxd x0 = a(k, k);
        const double ax0 = std::abs(x0);
        const cxd phase = (ax0 > 0.0) ? x0 / ax0 : cxd(1.0, 0.0);
        const cxd alpha = -phase * xnorm;

        cx_vec v = a.submat(k, k, m - 1, k);
        v(0) -= alpha;
        const double vnorm2 = std::real(arma::cdot(v, v));
        if (tally) {
            tally->rmul += 2 * (m - k);
            tally->radd += 2 * (m - k) - 1;
        }
        if (vnorm2 > 0.0) {
            const double beta = 2.0 / vnorm2;
            // apply reflector to the trailing columns
            for (arma::uword j = k; j < n; ++j) {
                cxd s(0.0, 0.0);
                for (arma::uword i = k; i < m; ++i) s += std::conj(v(i - k)) * a(i, j);
                s *= beta;
                for (arma::uword i = k; i < m; ++i) a(i, j) -= s * v(i - k);
                if (tally) {
                    tally->rmul += 8 * (m - k) + 2;
                    tally->radd += 8 * (m - k);
                }
            }
            vs.submat(k, k, m - 1, k) = v;
            betas[k] = beta;
        }
    }

    // Assemble the thin Q by applying the reflectors to I (not tallied).
    cx_mat q(m, n, arma::fill::eye);
    for (arma::uword k = n; k-- > 0;) {
        if (betas[k] == 0.0) continue;
        const cx_vec v = vs.submat(k, k, m - 1, k);
        for (arma::uword j = 0; j < n; ++j) {
            cxd s(0.0, 0.0);
            for (arma::uword i = k; i < m; ++i) s += std::conj(v(i - k)) * q(i, j);
            s *= betas[k];
            for (arma::uword i = k; i < m; ++i) q(i, j) -= s * v(i - k);
        }
    }

    cx_mat r = arma::trimatu(a.head_rows(n));
    normalize_diag_phase(q, r);

    Decomposition d;
    d.q = std::move(q);
    d.r = std::move(r);
    d.perm = Permutation::identity(n);
    return d;
}

Permutation vblast_order(const cx_mat &h) {
    check_input(h);
    const arma::uword n = h.n_cols;
    cx_mat work = h;
    std::vector<arma::uword> remaining(n);
    std::iota(remaining.begin(), remaining.end(), arma::uword(0));
    Permutation perm;
    perm.order.reserve(n);

    // Modified Gram-Schmidt with pivoting on the smallest residual norm;
    // only the ordering is kept, the factors are recomputed by Householder.
    for (arma::uword k = 0; k < n; ++k) {
        arma::uword best = 0;
        double best_norm2 = std::numeric_limits<double>::infinity();
        for (arma::uword idx = 0; idx < remaining.size(); ++idx) {
            const double n2 = std::real(arma::cdot(work.col(remaining[idx]),
                                                   work.col(remaining[idx])));
            // strict improvement only: ties stay with the lowest original index
            if (n2 < best_norm2 - 1e-14 * std::max(1.0, n2)) {
                best_norm2 = n2;
                best = idx;
            }
        }
        const arma::uword col = remaining[best];
        perm.order.push_back(col);
        remaining.erase(remaining.begin() + best);

        const double nrm = std::sqrt(best_norm2);
        if (nrm < kPivotTol) {
            throw RankDeficient("sorted_qrd: residual norm below 1e-12");
        }
        const cx_vec qk = work.col(col) / nrm;
        for (arma::uword idx : remaining) {
            work.col(idx) -= qk * arma::cdot(qk, work.col(idx));
        }
    }
    return perm;
}

Decomposition sorted_qrd(const cx_mat &h) {
    Permutation perm = vblast_order(h);
    Decomposition d = qrd(perm.apply(h));
    d.perm = perm;
    return d;
}

PuncturedDecomposition wrd_of(const Decomposition &dec) {
    const arma::uword n = dec.r.n_cols;
    cx_mat r_dot = dec.r;
    cx_mat wh = dec.q.t();  // rows are the filter; W^H * (H Pi) = r_dot

    // Zero r_dot(i, j) for i < j < n-1 with row operations applied to both
    // factors, processing columns left to right so punctured entries stay
    // punctured. Row j has zeros left of the diagonal, so the triangular
    // structure is preserved.
    for (arma::uword j = 1; j + 1 < n; ++j) {
        for (arma::uword i = 0; i < j; ++i) {
            const cxd factor = r_dot(i, j) / r_dot(j, j);
            if (factor == cxd(0.0, 0.0)) continue;
            r_dot.row(i) -= factor * r_dot.row(j);
            r_dot(i, j) = cxd(0.0, 0.0);  // exact zero by construction
            wh.row(i) -= factor * wh.row(j);
        }
    }

    // normalize so the columns of W have unit norm
    for (arma::uword k = 0; k < n; ++k) {
        const double s = arma::norm(wh.row(k));
        wh.row(k) /= s;
        r_dot.row(k) /= s;
    }

    PuncturedDecomposition p;
    p.w = wh.t();
    p.r_dot = std::move(r_dot);
    p.perm = dec.perm;
    return p;
}

PuncturedDecomposition wrd(const cx_mat &h) { return wrd_of(qrd(h)); }

std::vector<Permutation> cyclic_permutations(arma::uword q_t) {
    if (q_t < 1) throw Error("cyclic_permutations: q_t must be >= 1");
    std::vector<Permutation> out;
    out.reserve(q_t);
    for (arma::uword l = 0; l < q_t; ++l) {
        Permutation p;
        p.order.reserve(q_t);
        for (arma::uword j = 0; j < q_t; ++j) {
            if (j != l) p.order.push_back(j);
        }
        p.order.push_back(l);
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

struct GsState {
    cx_mat b;       // current basis
    cx_mat mu;      // Gram-Schmidt coefficients (lower triangular)
    arma::vec bn2;  // squared norms of the orthogonalized vectors
};

void gram_schmidt(GsState &s) {
    const arma::uword n = s.b.n_cols;
    cx_mat bstar = s.b;
    s.mu.zeros(n, n);
    s.bn2.set_size(n);
    for (arma::uword k = 0; k < n; ++k) {
        for (arma::uword i = 0; i < k; ++i) {
            const cxd m = arma::cdot(bstar.col(i), s.b.col(k)) / s.bn2(i);
            s.mu(k, i) = m;
            bstar.col(k) -= m * bstar.col(i);
        }
        s.bn2(k) = std::real(arma::cdot(bstar.col(k), bstar.col(k)));
    }
}

} // namespace

ReducedBasis lll_reduce(const cx_mat &h, double delta, std::uint64_t max_iters) {
    check_input(h);
    if (!(delta > 0.25 && delta <= 1.0)) {
        throw Error("lll_reduce: delta must lie in (0.25, 1]");
    }
    const arma::uword n = h.n_cols;
    if (max_iters == 0) max_iters = 10 * static_cast<std::uint64_t>(n) * n + 64;

    GsState s;
    s.b = h;
    cx_mat u(n, n, arma::fill::eye);
    gram_schmidt(s);

    auto size_reduce = [&](arma::uword k, arma::uword i) {
        const cxd m = s.mu(k, i);
        const cxd q(std::round(std::real(m)), std::round(std::imag(m)));
        if (q == cxd(0.0, 0.0)) return;
        s.b.col(k) -= q * s.b.col(i);
        u.col(k) -= q * u.col(i);
        for (arma::uword j = 0; j < i; ++j) s.mu(k, j) -= q * s.mu(i, j);
        s.mu(k, i) -= q;
    };

    std::uint64_t iters = 0;
    arma::uword k = 1;
    while (k < n) {
        if (++iters > max_iters) {
            throw NonConvergence("lll_reduce: iteration cap exceeded");
        }
        size_reduce(k, k - 1);
        const double lhs = delta * s.bn2(k - 1);
        const double rhs = s.bn2(k) + std::norm(s.mu(k, k - 1)) * s.bn2(k - 1);
        if (lhs > rhs) {
            s.b.swap_cols(k, k - 1);
            u.swap_cols(k, k - 1);
            gram_schmidt(s);  // small n here; recompute rather than update
            k = (k > 1) ? k - 1 : 1;
        } else {
            for (arma::uword i = k - 1; i-- > 0;) size_reduce(k, i);
            ++k;
        }
    }

    ReducedBasis rb;
    rb.h_reduced = s.b;
    rb.unimodular = u;
    rb.delta = delta;
    return rb;
}

} // namespace thzdet
