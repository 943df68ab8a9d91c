// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#ifndef THZDET_LINALG_HPP
#define THZDET_LINALG_HPP

#include <armadillo>
#include <cstdint>
#include <vector>

#include "thzdet/errors.hpp"

namespace thzdet {

using cx_mat = arma::cx_mat;
using cx_vec = arma::cx_vec;
using cxd = std::complex<double>;

// Column permutation. `order[j]` is the original column index that ends up
// in position j, i.e. permuted(:,j) = original(:,order[j]).
struct Permutation {
    std::vector<arma::uword> order;

    arma::uword size() const { return static_cast<arma::uword>(order.size()); }
    bool is_identity() const;
    bool is_bijection() const;

    static Permutation identity(arma::uword n);

    // this.then(p): first apply *this, then p (on the already-permuted
    // columns). Result maps position j to order[p.order[j]].
    Permutation then(const Permutation &p) const;

    cx_mat apply(const cx_mat &h) const;          // h with permuted columns
    cx_vec apply_inverse(const cx_vec &x) const;  // undo on a symbol vector
};

// H * Pi = Q * R, Q with orthonormal columns, R upper triangular with real
// non-negative diagonal.
struct Decomposition {
    cx_mat q;  // Q_r x Q_t
    cx_mat r;  // Q_t x Q_t
    Permutation perm;
};

// Channel puncturing: W^H * (H * Pi) = Rdot with unit-norm (non-orthogonal)
// W columns. Rdot is upper triangular with exact zeros strictly above the
// diagonal except in the last column, so y_tilde = W^H y decouples the
// layers given the root symbol. Equivalently H * Pi = W (W^H W)^{-1} Rdot;
// at Q_t = 2 no entries are punctured and this collapses to the QRD.
struct PuncturedDecomposition {
    cx_mat w;      // Q_r x Q_t
    cx_mat r_dot;  // Q_t x Q_t
    Permutation perm;
};

struct ReducedBasis {
    cx_mat h_reduced;   // H * unimodular
    cx_mat unimodular;  // Gaussian-integer entries, |det| = 1
    double delta = 0.75;
};

// Running tally of real additions/multiplications, used to sanity-check the
// closed-form complexity models against the actual implementation.
struct FlopTally {
    std::uint64_t radd = 0;
    std::uint64_t rmul = 0;
};

// Householder QR decomposition. Requires rows >= cols and full column rank
// (pivot norms above 1e-12), otherwise throws RankDeficient. The optional
// tally counts the factorization work (R and the reflector applications);
// assembling the explicit Q is excluded.
Decomposition qrd(const cx_mat &h, FlopTally *tally = nullptr);

// QR decomposition with V-BLAST column ordering: at each elimination step
// the remaining column of smallest residual norm is processed next (ties to
// the lowest original index), so the strongest column lands at the last
// layer and is detected first under SIC.
Decomposition sorted_qrd(const cx_mat &h);

// WR decomposition: derived from QRD by eliminating the R entries between
// the diagonal and the last column with row operations applied to both
// factors, then renormalizing so W has unit-norm columns.
PuncturedDecomposition wrd(const cx_mat &h);
PuncturedDecomposition wrd_of(const Decomposition &d);

// Complex LLL (Gaussian-integer size reduction, Lovasz parameter delta in
// (0.25, 1]). Throws NonConvergence past `max_iters` (default 10 * n^2).
ReducedBasis lll_reduce(const cx_mat &h, double delta = 0.75,
                        std::uint64_t max_iters = 0);

// The Q_t cyclic column shifts used by layered detectors: the l-th result
// (0-based) moves column l to the last position preserving the relative
// order of the others.
std::vector<Permutation> cyclic_permutations(arma::uword q_t);

// V-BLAST sorting permutation alone (the order sorted_qrd uses).
Permutation vblast_order(const cx_mat &h);

} // namespace thzdet

#endif // THZDET_LINALG_HPP
