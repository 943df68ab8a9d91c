// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#ifndef THZDET_CONSTELLATION_HPP
#define THZDET_CONSTELLATION_HPP

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "thzdet/errors.hpp"

namespace thzdet {

// Square Gray-labeled QAM with unit average symbol energy.
//
// Labeling (frozen; golden tests depend on it): each axis carries half the
// bits, I-axis bits first, each axis MSB-first. On one axis with L levels,
// level index k = 0..L-1 maps to amplitude (L-1-2k)*a (k = 0 is the most
// positive level) and carries the reflected Gray code k ^ (k >> 1). Hence
// for 4-QAM, bits (0,0) -> (+1+j)/sqrt(2).
class Constellation {
public:
    static Constellation make(std::size_t order);       // 4, 16 or 64
    static Constellation from_name(const std::string &); // "qam4", ...

    std::size_t order() const { return points_.size(); }
    std::size_t bits_per_symbol() const { return bits_; }
    double axis_scale() const { return scale_; }  // the amplitude unit a

    const std::vector<std::complex<double>> &points() const { return points_; }
    std::complex<double> point(std::size_t idx) const { return points_[idx]; }

    // Bit i (0-based, I-axis bits first) of the symbol at `idx`.
    int bit(std::size_t idx, std::size_t i) const;
    // All bits of one symbol, index 0 first.
    std::vector<int> bits_of(std::size_t idx) const;

    // Symbol index whose label equals the given bits (length bits_per_symbol).
    std::size_t index_of_bits(const std::vector<int> &bits) const;

    // Indices of the symbols whose i-th bit equals b; always order()/2 of them.
    const std::vector<std::size_t> &bit_partition_set(std::size_t i, int b) const;

    // Map a bit string (length divisible by bits_per_symbol) to symbols.
    std::vector<std::complex<double>> modulate(const std::vector<int> &bits) const;

    // Nearest constellation index (ties to the lowest index).
    std::size_t nearest(std::complex<double> y) const;

    // Hard demap a symbol vector back to bits.
    std::vector<int> demap_hard(const std::vector<std::complex<double>> &symbols) const;

private:
    std::vector<std::complex<double>> points_;
    std::vector<std::vector<int>> labels_;
    std::vector<std::vector<std::vector<std::size_t>>> partitions_;  // [bit][b]
    std::size_t bits_ = 0;
    double scale_ = 0.0;
};

} // namespace thzdet

#endif // THZDET_CONSTELLATION_HPP
