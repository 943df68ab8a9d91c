// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#include "thzdet/constellation.hpp"

#include <cmath>

namespace thzdet {

namespace {

std::size_t gray(std::size_t k) { return k ^ (k >> 1); }

} // namespace

Constellation Constellation::make(std::size_t order) {
    if (order != 4 && order != 16 && order != 64) {
        throw Error("constellation order must be 4, 16 or 64");
    }
    Constellation c;
    c.bits_ = static_cast<std::size_t>(std::llround(std::log2(double(order))));
    const std::size_t half = c.bits_ / 2;
    const std::size_t levels = std::size_t(1) << half;

    // unit mean energy: E = 2 * mean(level^2) over one axis
    double e_axis = 0.0;
    for (std::size_t k = 0; k < levels; ++k) {
        const double amp = double(levels) - 1.0 - 2.0 * double(k);
        e_axis += amp * amp;
    }
    e_axis /= double(levels);
    c.scale_ = 1.0 / std::sqrt(2.0 * e_axis);

    c.points_.resize(order);
    c.labels_.resize(order);
    for (std::size_t ki = 0; ki < levels; ++ki) {
        for (std::size_t kq = 0; kq < levels; ++kq) {
            const std::size_t idx = ki * levels + kq;
            const double re = (double(levels) - 1.0 - 2.0 * double(ki)) * c.scale_;
            const double im = (double(levels) - 1.0 - 2.0 * double(kq)) * c.scale_;
            c.points_[idx] = {re, im};
            std::vector<int> bits(c.bits_);
            const std::size_t gi = gray(ki);
            const std::size_t gq = gray(kq);
            for (std::size_t b = 0; b < half; ++b) {
                bits[b] = int((gi >> (half - 1 - b)) & 1u);
                bits[half + b] = int((gq >> (half - 1 - b)) & 1u);
            }
            c.labels_[idx] = std::move(bits);
        }
    }

    c.partitions_.assign(c.bits_, {std::vector<std::size_t>(), std::vector<std::size_t>()});
    for (std::size_t idx = 0; idx < order; ++idx) {
        for (std::size_t i = 0; i < c.bits_; ++i) {
            c.partitions_[i][std::size_t(c.labels_[idx][i])].push_back(idx);
        }
    }
    return c;
}

Constellation Constellation::from_name(const std::string &name) {
    if (name == "qam4") return make(4);
    if (name == "qam16") return make(16);
    if (name == "qam64") return make(64);
    throw Error("unknown constellation: " + name);
}

int Constellation::bit(std::size_t idx, std::size_t i) const {
    if (i >= bits_) throw IndexOutOfRange("bit index out of range");
    return labels_[idx][i];
}

std::vector<int> Constellation::bits_of(std::size_t idx) const {
    return labels_[idx];
}

std::size_t Constellation::index_of_bits(const std::vector<int> &bits) const {
    if (bits.size() != bits_) throw LengthMismatch("label length mismatch");
    for (std::size_t idx = 0; idx < points_.size(); ++idx) {
        if (labels_[idx] == bits) return idx;
    }
    throw Error("label not found");  // unreachable: labels are a bijection
}

const std::vector<std::size_t> &Constellation::bit_partition_set(std::size_t i,
                                                                 int b) const {
    if (i >= bits_) throw IndexOutOfRange("bit index out of range");
    if (b != 0 && b != 1) throw IndexOutOfRange("bit value must be 0 or 1");
    return partitions_[i][std::size_t(b)];
}

std::vector<std::complex<double>> Constellation::modulate(
    const std::vector<int> &bits) const {
    if (bits.size() % bits_ != 0) {
        throw LengthMismatch("bit count not divisible by bits per symbol");
    }
    std::vector<std::complex<double>> out;
    out.reserve(bits.size() / bits_);
    std::vector<int> group(bits_);
    for (std::size_t s = 0; s < bits.size(); s += bits_) {
        std::copy(bits.begin() + long(s), bits.begin() + long(s + bits_), group.begin());
        out.push_back(points_[index_of_bits(group)]);
    }
    return out;
}

std::size_t Constellation::nearest(std::complex<double> y) const {
    std::size_t best = 0;
    double best_d = std::norm(y - points_[0]);
    for (std::size_t idx = 1; idx < points_.size(); ++idx) {
        const double d = std::norm(y - points_[idx]);
        if (d < best_d) {
            best_d = d;
            best = idx;
        }
    }
    return best;
}

std::vector<int> Constellation::demap_hard(
    const std::vector<std::complex<double>> &symbols) const {
    std::vector<int> out;
    out.reserve(symbols.size() * bits_);
    for (const auto &y : symbols) {
        const auto &lab = labels_[nearest(y)];
        out.insert(out.end(), lab.begin(), lab.end());
    }
    return out;
}

} // namespace thzdet
