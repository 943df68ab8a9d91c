// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#include "thzdet/complexity.hpp"

#include <cmath>

namespace thzdet {

namespace {

// The table rows mix integer terms with (1 - P) factors and thirds from the
// WRD polynomials; evaluate in double and require the result to land on an
// integer.
std::uint64_t to_count(double v, const char *what) {
    const double r = std::round(v);
    if (!(std::abs(v - r) < 1e-6 * std::max(1.0, std::abs(v))) || r < 0.0) {
        throw NonInteger(std::string(what) + ": non-integer FLOP count");
    }
    return std::uint64_t(r);
}

} // namespace

std::uint64_t ReusePlan::source_of(std::uint64_t m) const {
    std::uint64_t src = recompute_indices.front();
    for (std::uint64_t idx : recompute_indices) {
        if (idx > m) break;
        src = idx;
    }
    return src;
}

DetScheme scheme_from_name(const std::string &name) {
    if (name == "sic") return DetScheme::sic;
    if (name == "lord") return DetScheme::lord;
    if (name == "ssd") return DetScheme::ssd;
    throw UnknownScheme("unknown scheme: " + name);
}

FlopCount flops_qrd(std::uint64_t q_r, std::uint64_t q_t) {
    if (q_r < q_t || q_t < 1) throw ConfigInvalid("flops_qrd: need q_r >= q_t >= 1");
    FlopCount f;
    f.radd = 4 * q_r * q_t * q_t - q_t * q_t - q_t;
    f.rmul = 4 * q_r * q_t * q_t + 3 * q_t * q_t;
    return f;
}

FlopCount flops_wrd(std::uint64_t q_r, std::uint64_t q_t) {
    if (q_r < q_t || q_t < 1) throw ConfigInvalid("flops_wrd: need q_r >= q_t >= 1");
    const double qr = double(q_r), qt = double(q_t);
    const double radd =
        16.0 / 3.0 * qr * qt * qt * qt - 10.0 * qr * qt * qt + 8.0 / 3.0 * qr * qt -
        8.0 * qr;
    const double rmul =
        16.0 / 3.0 * qr * qt * qt * qt - 7.0 * qr * qt * qt + 8.0 / 3.0 * qr * qt -
        20.0 * qr;
    FlopCount f;
    f.radd = to_count(radd, "flops_wrd radd");
    f.rmul = to_count(rmul, "flops_wrd rmul");
    return f;
}

FlopCount wrd_savings(std::uint64_t q_t) {
    FlopCount f;
    f.radd = to_count(double(q_t) * double(q_t) - 3.0 * double(q_t) + 2.0,
                      "wrd_savings radd");
    f.rmul = to_count(2.0 * double(q_t) * double(q_t) - 6.0 * double(q_t) + 4.0,
                      "wrd_savings rmul");
    return f;
}

FlopCount flops_detector(DetScheme scheme, std::uint64_t q_t,
                         std::uint64_t const_size, std::uint64_t m_subcarriers,
                         const std::optional<ReusePlan> &plan) {
    if (q_t < 1 || const_size < 1 || m_subcarriers < 1) {
        throw ConfigInvalid("flops_detector: invalid dimensions");
    }
    const double qt = double(q_t);
    const double mm = double(const_size);  // |M|
    const double m = double(m_subcarriers);
    const double keep = plan ? (1.0 - plan->reduction) : 1.0;

    const FlopCount qrd = flops_qrd(q_t, q_t);
    const FlopCount wrdc = flops_wrd(q_t, q_t);

    double radd = 0.0, rmul = 0.0;
    switch (scheme) {
        case DetScheme::sic:
            radd = m * (keep * double(qrd.radd) + 6.0 * qt * qt);
            rmul = m * (keep * double(qrd.rmul) + 8.0 * qt * qt + qt);
            break;
        case DetScheme::lord:
            radd = m * (qt * keep * double(qrd.radd) + 4.0 * qt * qt * qt +
                        4.0 * qt * qt + (2.0 * qt + 4.0) * qt * mm);
            rmul = m * (qt * keep * double(qrd.rmul) + 8.0 * qt * qt * qt +
                        (4.0 * qt + 5.0) * qt * mm);
            break;
        case DetScheme::ssd:
            radd = m * (qt * keep * (double(qrd.radd) + double(wrdc.radd)) +
                        4.0 * qt * qt * qt - qt * qt * qt * mm +
                        3.0 * qt * qt * mm + (2.0 * qt + 4.0) * qt * mm -
                        2.0 * qt * mm);
            rmul = m * (qt * keep * (double(qrd.rmul) + double(wrdc.rmul)) +
                        4.0 * qt * qt * qt - 2.0 * qt * qt * qt * mm +
                        6.0 * qt * qt * mm + (4.0 * qt + 5.0) * qt * mm -
                        4.0 * qt * mm);
            break;
    }
    FlopCount f;
    f.radd = to_count(radd, "flops_detector radd");
    f.rmul = to_count(rmul, "flops_detector rmul");
    return f;
}

double flops_kbest(std::uint64_t q_t, std::uint64_t const_size, std::uint64_t k) {
    if (q_t < 1 || const_size < 1 || k < 1) {
        throw ConfigInvalid("flops_kbest: invalid parameters");
    }
    const double base = std::pow(2.0, double(const_size));
    return base + double(q_t - 1) * double(k) * base;
}

ReusePlan reuse_plan(std::uint64_t m_subcarriers, double p) {
    if (m_subcarriers < 1) throw ConfigInvalid("reuse_plan: M must be >= 1");
    if (!(p >= 0.0 && p < 1.0)) throw ConfigInvalid("reuse_plan: P must lie in [0,1)");
    ReusePlan plan;
    plan.m_subcarriers = m_subcarriers;
    plan.reduction = p;
    plan.delta_m = 1.0 / (1.0 - p);
    const std::uint64_t n_recompute = std::max<std::uint64_t>(
        1, std::uint64_t(std::llround(double(m_subcarriers) * (1.0 - p))));
    plan.recompute_indices.reserve(n_recompute);
    for (std::uint64_t i = 0; i < n_recompute; ++i) {
        plan.recompute_indices.push_back(i * m_subcarriers / n_recompute);
    }
    return plan;
}

double lll_expected_iterations_bound(std::uint64_t q_r, std::uint64_t q_t,
                                     double t) {
    if (q_r < q_t) throw ConfigInvalid("lll bound: need q_r >= q_t");
    if (!(t > 1.0)) throw ConfigInvalid("lll bound: need t > 1");
    const double denom = double(q_t) - double(q_r) + 1.0;
    if (denom <= 0.0) throw DomainError("lll bound: Q_t - Q_r + 1 <= 0");
    const double qr = double(q_r);
    return 4.0 * qr * qr * (std::log2(qr / denom) + 2.240 / std::log(t)) + 2.0 * qr;
}

} // namespace thzdet
