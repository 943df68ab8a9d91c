// SPDX-License-Identifier: Apache-2.0
//
// thzdet: link-level MIMO detection laboratory for THz-band systems
// ------------------------------------------------------------------------

#ifndef THZDET_COMPLEXITY_HPP
#define THZDET_COMPLEXITY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "thzdet/errors.hpp"

namespace thzdet {

struct FlopCount {
    std::uint64_t radd = 0;
    std::uint64_t rmul = 0;
    std::uint64_t total() const { return radd + rmul; }
};

struct ReusePlan {
    std::uint64_t m_subcarriers = 1;
    double reduction = 0.0;  // P in [0, 1)
    double delta_m = 1.0;    // 1 / (1 - P)
    std::vector<std::uint64_t> recompute_indices;  // ascending, starts at 0

    // decomposition source for subcarrier m: the nearest preceding
    // recomputed subcarrier
    std::uint64_t source_of(std::uint64_t m) const;
};

enum class DetScheme { sic, lord, ssd };

DetScheme scheme_from_name(const std::string &name);

// radd = 4 Qr Qt^2 - Qt^2 - Qt, rmul = 4 Qr Qt^2 + 3 Qt^2
FlopCount flops_qrd(std::uint64_t q_r, std::uint64_t q_t);

// radd = 16/3 Qr Qt^3 - 10 Qr Qt^2 + 8/3 Qr Qt - 8 Qr
// rmul = 16/3 Qr Qt^3 -  7 Qr Qt^2 + 8/3 Qr Qt - 20 Qr
FlopCount flops_wrd(std::uint64_t q_r, std::uint64_t q_t);

// Savings identities: theta1_radd = Qt^2 - 3 Qt + 2, theta1_rmul = 2 Qt^2 - 6 Qt + 4.
FlopCount wrd_savings(std::uint64_t q_t);

// Per-scheme FLOPs rows (with Q_r = Q_t as the rows assume); `plan` absent
// selects the no-reuse rows.
FlopCount flops_detector(DetScheme scheme, std::uint64_t q_t,
                         std::uint64_t const_size, std::uint64_t m_subcarriers,
                         const std::optional<ReusePlan> &plan = std::nullopt);

// K-Best fixed search complexity: 2^|X| + (Qt - 1) K 2^|X| node visits.
double flops_kbest(std::uint64_t q_t, std::uint64_t const_size, std::uint64_t k);

ReusePlan reuse_plan(std::uint64_t m_subcarriers, double p);

// 4 Qr^2 (log2(Qr / (Qt - Qr + 1)) + 2.240 / ln t) + 2 Qr
double lll_expected_iterations_bound(std::uint64_t q_r, std::uint64_t q_t,
                                     double t);

} // namespace thzdet

#endif // THZDET_COMPLEXITY_HPP
