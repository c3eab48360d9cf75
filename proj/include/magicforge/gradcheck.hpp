#pragma once

#include <cstdint>

namespace magicforge {

struct GradcheckReport {
    double focal_max_rel_err = 0.0;
    double dice_max_rel_err = 0.0;
    double cosine_max_rel_err = 0.0;
    double end_to_end_max_rel_err = 0.0;

    bool pass() const {
        return focal_max_rel_err < 1e-5 && dice_max_rel_err < 1e-5 &&
               cosine_max_rel_err < 1e-5 && end_to_end_max_rel_err < 1e-4;
    }
};

// Central finite differences (h = 1e-5) against the analytic gradients, over
// `seeds` random instances each: the three losses on tensors up to 4x8x8 and
// token dimension up to 16, and the full model composition.
GradcheckReport run_gradcheck(int seeds = 10, std::uint64_t base_seed = 12345);

}  // namespace magicforge
