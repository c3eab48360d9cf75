#pragma once

#include <vector>

#include "magicforge/rng.hpp"
#include "magicforge/types.hpp"

namespace magicforge {

// Per-image category subset for mask prediction: the known categories first,
// then uniformly sampled negatives, m ids total.
struct CategorySubset {
    std::vector<int> ids;
    std::vector<bool> known;  // parallel to ids

    std::size_t size() const { return ids.size(); }
};

// Throws std::invalid_argument when m < |known| or m > N, or when known ids
// fall outside the vocabulary.
CategorySubset sample_categories(const std::vector<int>& known, const Vocabulary& vocab,
                                 std::size_t m, Rng& rng);

std::vector<CategorySubset> batch_subsets(const std::vector<std::vector<int>>& known_batch,
                                          const Vocabulary& vocab, std::size_t m, Rng& rng);

}  // namespace magicforge
