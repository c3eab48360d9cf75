#include "magicforge/sampler.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace magicforge {

CategorySubset sample_categories(const std::vector<int>& known, const Vocabulary& vocab,
                                 std::size_t m, Rng& rng) {
    const std::size_t n_vocab = vocab.size();
    std::set<int> known_set(known.begin(), known.end());
    if (known_set.size() != known.size())
        throw std::invalid_argument("sample_categories: duplicate known categories");
    for (int c : known)
        if (c < 0 || static_cast<std::size_t>(c) >= n_vocab)
            throw std::invalid_argument("sample_categories: known id outside vocabulary");
    if (m < known.size())
        throw std::invalid_argument("sample_categories: m smaller than known category count");
    if (m > n_vocab) throw std::invalid_argument("sample_categories: m exceeds vocabulary size");

    CategorySubset subset;
    subset.ids = known;
    subset.known.assign(known.size(), true);

    std::vector<int> pool;
    pool.reserve(n_vocab - known.size());
    for (std::size_t i = 0; i < n_vocab; ++i)
        if (!known_set.count(static_cast<int>(i))) pool.push_back(static_cast<int>(i));

    // Partial Fisher-Yates: first m-|known| entries are a uniform draw
    // without replacement.
    const std::size_t need = m - known.size();
    for (std::size_t i = 0; i < need; ++i) {
        std::size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
        subset.ids.push_back(pool[i]);
        subset.known.push_back(false);
    }
    return subset;
}

std::vector<CategorySubset> batch_subsets(const std::vector<std::vector<int>>& known_batch,
                                          const Vocabulary& vocab, std::size_t m, Rng& rng) {
    std::vector<CategorySubset> out;
    out.reserve(known_batch.size());
    for (const auto& known : known_batch) out.push_back(sample_categories(known, vocab, m, rng));
    return out;
}

}  // namespace magicforge
