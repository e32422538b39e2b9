#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace kwrec {

std::uint64_t fnv1a64(std::string_view data);

std::string to_hex64(std::uint64_t value);

// Portable Fisher-Yates. std::shuffle / uniform_int_distribution differ
// between standard library implementations; identical seeds must permute
// identically on every platform.
template <typename T>
void seeded_shuffle(std::vector<T>& values, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(gen() % i);
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace kwrec
