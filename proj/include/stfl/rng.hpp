#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace stfl {

/// Stream tags keep keyed draws for different purposes disjoint.
enum class StreamTag : std::uint64_t {
    dataset = 1,
    replicate = 2,
    schedule = 3,
    outage = 4,
    compensation = 5,
};

/// Counter-based generator: output i is a bijective mix of (key + i * golden).
/// Any (seed, tag, indices...) tuple names an independent stream, so draws do
/// not depend on the order in which streams are consumed.
class KeyedRng {
public:
    using result_type = std::uint64_t;

    explicit KeyedRng(std::uint64_t key) noexcept : key_(key) {}

    /// Key derived from a seed, a tag and any number of indices.
    static KeyedRng derive(std::uint64_t seed, StreamTag tag,
                           std::initializer_list<std::uint64_t> indices) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;

    std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

} // namespace stfl
