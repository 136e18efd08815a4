#include "stfl/rng.hpp"

namespace stfl {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    // splitmix64 finaliser
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

KeyedRng KeyedRng::derive(std::uint64_t seed, StreamTag tag,
                          std::initializer_list<std::uint64_t> indices) noexcept {
    std::uint64_t h = mix64(seed + kGolden);
    h = mix64(h ^ (static_cast<std::uint64_t>(tag) * kGolden));
    for (std::uint64_t idx : indices) {
        h = mix64(h + kGolden + mix64(idx ^ 0x5851f42d4c957f2dULL));
    }
    return KeyedRng(h);
}

KeyedRng::result_type KeyedRng::operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double KeyedRng::uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

} // namespace stfl
