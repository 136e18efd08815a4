#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>

namespace stfl {

/// Fixed-size table of lazily built values with insert-once semantics.
/// The first caller for an index runs the factory; concurrent callers block
/// until it is done and then share the same value.
template <typename T>
class LazySlots {
public:
    explicit LazySlots(std::size_t size)
        : size_(size), flags_(std::make_unique<std::once_flag[]>(size)),
          values_(std::make_unique<std::optional<T>[]>(size)) {}

    std::size_t size() const noexcept { return size_; }

    template <typename Factory>
    const T& get(std::size_t index, Factory&& make) {
        if (index >= size_) {
            throw std::out_of_range("LazySlots index out of range");
        }
        std::call_once(flags_[index], [&] { values_[index].emplace(make()); });
        return *values_[index];
    }

private:
    std::size_t size_;
    std::unique_ptr<std::once_flag[]> flags_;
    std::unique_ptr<std::optional<T>[]> values_;
};

} // namespace stfl
