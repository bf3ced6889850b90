#ifndef STEGPOOL_ALIGNED_HPP
#define STEGPOOL_ALIGNED_HPP

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <new>
#include <vector>

namespace stegpool {

// 64-byte aligned allocator. Vectorized math over these buffers always sees
// the same SIMD lane grouping, so results do not depend on where the heap
// happened to place an allocation. Alignment is done by hand over plain
// malloc: aligned_alloc chunks skip the allocator's fast recycling paths,
// which made per-image buffers painfully slow.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        if (n == 0) return nullptr;
        void* raw = std::malloc(n * sizeof(T) + alignment + sizeof(void*));
        if (!raw) throw std::bad_alloc();
        auto addr = reinterpret_cast<std::uintptr_t>(raw) + sizeof(void*);
        addr = (addr + alignment - 1) & ~static_cast<std::uintptr_t>(alignment - 1);
        auto* aligned = reinterpret_cast<T*>(addr);
        reinterpret_cast<void**>(aligned)[-1] = raw;
        return aligned;
    }
    void deallocate(T* ptr, std::size_t) noexcept {
        if (ptr) std::free(reinterpret_cast<void**>(ptr)[-1]);
    }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
    template <typename U>
    bool operator!=(const AlignedAllocator<U>&) const {
        return false;
    }
};

using AlignedVec = std::vector<double, AlignedAllocator<double>>;

}  // namespace stegpool

#endif
