#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "milstein/milstein.hpp"

namespace testing_support {

using namespace milstein;

inline std::shared_ptr<const DriverTable> table_for(const DriverSpec& spec, int coarse_n, int fine_factor) {
    return std::make_shared<const DriverTable>(spec, make_grid(coarse_n, fine_factor));
}

inline PathBundle bundle_for(const SdeProblem& p, int coarse_n, int fine_factor, std::uint64_t seed,
                             std::uint64_t path = 0) {
    return make_bundle(table_for(p.driver, coarse_n, fine_factor), seed, path);
}

// Tiny splitmix64 for property-test inputs; independent of the library's streams.
class Gen {
  public:
    explicit Gen(std::uint64_t seed) : s_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53; }
    int integer(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }

  private:
    std::uint64_t s_;
};

} // namespace testing_support
