#ifndef FBZ_CORE_HPP
#define FBZ_CORE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbz {

// Errors thrown by the core. The C facade and the CLI map these to status codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

// Spatial/velocity vectors for d in {2,3}. Unused components stay zero, so
// norms and dot products can ignore the runtime dimension.
using Vec = std::array<double, 3>;

inline Vec vec2(double x, double y) { return {x, y, 0.0}; }
inline Vec vec3(double x, double y, double z) { return {x, y, z}; }

inline double dot(const Vec& a, const Vec& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm2(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm2(a)); }

inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1], s * a[2]}; }

inline bool all_finite(const Vec& a, int d) {
    for (int c = 0; c < d; ++c)
        if (!std::isfinite(a[c])) return false;
    return true;
}

// Compensated accumulator for long reductions (diagnostics sums).
struct Kahan {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

// splitmix64: deterministic, seedable, good enough for test data and
// perturbation scenarios. Not a crypto RNG.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed) {}
    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    // uniform in [0,1)
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }
    // uniform in [lo,hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }
    // uniform integer in [0,n)
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }
};

// Value drawn from a fixed hash of an index; used for dense pseudo-random
// tuple functions without storing them.
inline double hash_unit(std::uint64_t seed, std::uint64_t idx) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ull * (idx + 1)));
    return r.next_double();
}

}  // namespace fbz

#endif
