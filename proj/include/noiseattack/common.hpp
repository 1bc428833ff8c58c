#ifndef NOISEATTACK_COMMON_HPP
#define NOISEATTACK_COMMON_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace noiseattack {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Error vocabulary shared by all modules. Each maps to one failure class
// surfaced at the CLI as exit code 2 (validation) or 3 (runtime).
struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidPlan : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidDataset : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct UnsupportedModel : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct TrainingFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CorruptCache : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedSource : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// splitmix64 step; used to derive independent stream seeds from a master
/// seed without correlated low bits.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Folds a master seed with any number of context words (sample index,
/// target index, epoch, a tag hash...) into a new stream seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> words) {
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t w : words) s = splitmix64(s ^ w);
    return s;
}

/// FNV-1a 64-bit over a byte string. Used for config hashes, cache
/// checksums and seed tags; not a cryptographic hash.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

/// Deterministic Gaussian stream: mt19937_64 uniforms (sequence fixed by
/// the C++ standard) fed through an explicit Box-Muller transform, so the
/// draw sequence is identical across platforms and process restarts.
/// std::normal_distribution is implementation-defined and deliberately
/// avoided here.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}

    /// One draw from N(0, 1).
    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0,1], u2 in [0,1)
        const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// One draw from N(0, sigma^2). sigma == 0 yields exact zeros (the
    /// underlying draw is still consumed, keeping stream positions aligned).
    double next(double sigma) { return sigma * next(); }

    std::uint64_t next_u64() {
        has_spare_ = false;  // keep uniform and gaussian draws non-interleaved
        return gen_();
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// In-place Fisher-Yates with an explicit modulo draw. std::shuffle is
/// implementation-defined, this is not.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(gen() % i);
        std::swap(v[i - 1], v[j]);
    }
}

/// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size
/// chunks. Chunk boundaries depend only on (n, chunk_size), never on the
/// worker count, so per-chunk partial results reduced in chunk order give
/// bit-identical totals for any thread count.
inline void parallel_chunks(int n, int chunk_size, int threads,
                            const std::function<void(int, int, int)>& fn) {
    if (n <= 0) return;
    const int n_chunks = (n + chunk_size - 1) / chunk_size;
    if (threads <= 1 || n_chunks == 1) {
        for (int c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int c = next.fetch_add(1);
            if (c >= n_chunks) return;
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        }
    };
    std::vector<std::thread> pool;
    const int t = std::min(threads, n_chunks);
    pool.reserve(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

inline int default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace noiseattack

#endif  // NOISEATTACK_COMMON_HPP
