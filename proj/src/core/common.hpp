#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ssgan {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

using ExampleId = std::int64_t;

// Mirrors the status codes of the C API one to one.
enum class ErrorCode : int {
    ok = 0,
    invalid_argument = 1,
    format = 2,
    consistency = 3,
    infeasible_split = 4,
    empty_input = 5,
    diverged = 6,
    invalid_distribution = 7,
    no_alternative = 8,
    validation = 9,
    io = 10,
    internal = 11,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

// splitmix64 finaliser; the building block of every derived seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return mix64(base ^ mix64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    return derive_seed(base, fnv1a(tag));
}

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Rest... rest);
template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, Rest... rest);

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Rest... rest) {
    return derive_seed(derive_seed(base, tag), rest...);
}

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, Rest... rest) {
    return derive_seed(derive_seed(base, tag), rest...);
}

// Uniform integer in [0, n). Bias-free rejection sampling over the raw engine
// output so results do not depend on the standard library's distributions.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

// Uniform real in [0, 1) from the top 53 bits.
inline double uniform_real(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; stdlib-independent for reproducible goldens.
double standard_normal(Rng& rng);

// Fills out with i.i.d. standard normals.
void fill_standard_normal(Rng& rng, double* out, std::size_t n);

}  // namespace ssgan
