#include "common.hpp"

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <numbers>

namespace ssgan {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::ok: return "ok";
        case ErrorCode::invalid_argument: return "invalid argument";
        case ErrorCode::format: return "format error";
        case ErrorCode::consistency: return "consistency error";
        case ErrorCode::infeasible_split: return "infeasible split";
        case ErrorCode::empty_input: return "empty input";
        case ErrorCode::diverged: return "diverged training";
        case ErrorCode::invalid_distribution: return "invalid distribution";
        case ErrorCode::no_alternative: return "no alternative label";
        case ErrorCode::validation: return "validation error";
        case ErrorCode::io: return "i/o error";
        case ErrorCode::internal: return "internal error";
    }
    return "unknown error";
}

void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    require(n > 0, ErrorCode::invalid_argument, "uniform_index: empty range");
    // 2^64 mod n; values below it would bias the remainder.
    const std::uint64_t threshold = (0 - n) % n;
    std::uint64_t v = rng();
    while (v < threshold) v = rng();
    return v % n;
}

double standard_normal(Rng& rng) {
    double u1 = uniform_real(rng);
    while (u1 <= 0.0) u1 = uniform_real(rng);
    const double u2 = uniform_real(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void fill_standard_normal(Rng& rng, double* out, std::size_t n) {
    boost::random::normal_distribution<double> normal;
    for (std::size_t i = 0; i < n; ++i) out[i] = normal(rng);
}

}  // namespace ssgan
