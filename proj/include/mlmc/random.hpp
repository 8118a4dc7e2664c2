#pragma once

// Counter-based random streams and the distribution primitives shared by all
// samplers.
//
// Every draw is a pure function of a StreamKey. The generator is Philox4x64-10
// (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3"): the 64-bit
// seed is the cipher key, and (draw_counter, sample_index, level, substream)
// form the 256-bit counter. Each counter value yields four 64-bit words, so a
// stream never has sequential state beyond the position inside one block.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mlmc/error.hpp"

namespace mlmc {

//---------------------------------------------------------------------------//
// Philox4x64-10
//---------------------------------------------------------------------------//
namespace detail {

inline std::pair<std::uint64_t, std::uint64_t> mul_hilo(std::uint64_t a, std::uint64_t b)
{
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    return {static_cast<std::uint64_t>(p >> 64), static_cast<std::uint64_t>(p)};
}

}  // namespace detail

using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

inline PhiloxCounter philox4x64(PhiloxCounter ctr, PhiloxKey key)
{
    constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
    constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        const auto [hi0, lo0] = detail::mul_hilo(kMul0, ctr[0]);
        const auto [hi1, lo1] = detail::mul_hilo(kMul1, ctr[2]);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

//---------------------------------------------------------------------------//
// Stream keys
//---------------------------------------------------------------------------//

/// Identifies one independent random stream. Distinct keys give independent
/// draws; the same key always gives the same draws.
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint32_t level = 0;
    std::uint64_t sample_index = 0;
    std::uint64_t draw_counter = 0;
    /// Separates the independent uses inside one sample (Brownian increments,
    /// bridge uniforms, sub-sample normals, ...).
    std::uint32_t substream = 0;

    StreamKey with_substream(std::uint32_t s) const
    {
        StreamKey k = *this;
        k.substream = s;
        k.draw_counter = 0;
        return k;
    }

    friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

/// Sequential reader over the blocks of one StreamKey.
class CounterStream {
  public:
    explicit CounterStream(StreamKey key) : key_(key) {}

    std::uint64_t next_u64()
    {
        if (pos_ == 4) {
            block_ = philox4x64(
                {key_.draw_counter, key_.sample_index,
                 (static_cast<std::uint64_t>(key_.level) << 32) | key_.substream, 0},
                {key_.seed, 0});
            ++key_.draw_counter;
            pos_ = 0;
        }
        return block_[pos_++];
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53; }

    double normal();

    void fill_normals(std::span<double> out)
    {
        for (double& z : out)
            z = normal();
    }

  private:
    StreamKey key_;
    std::array<std::uint64_t, 4> block_{};
    int pos_ = 4;
};

//---------------------------------------------------------------------------//
// Normal distribution
//---------------------------------------------------------------------------//

inline double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

inline double normal_pdf(double x)
{
    return 0.39894228040143267794 * std::exp(-0.5 * x * x);
}

/// Density of N(mean, std^2) at x.
inline double normal_pdf(double x, double mean, double std)
{
    const double z = (x - mean) / std;
    return normal_pdf(z) / std;
}

/// Inverse of the standard normal CDF, Wichura's AS 241 (PPND16), accurate
/// to about 1e-16 relative.
inline double normal_inv_cdf(double u)
{
    if (!(u > 0.0 && u < 1.0))
        throw BadInput("normal_inv_cdf: argument must lie in (0, 1)");

    const double q = u - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            ((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0;
        const double den =
            ((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0;
        return q * num / den;
    }

    double r = std::sqrt(-std::log(q < 0.0 ? u : 1.0 - u));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                 2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
               3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
             4.63033784615654529590e+0) * r + 1.42343711074968357734e+0;
        const double den =
            ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
               6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
             2.05319162663775882187e+0) * r + 1.0;
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
               2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
             5.46378491116411436990e+0) * r + 6.65790464350110377720e+0;
        const double den =
            ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
               1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
             5.99832206555887937690e-1) * r + 1.0;
        val = num / den;
    }
    return q < 0.0 ? -val : val;
}

/// Standard normals by inversion: one uniform per draw keeps the mapping from
/// Standard normal by inversion of one uniform.
inline double CounterStream::normal()
{
    return normal_inv_cdf(uniform());
}

inline std::vector<double> standard_normals(StreamKey key, std::size_t count)
{
    std::vector<double> out(count);
    CounterStream(key).fill_normals(out);
    return out;
}

//---------------------------------------------------------------------------//
// Poisson
//---------------------------------------------------------------------------//

/// Means below this use sequential inversion; at or above it, Hörmann's PTRS
/// transformed rejection.
inline constexpr double kPoissonRejectionThreshold = 10.0;

inline std::int64_t poisson(CounterStream& stream, double mean)
{
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw BadInput("poisson: mean must be finite and non-negative");
    if (mean == 0.0)
        return 0;

    if (mean < kPoissonRejectionThreshold) {
        const double u = stream.uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::int64_t k = 0;
        // The cap only matters if rounding leaves cdf a hair below u.
        while (u > cdf && k < 1000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        const double u = stream.uniform() - 0.5;
        const double v = stream.uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr)
            return static_cast<std::int64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us))
            continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1.0))
            return static_cast<std::int64_t>(k);
    }
}

inline std::int64_t poisson(StreamKey key, double mean)
{
    CounterStream stream(key);
    return poisson(stream, mean);
}

//---------------------------------------------------------------------------//
// Increment manipulation and couplings
//---------------------------------------------------------------------------//

/// Sums consecutive blocks of `ratio` fine increments into coarse increments.
inline std::vector<double> coarsen_increments(std::span<const double> fine, int ratio)
{
    if (ratio < 1 || fine.size() % static_cast<std::size_t>(ratio) != 0)
        throw BadInput("coarsen_increments: length must be divisible by the ratio");
    const auto m = static_cast<std::size_t>(ratio);
    std::vector<double> coarse(fine.size() / m, 0.0);
    for (std::size_t j = 0; j < coarse.size(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            s += fine[j * m + i];
        coarse[j] = s;
    }
    return coarse;
}

/// Mean and standard deviation of a Gaussian; std == 0 is a point mass.
struct GaussianSpec {
    double mean = 0.0;
    double std = 1.0;

    double inv_cdf(double u) const { return mean + std * normal_inv_cdf(u); }
};

/// Comonotone coupling of two one-dimensional laws through a common uniform.
/// In 1D this is the Wasserstein-p optimal joint law for every p >= 1.
template <class FineInvCdf, class CoarseInvCdf>
std::pair<double, double> inverse_cdf_couple(const FineInvCdf& fine_inv_cdf,
                                             const CoarseInvCdf& coarse_inv_cdf, double u)
{
    if (!(u > 0.0 && u < 1.0))
        throw BadInput("inverse_cdf_couple: u must lie in (0, 1)");
    return {fine_inv_cdf(u), coarse_inv_cdf(u)};
}

}  // namespace mlmc
