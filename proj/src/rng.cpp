#include "stegpool/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace stegpool {

std::uint64_t SplitMix64::below(std::uint64_t n) {
    // Lemire 2019; rejection keeps it exactly uniform.
    std::uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
        std::uint64_t t = -n % n;
        while (lo < t) {
            x = next();
            m = static_cast<__uint128_t>(x) * n;
            lo = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

void fill_uniform01(SplitMix64& rng, std::span<double> out) {
    for (double& v : out) v = rng.uniform01();
}

namespace {

// Normal quantile, Wichura's AS241 (PPND16, ~1e-16 accurate). Plain-double
// rational branches; the array fill vectorizes only the log/sqrt stage.

inline double as241_central(double r) {
    return (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r +
                 67265.770927008700853) *
                    r +
                45921.953931549871457) *
                   r +
               13731.693765509461125) *
                  r +
              1971.5909503065514427) *
                 r +
             133.14166789178437745) *
                r +
            3.387132872796366608) /
           (((((((r * 5226.495278852545703 + 28729.085735721942674) * r +
                 39307.89580009271061) *
                    r +
                21213.794301586595867) *
                   r +
               5394.1960214247511077) *
                  r +
              687.1870074920579083) *
                 r +
             42.313330701600911252) *
                r +
            1.0);
}

inline double as241_mid(double t) {
    return (((((((t * 7.7454501427834140764e-4 + 0.0227238449892691845833) * t +
                 0.24178072517745061177) *
                    t +
                1.27045825245236838258) *
                   t +
               3.64784832476320460504) *
                  t +
              5.7694972214606914055) *
                 t +
             4.6303378461565452959) *
                t +
            1.42343711074968357734) /
           (((((((t * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * t +
                 0.0151986665636164571966) *
                    t +
                0.14810397642748007459) *
                   t +
               0.68976733498510000455) *
                  t +
              1.6763848301838038494) *
                 t +
             2.05319162663775882187) *
                t +
            1.0);
}

inline double as241_far(double t) {
    return (((((((t * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * t +
                 0.0012426609473880784386) *
                    t +
                0.026532189526576123093) *
                   t +
               0.29656057182850489123) *
                  t +
              1.7848265399172913358) *
                 t +
             5.4637849111641143699) *
                t +
            6.6579046435011037772) /
           (((((((t * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * t +
                 1.8463183175100546818e-5) *
                    t +
                7.868691311456132591e-4) *
                   t +
               0.0148753612908506148525) *
                  t +
              0.13692988092273580531) *
                 t +
             0.59983220655588793769) *
                t +
            1.0);
}

inline double uniform_open(SplitMix64& rng) {
    // 52-bit uniform strictly inside (0,1), symmetric about 1/2
    return (static_cast<double>(rng.next() >> 12) + 0.5) * 0x1.0p-52;
}

double ppnd16(double u) {
    const double q = u - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * as241_central(r);
    }
    const double r0 = q < 0 ? u : 1.0 - u;
    const double s = std::sqrt(-std::log(r0));
    const double z = s <= 5.0 ? as241_mid(s - 1.6) : as241_far(s - 5.0);
    return q < 0 ? -z : z;
}

}  // namespace

void fill_normal(SplitMix64& rng, std::span<double> out) {
    const auto n = static_cast<Eigen::Index>(out.size());
    if (n == 0) return;

    // Scratch reused per thread: repeated 32k allocations at the heap top
    // otherwise trigger glibc trim churn that dwarfs the math.
    thread_local Eigen::ArrayXd u, r0, s;
    u.resize(n);
    r0.resize(n);
    s.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        u[i] = uniform_open(rng);
        r0[i] = u[i] < 0.5 ? u[i] : 1.0 - u[i];
    }
    s = (-r0.log()).sqrt();  // vectorized; used by tail lanes only

    for (Eigen::Index i = 0; i < n; ++i) {
        const double q = u[i] - 0.5;
        double z;
        if (std::abs(q) <= 0.425) {
            z = q * as241_central(0.180625 - q * q);
        } else {
            z = s[i] <= 5.0 ? as241_mid(s[i] - 1.6) : as241_far(s[i] - 5.0);
            if (q < 0) z = -z;
        }
        out[static_cast<std::size_t>(i)] = z;
    }
}

void fill_lognormal(SplitMix64& rng, double mu, double sd, std::span<double> out) {
    fill_normal(rng, out);
    Eigen::Map<Eigen::ArrayXd> a(out.data(), static_cast<Eigen::Index>(out.size()));
    a = (mu + sd * a).exp();
}

double draw_normal(SplitMix64& rng) { return ppnd16(uniform_open(rng)); }

void shuffle_indices(SplitMix64& rng, std::span<int> idx) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace stegpool
