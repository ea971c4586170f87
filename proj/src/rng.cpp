#include "hpsim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace hpsim::rng {

namespace {

double poly(const double* c, int n, double r) {
    double v = c[n - 1];
    for (int i = n - 2; i >= 0; --i) v = v * r + c[i];
    return v;
}

}  // namespace

double standard_normal_quantile(double p) {
    // AS241 PPND16 (Wichura 1988), |relative error| < 1e-15 over (0,1).
    static const double a[8] = {
        3.3871328727963666080e0,  1.3314166789178437745e2, 1.9715909503065514427e3,
        1.3731693765509461125e4,  4.5921953931549871457e4, 6.7265770927008700853e4,
        3.3430575583588128105e4,  2.5090809287301226727e3};
    static const double b[8] = {
        1.0,                      4.2313330701600911252e1, 6.8718700749205790830e2,
        5.3941960214247511077e3,  2.1213794301586595867e4, 3.9307895800092710610e4,
        2.8729085735721942674e4,  5.2264952788528545610e3};
    static const double c[8] = {
        1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
        3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
        2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static const double d[8] = {
        1.0,                      2.05319162663775882187e0, 1.67638483018380384940e0,
        6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
        5.47593808499534494600e-4, 1.05075007164441684324e-9};
    static const double e[8] = {
        6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
        2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
        2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static const double f[8] = {
        1.0,                      5.99832206555887937690e-1, 1.36929880922735805310e-1,
        1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
        1.42151175831644588870e-7, 2.04426310338993978564e-15};

    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal quantile needs p in (0,1)");

    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * poly(a, 8, r) / poly(b, 8, r);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double z;
    if (r <= 5.0) {
        r -= 1.6;
        z = poly(c, 8, r) / poly(d, 8, r);
    } else {
        r -= 5.0;
        z = poly(e, 8, r) / poly(f, 8, r);
    }
    return q < 0.0 ? -z : z;
}

double gamma_draw(Stream& s, double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be positive");
    if (shape < 1.0) {
        // Boost: X ~ Gamma(shape+1), X * U^(1/shape) ~ Gamma(shape).
        const double u = s.uniform_open();
        return gamma_draw(s, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia & Tsang (2000) squeeze method.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = standard_normal(s);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = s.uniform_open();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

int64_t poisson_draw(Stream& s, double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("poisson rate must be nonnegative");
    if (lambda == 0.0) return 0;
    if (lambda < 10.0) {
        // Knuth: count uniforms until their product drops below exp(-lambda).
        const double limit = std::exp(-lambda);
        int64_t k = 0;
        double prod = 1.0;
        do {
            ++k;
            prod *= s.uniform01();
        } while (prod > limit);
        return k - 1;
    }
    // Hormann (1993) PTRS transformed rejection.
    const double b = 0.931 + 2.53 * std::sqrt(lambda);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_lambda = std::log(lambda);
    for (;;) {
        double u = s.uniform01() - 0.5;
        const double v = s.uniform01();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<int64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_lambda - lambda - std::lgamma(k + 1.0)) {
            return static_cast<int64_t>(k);
        }
    }
}

int64_t negbin_draw(Stream& s, double mu, double kappa) {
    if (!(mu >= 0.0)) throw std::invalid_argument("negbin mean must be nonnegative");
    if (!(kappa > 0.0)) throw std::invalid_argument("negbin size must be positive");
    if (mu == 0.0) return 0;
    const double lambda = gamma_draw(s, kappa) * (mu / kappa);
    return poisson_draw(s, lambda);
}

int categorical_draw(Stream& s, std::span<const double> cumulative) {
    const double u = s.uniform01();
    const int n = static_cast<int>(cumulative.size());
    for (int k = 0; k < n; ++k) {
        if (u < cumulative[static_cast<std::size_t>(k)]) return k;
    }
    return n - 1;  // guards against cumulative[J-1] marginally below 1
}

}  // namespace hpsim::rng
