#include "recengine/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rec::stats {

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace

double ln_gamma(double x) { return std::lgamma(x); }

double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * std::log(x) +
                         b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return bt * beta_cf(a, b, x) / a;
    }
    return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double inc_gamma_lower(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::runtime_error("inc_gamma_lower: domain error");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) {
        // Series representation.
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 3e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - ln_gamma(a));
    }
    // Continued fraction for the upper tail.
    constexpr double kFpMin = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kFpMin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = b + an / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 3e-16) break;
    }
    const double upper = std::exp(-x + a * std::log(x) - ln_gamma(a)) * h;
    return 1.0 - upper;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double student_t_cdf(double t, double df) {
    if (df <= 0.0) throw std::runtime_error("student_t_cdf: df must be positive");
    const double x = df / (df + t * t);
    const double half_tail = 0.5 * inc_beta(df / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

double student_t_quantile(double p, double df) {
    if (p <= 0.0 || p >= 1.0) throw std::runtime_error("student_t_quantile: p must be in (0,1)");
    double lo = -1e3, hi = 1e3;
    while (student_t_cdf(lo, df) > p) lo *= 2.0;
    while (student_t_cdf(hi, df) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-12 * std::max(1.0, std::fabs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

double noncentral_t_cdf(double t, double df, double delta) {
    if (df <= 0.0) throw std::runtime_error("noncentral_t_cdf: df must be positive");
    if (t < 0.0) return 1.0 - noncentral_t_cdf(-t, df, -delta);

    const double x = t * t / (t * t + df);
    const double lambda = 0.5 * delta * delta;
    // P(T <= t) = Phi(-delta) + 1/2 * sum_j [ p_j I_x(j+1/2, df/2)
    //                                       + q_j I_x(j+1, df/2) ]
    double sum = 0.0;
    if (x > 0.0) {
        double p_j = std::exp(-lambda);
        // q_0 = delta * exp(-lambda) / (sqrt(2) * Gamma(3/2))
        double q_j = delta * std::exp(-lambda) / (std::sqrt(2.0) * std::exp(ln_gamma(1.5)));
        for (int j = 0; j < 2000; ++j) {
            const double term = p_j * inc_beta(j + 0.5, df / 2.0, x) +
                                q_j * inc_beta(j + 1.0, df / 2.0, x);
            sum += term;
            if (j > 4 && std::fabs(term) < 1e-14 * std::max(1.0, std::fabs(sum))) break;
            p_j *= lambda / (j + 1.0);
            q_j *= lambda / (j + 1.5);
        }
    }
    double cdf = normal_cdf(-delta) + 0.5 * sum;
    return std::clamp(cdf, 0.0, 1.0);
}

double chi_square_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return 1.0 - inc_gamma_lower(df / 2.0, x / 2.0);
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::runtime_error("mean of empty vector");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) throw std::runtime_error("sample variance needs at least two values");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

double sample_sd(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

double median(std::vector<double> v) {
    if (v.empty()) throw std::runtime_error("median of empty vector");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::runtime_error("quantile of empty vector");
    if (q < 0.0 || q > 1.0) throw std::runtime_error("quantile level out of range");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= v.size()) return v.back();
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) {
        throw std::runtime_error("welch_t_test needs at least two values per group");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a) / na;
    const double vb = sample_variance(b) / nb;
    WelchResult r;
    const double denom = std::sqrt(va + vb);
    if (denom == 0.0) {
        r.t = 0.0;
        r.df = na + nb - 2.0;
        r.p = 1.0;
        return r;
    }
    r.t = (mean(a) - mean(b)) / denom;
    r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    r.p = 2.0 * (1.0 - student_t_cdf(std::fabs(r.t), r.df));
    return r;
}

double common_language_effect(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) {
        throw std::runtime_error("common_language_effect needs non-empty groups");
    }
    // Midrank Mann-Whitney U: ties contribute half a win each.
    struct Obs {
        double v;
        int group;
    };
    std::vector<Obs> pool;
    pool.reserve(a.size() + b.size());
    for (double v : a) pool.push_back({v, 0});
    for (double v : b) pool.push_back({v, 1});
    std::sort(pool.begin(), pool.end(), [](const Obs& x, const Obs& y) { return x.v < y.v; });
    double rank_sum_a = 0.0;
    std::size_t i = 0;
    while (i < pool.size()) {
        std::size_t j = i;
        while (j < pool.size() && pool[j].v == pool[i].v) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j); // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (pool[k].group == 0) rank_sum_a += midrank;
        }
        i = j;
    }
    const double n1 = static_cast<double>(a.size());
    const double n2 = static_cast<double>(b.size());
    const double u_a = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    return u_a / (n1 * n2);
}

SlopeFit ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::runtime_error("ols_slope: length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw std::runtime_error("ols_slope needs at least three points");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::runtime_error("ols_slope: x values are all equal");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        sse += e * e;
    }
    const double sigma2 = sse / static_cast<double>(n - 2);
    f.stderr_slope = std::sqrt(sigma2 / sxx);
    if (f.stderr_slope == 0.0) {
        f.t = 0.0;
        f.p = f.slope == 0.0 ? 1.0 : 0.0;
        return f;
    }
    f.t = f.slope / f.stderr_slope;
    f.p = 2.0 * (1.0 - student_t_cdf(std::fabs(f.t), static_cast<double>(n - 2)));
    return f;
}

double chi_square_gof_p(const std::vector<double>& observed, const std::vector<double>& expected) {
    if (observed.size() != expected.size() || observed.empty()) {
        throw std::runtime_error("chi_square_gof_p: length mismatch");
    }
    // Pool cells with expectation under 5 into one bucket, the usual rule.
    double stat = 0.0;
    double pooled_obs = 0.0, pooled_exp = 0.0;
    int cells = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] < 5.0) {
            pooled_obs += observed[i];
            pooled_exp += expected[i];
            continue;
        }
        const double d = observed[i] - expected[i];
        stat += d * d / expected[i];
        ++cells;
    }
    if (pooled_exp > 0.0) {
        const double d = pooled_obs - pooled_exp;
        stat += d * d / pooled_exp;
        ++cells;
    }
    if (cells < 2) throw std::runtime_error("chi_square_gof_p: too few cells");
    return chi_square_sf(stat, static_cast<double>(cells - 1));
}

} // namespace rec::stats
