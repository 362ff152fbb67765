#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "recengine/linalg.hpp"
#include "recengine/rng.hpp"
#include "recengine/stats.hpp"

using namespace rec;

TEST_CASE("special functions hit reference values") {
    // ln Gamma at integers and halves: ln(0!)=0, ln(4!)=ln 24, Gamma(1/2)=sqrt(pi)
    CHECK(stats::ln_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(stats::ln_gamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-10));
    CHECK(stats::ln_gamma(0.5) == doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-10));

    // I_x(a,b) closed forms: I_x(1,1)=x, I_x(2,2)=x^2(3-2x)
    CHECK(stats::inc_beta(1.0, 1.0, 0.3) == doctest::Approx(0.3).epsilon(1e-10));
    CHECK(stats::inc_beta(2.0, 2.0, 0.4) ==
          doctest::Approx(0.4 * 0.4 * (3.0 - 0.8)).epsilon(1e-10));
    CHECK(stats::inc_beta(2.0, 5.0, 0.0) == doctest::Approx(0.0));
    CHECK(stats::inc_beta(2.0, 5.0, 1.0) == doctest::Approx(1.0));

    // P(1, x) = 1 - exp(-x)
    CHECK(stats::inc_gamma_lower(1.0, 2.0) ==
          doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-10));
}

TEST_CASE("normal and t distribution functions") {
    CHECK(stats::normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(stats::normal_cdf(1.959963985) == doctest::Approx(0.975).epsilon(1e-7));
    CHECK(stats::normal_cdf(-1.644853627) == doctest::Approx(0.05).epsilon(1e-7));

    // t CDF reference values (standard tables)
    CHECK(stats::student_t_cdf(0.0, 7.0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(stats::student_t_cdf(2.776445105, 4.0) == doctest::Approx(0.975).epsilon(1e-7));
    CHECK(stats::student_t_cdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-7)); // Cauchy

    // quantile inverts the CDF
    for (double p : {0.05, 0.5, 0.9, 0.975}) {
        for (double df : {3.0, 10.0, 100.0}) {
            const double t = stats::student_t_quantile(p, df);
            CHECK(stats::student_t_cdf(t, df) == doctest::Approx(p).epsilon(1e-6));
        }
    }
}

TEST_CASE("noncentral t reduces to central at delta zero and shifts correctly") {
    for (double t : {-1.0, 0.0, 1.5, 3.0}) {
        CHECK(stats::noncentral_t_cdf(t, 9.0, 0.0) ==
              doctest::Approx(stats::student_t_cdf(t, 9.0)).epsilon(1e-8));
    }
    // with large df the noncentral t approaches N(delta, 1)
    CHECK(stats::noncentral_t_cdf(2.0, 4000.0, 2.0) == doctest::Approx(0.5).epsilon(2e-3));
    CHECK(stats::noncentral_t_cdf(0.0, 4000.0, 2.0) ==
          doctest::Approx(stats::normal_cdf(-2.0)).epsilon(2e-3));
    // monotone in t
    CHECK(stats::noncentral_t_cdf(1.0, 10.0, 1.5) < stats::noncentral_t_cdf(2.0, 10.0, 1.5));
}

TEST_CASE("chi-square survival function reference values") {
    // SF(x; 2) = exp(-x/2)
    CHECK(stats::chi_square_sf(3.0, 2.0) == doctest::Approx(std::exp(-1.5)).epsilon(1e-9));
    // critical value 3.841 at df=1 -> p 0.05
    CHECK(stats::chi_square_sf(3.841458821, 1.0) == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("summary statistics") {
    const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(stats::mean(v) == doctest::Approx(2.5));
    CHECK(stats::sample_variance(v) == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
    CHECK(stats::median(v) == doctest::Approx(2.5));
    CHECK(stats::median({5.0, 1.0, 9.0}) == doctest::Approx(5.0));
    CHECK(stats::quantile({1.0, 2.0, 3.0, 4.0}, 0.0) == doctest::Approx(1.0));
    CHECK(stats::quantile({1.0, 2.0, 3.0, 4.0}, 1.0) == doctest::Approx(4.0));
    CHECK(stats::quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
}

TEST_CASE("welch t test on a textbook fixture") {
    // unequal variances, unequal sizes; reference computed from the Welch
    // formulas directly
    const std::vector<double> a{27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6,
                                23.1, 19.6, 19.0, 21.7, 21.4};
    const std::vector<double> b{27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2,
                                21.9, 22.1, 22.9, 30.5, 25.2};
    const auto r = stats::welch_t_test(a, b);
    // means 20.82 vs 23.71; Welch t = -2.89416, df = 27.9172, p = 0.0072980
    CHECK(r.t == doctest::Approx(-2.894164455).epsilon(1e-9));
    CHECK(r.df == doctest::Approx(27.91724056).epsilon(1e-9));
    CHECK(r.p == doctest::Approx(0.007297956).epsilon(1e-5));
}

TEST_CASE("common-language effect size agrees with the all-pairs definition") {
    Rng rng(31, "cles");
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a, b;
        const std::size_t na = 1 + rng.next_below(50);
        const std::size_t nb = 1 + rng.next_below(50);
        for (std::size_t i = 0; i < na; ++i) {
            a.push_back(static_cast<double>(rng.next_below(12))); // many ties
        }
        for (std::size_t i = 0; i < nb; ++i) {
            b.push_back(static_cast<double>(rng.next_below(12)));
        }
        double wins = 0.0;
        for (double x : a) {
            for (double y : b) {
                if (x > y) wins += 1.0;
                else if (x == y) wins += 0.5;
            }
        }
        const double expected = wins / (static_cast<double>(na) * static_cast<double>(nb));
        CHECK(stats::common_language_effect(a, b) ==
              doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("ols slope matches the closed form and flags significance") {
    // y = 2x + 1 exactly: slope 2, zero residual, p ~ 0
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
    const std::vector<double> yy{3.0, 5.0, 7.0, 9.0, 11.0};
    const auto fit = stats::ols_slope(x, yy);
    CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(fit.p < 1e-8);

    // pure noise around a constant: slope ~0, p large
    Rng rng(17);
    std::vector<double> xs, ys;
    for (int i = 0; i < 80; ++i) {
        xs.push_back(i);
        ys.push_back(rng.normal());
    }
    const auto noise = stats::ols_slope(xs, ys);
    CHECK(std::abs(noise.slope) < 0.05);
    CHECK(noise.p > 0.01);
}

TEST_CASE("chi-square goodness of fit accepts uniform counts, rejects skewed ones") {
    Rng rng(41);
    std::vector<double> uniform(20, 0.0);
    for (int i = 0; i < 4000; ++i) uniform[rng.next_below(20)] += 1.0;
    const std::vector<double> expected(20, 200.0);
    CHECK(stats::chi_square_gof_p(uniform, expected) > 0.01);

    std::vector<double> skewed(20, 100.0);
    skewed[0] = 900.0;
    skewed[1] = 1100.0;
    std::vector<double> expect2(20, (18.0 * 100.0 + 2000.0) / 20.0);
    CHECK(stats::chi_square_gof_p(skewed, expect2) < 1e-6);
}

TEST_CASE("least squares recovers exact coefficients") {
    // y = 3 + 2a - b on a well-conditioned design
    std::vector<double> a;
    std::vector<double> y;
    Rng rng(53);
    const std::size_t n = 40;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.normal();
        const double v = rng.normal();
        a.insert(a.end(), {1.0, u, v});
        y.push_back(3.0 + 2.0 * u - v);
    }
    const auto fit = least_squares(a, n, 3, y);
    CHECK(fit.rank == 3);
    CHECK(fit.coef[0] == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(fit.coef[1] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(fit.coef[2] == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("collinear columns error strictly or drop tolerantly") {
    // third column = first + second
    std::vector<double> a;
    std::vector<double> y;
    Rng rng(59);
    const std::size_t n = 30;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.normal();
        const double v = rng.normal();
        a.insert(a.end(), {u, v, u + v});
        y.push_back(u - v);
    }
    const std::vector<std::string> names{"alpha", "beta", "gamma"};
    // any one of the three can be the redundant column; the message must
    // name exactly one of them by its label
    try {
        least_squares(a, n, 3, y, false, &names);
        FAIL("expected a rank-deficiency error");
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        CHECK(what.find("design matrix is rank deficient (rank 2 of 3)") != std::string::npos);
        int named = 0;
        for (const auto& name : names) {
            if (what.find(name) != std::string::npos) ++named;
        }
        CHECK(named == 1);
    }

    const auto fit = least_squares(a, n, 3, y, true);
    CHECK(fit.rank == 2);
    REQUIRE(fit.dropped.size() == 1);
    // predictions still reproduce y even with a dropped column
    for (std::size_t i = 0; i < n; ++i) {
        const double pred = fit.coef[0] * a[i * 3] + fit.coef[1] * a[i * 3 + 1] +
                            fit.coef[2] * a[i * 3 + 2];
        CHECK(pred == doctest::Approx(y[i]).epsilon(1e-8));
    }
}

TEST_CASE("weighted least squares matches replication") {
    // weight w on a row ~ repeating the row w times
    const std::vector<double> a{1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0};
    const std::vector<double> y{1.0, 3.0, 2.0, 10.0};
    const std::vector<double> w{2.0, 2.0, 1.0, 1.0};

    std::vector<double> a_rep, y_rep;
    for (std::size_t i = 0; i < 4; ++i) {
        const int reps = static_cast<int>(w[i]);
        for (int r = 0; r < reps; ++r) {
            a_rep.insert(a_rep.end(), {a[i * 2], a[i * 2 + 1]});
            y_rep.push_back(y[i]);
        }
    }
    const auto wfit = weighted_least_squares(a, 4, 2, y, w);
    const auto rfit = least_squares(a_rep, y_rep.size(), 2, y_rep);
    CHECK(wfit.coef[0] == doctest::Approx(rfit.coef[0]).epsilon(1e-10));
    CHECK(wfit.coef[1] == doctest::Approx(rfit.coef[1]).epsilon(1e-10));
}
