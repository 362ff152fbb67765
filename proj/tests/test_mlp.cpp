#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "recengine/mlp.hpp"
#include "recengine/rng.hpp"

using namespace rec;

namespace {

// Small random problem: n rows of dim features with binary labels.
struct Problem {
    std::vector<double> rows;
    std::vector<int> labels;
    std::vector<int> groups;
    std::size_t n;
    int dim;
};

Problem make_problem(std::size_t n, int dim, std::uint64_t seed) {
    Problem p;
    p.n = n;
    p.dim = dim;
    Rng rng(seed, "mlp-problem");
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < dim; ++j) {
            const double x = rng.normal();
            p.rows.push_back(x);
            s += (j % 2 ? 1.0 : -1.0) * x;
        }
        p.labels.push_back(s + rng.normal() > 0.0 ? 1 : 0);
        p.groups.push_back(static_cast<int>(i / 2)); // two rows per group
    }
    return p;
}

MlpParams make_params(int in_dim, int hidden, std::uint64_t seed) {
    MlpParams params;
    params.in_dim = in_dim;
    params.hidden = hidden;
    Rng rng(seed, "mlp-init-test");
    params.w.resize(params.n_weights());
    for (double& w : params.w) w = 0.3 * rng.normal();
    return params;
}

} // namespace

TEST_CASE("analytic gradient matches central finite differences") {
    const auto prob = make_problem(12, 6, 3);
    auto params = make_params(prob.dim, 5, 9);

    std::vector<double> grad;
    const double loss = mlp_loss_and_grad(params, prob.rows.data(), prob.n, prob.labels.data(),
                                          &grad);
    REQUIRE(grad.size() == params.n_weights());
    CHECK(std::isfinite(loss));

    // probe at least 50 weights spread across the layout
    const double eps = 1e-6;
    const std::size_t stride = std::max<std::size_t>(1, params.n_weights() / 60);
    int probes = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.n_weights(); i += stride) {
        const double keep = params.w[i];
        params.w[i] = keep + eps;
        const double up =
            mlp_loss_and_grad(params, prob.rows.data(), prob.n, prob.labels.data(), nullptr);
        params.w[i] = keep - eps;
        const double dn =
            mlp_loss_and_grad(params, prob.rows.data(), prob.n, prob.labels.data(), nullptr);
        params.w[i] = keep;
        const double fd = (up - dn) / (2.0 * eps);
        const double rel = std::abs(fd - grad[i]) /
                           std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
        worst = std::max(worst, rel);
        ++probes;
    }
    CHECK(probes >= 50);
    CHECK(worst < 1e-4);
}

TEST_CASE("forward pass is a clamped sigmoid of the logit") {
    auto params = make_params(3, 2, 1);
    const std::vector<double> x{0.5, -1.0, 2.0};
    const double logit = mlp_logit(params, x.data());
    const double prob = mlp_forward(params, x.data());
    CHECK(prob == doctest::Approx(1.0 / (1.0 + std::exp(-logit))).epsilon(1e-12));
    CHECK(prob > 0.0);
    CHECK(prob < 1.0);
}

TEST_CASE("one-cycle schedule: ramp, single peak, final floor") {
    const double max_lr = 0.012;
    const int steps = 200;
    const auto lr = one_cycle_schedule(max_lr, steps);
    REQUIRE(static_cast<int>(lr.size()) == steps);

    CHECK(lr.front() == doctest::Approx(max_lr / 25.0).epsilon(1e-9));
    CHECK(lr.back() == doctest::Approx(max_lr / 100.0).epsilon(1e-9));

    // the peak value appears exactly once and every value stays in range
    const double peak = *std::max_element(lr.begin(), lr.end());
    CHECK(peak == doctest::Approx(max_lr).epsilon(1e-9));
    CHECK(std::count(lr.begin(), lr.end(), peak) == 1);
    for (double v : lr) {
        CHECK(v <= max_lr + 1e-12);
        CHECK(v >= max_lr / 100.0 - 1e-12);
    }

    // rises to the peak, then never rises again
    const auto peak_it = std::max_element(lr.begin(), lr.end());
    CHECK(std::is_sorted(lr.begin(), peak_it + 1));
    CHECK(std::is_sorted(peak_it, lr.end(), std::greater<double>()));

    // the ramp occupies the first 30% of steps
    const auto peak_idx = static_cast<int>(peak_it - lr.begin());
    CHECK(peak_idx == doctest::Approx(0.3 * steps).epsilon(0.02));
}

TEST_CASE("one-cycle schedule handles tiny step counts") {
    CHECK(one_cycle_schedule(0.01, 1).size() == 1);
    const auto two = one_cycle_schedule(0.01, 2);
    REQUIRE(two.size() == 2);
    CHECK(std::count(two.begin(), two.end(),
                     *std::max_element(two.begin(), two.end())) == 1);
}

TEST_CASE("training is bitwise reproducible and seed-sensitive") {
    const auto prob = make_problem(60, 6, 5);
    MlpConfig cfg;
    cfg.hidden_units = 8;
    cfg.epochs = 15;
    cfg.batch_size = 16;
    cfg.holdout_fraction = 0.1;
    cfg.seed = 77;

    const auto a = train_mlp_matrix(prob.rows, prob.n, prob.dim, prob.labels, prob.groups, cfg);
    const auto b = train_mlp_matrix(prob.rows, prob.n, prob.dim, prob.labels, prob.groups, cfg);
    REQUIRE(a.params.w.size() == b.params.w.size());
    CHECK(a.params.w == b.params.w); // bit-for-bit
    CHECK(a.trace.best_epoch == b.trace.best_epoch);

    auto cfg2 = cfg;
    cfg2.seed = 78;
    const auto c = train_mlp_matrix(prob.rows, prob.n, prob.dim, prob.labels, prob.groups, cfg2);
    CHECK(a.params.w != c.params.w);
}

TEST_CASE("training learns a separable problem") {
    // Labels depend linearly on the inputs; a trained net must beat chance
    // by a wide margin on its own training data.
    const auto prob = make_problem(300, 6, 11);
    MlpConfig cfg;
    cfg.hidden_units = 12;
    cfg.epochs = 60;
    cfg.batch_size = 32;
    cfg.dropout = 0.05;
    cfg.holdout_fraction = 0.1;
    cfg.seed = 5;
    const auto fit = train_mlp_matrix(prob.rows, prob.n, prob.dim, prob.labels, prob.groups, cfg);

    int correct = 0;
    for (std::size_t i = 0; i < prob.n; ++i) {
        const double pr =
            mlp_forward(fit.params, prob.rows.data() + i * static_cast<std::size_t>(prob.dim));
        if ((pr > 0.5) == (prob.labels[i] == 1)) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(prob.n) > 0.8);

    // loss decreased over training
    REQUIRE(!fit.trace.train_loss.empty());
    CHECK(fit.trace.train_loss.back() < fit.trace.train_loss.front());
}

TEST_CASE("weights come from the epoch with the lowest hold-out loss") {
    const auto prob = make_problem(120, 5, 13);
    MlpConfig cfg;
    cfg.hidden_units = 6;
    cfg.epochs = 25;
    cfg.batch_size = 0; // full batch
    cfg.holdout_fraction = 0.2;
    cfg.seed = 19;
    const auto fit = train_mlp_matrix(prob.rows, prob.n, prob.dim, prob.labels, prob.groups, cfg);

    REQUIRE(fit.trace.best_epoch >= 0);
    REQUIRE(static_cast<std::size_t>(fit.trace.best_epoch) < fit.trace.holdout_loss.size());
    const double best = fit.trace.holdout_loss[static_cast<std::size_t>(fit.trace.best_epoch)];
    for (double h : fit.trace.holdout_loss) CHECK(best <= h + 1e-12);
    CHECK_FALSE(fit.trace.holdout_empty);
    CHECK(fit.trace.n_train_rows + fit.trace.n_holdout_rows == prob.n);

    // groups stay together: holdout row count must be even (2 rows/group)
    CHECK(fit.trace.n_holdout_rows % 2 == 0);
}

TEST_CASE("lr trace follows the one-cycle schedule") {
    const auto prob = make_problem(40, 4, 23);
    MlpConfig cfg;
    cfg.hidden_units = 4;
    cfg.epochs = 10;
    cfg.batch_size = 10;
    cfg.holdout_fraction = 0.1;
    cfg.max_lr = 0.02;
    cfg.seed = 3;
    const auto fit = train_mlp_matrix(prob.rows, prob.n, prob.dim, prob.labels, prob.groups, cfg);
    const auto expect = one_cycle_schedule(cfg.max_lr, static_cast<int>(fit.trace.lr_by_step.size()));
    CHECK(fit.trace.lr_by_step == expect);
}

TEST_CASE("zero hold-out fraction trains on everything and flags it") {
    const auto prob = make_problem(30, 4, 29);
    MlpConfig cfg;
    cfg.hidden_units = 4;
    cfg.epochs = 5;
    cfg.holdout_fraction = 0.0;
    cfg.seed = 3;
    const auto fit = train_mlp_matrix(prob.rows, prob.n, prob.dim, prob.labels, prob.groups, cfg);
    CHECK(fit.trace.holdout_empty);
    CHECK(fit.trace.n_train_rows == prob.n);
    // selection falls back to the clean training loss
    CHECK(fit.trace.best_epoch >= 0);
    CHECK(fit.trace.holdout_loss.size() == static_cast<std::size_t>(cfg.epochs));
}
