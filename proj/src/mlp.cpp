#include "recengine/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "recengine/rng.hpp"

namespace rec {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }

struct Workspace {
    std::vector<double> h1, h2;       // activations
    std::vector<double> m1, m2;       // dropout scale masks (0 or 1/(1-p))
    std::vector<double> g1, g2;       // backprop buffers
};

// Forward pass for one row with optional dropout masks applied to the two
// hidden layers. Returns the logit.
double forward_row(const MlpParams& p, const double* x, Workspace& ws, bool use_masks) {
    const int d = p.in_dim, h = p.hidden;
    const double* w1 = p.w.data() + p.w1();
    const double* b1 = p.w.data() + p.b1();
    const double* w2 = p.w.data() + p.w2();
    const double* b2 = p.w.data() + p.b2();
    const double* w3 = p.w.data() + p.w3();
    const double b3 = p.w[p.b3()];
    for (int j = 0; j < h; ++j) {
        double s = b1[j];
        const double* wrow = w1 + static_cast<std::size_t>(j) * d;
        for (int i = 0; i < d; ++i) s += wrow[i] * x[i];
        s = s > 0.0 ? s : 0.0;
        if (use_masks) s *= ws.m1[static_cast<std::size_t>(j)];
        ws.h1[static_cast<std::size_t>(j)] = s;
    }
    for (int j = 0; j < h; ++j) {
        double s = b2[j];
        const double* wrow = w2 + static_cast<std::size_t>(j) * h;
        for (int i = 0; i < h; ++i) s += wrow[i] * ws.h1[static_cast<std::size_t>(i)];
        s = s > 0.0 ? s : 0.0;
        if (use_masks) s *= ws.m2[static_cast<std::size_t>(j)];
        ws.h2[static_cast<std::size_t>(j)] = s;
    }
    double z = b3;
    for (int j = 0; j < h; ++j) z += w3[j] * ws.h2[static_cast<std::size_t>(j)];
    return z;
}

// Accumulate gradients for one row given dloss/dlogit. Assumes ws holds the
// forward activations for this row.
void backward_row(const MlpParams& p, const double* x, double dz, const Workspace& ws,
                  bool use_masks, double* grad) {
    const int d = p.in_dim, h = p.hidden;
    const double* w2 = p.w.data() + p.w2();
    const double* w3 = p.w.data() + p.w3();
    double* g_w1 = grad + p.w1();
    double* g_b1 = grad + p.b1();
    double* g_w2 = grad + p.w2();
    double* g_b2 = grad + p.b2();
    double* g_w3 = grad + p.w3();
    double* g_b3 = grad + p.b3();

    g_b3[0] += dz;
    thread_local std::vector<double> d2, d1;
    d2.assign(static_cast<std::size_t>(h), 0.0);
    d1.assign(static_cast<std::size_t>(h), 0.0);
    for (int j = 0; j < h; ++j) {
        const double a = ws.h2[static_cast<std::size_t>(j)];
        g_w3[j] += dz * a;
        double dj = dz * w3[j];
        if (use_masks) dj *= ws.m2[static_cast<std::size_t>(j)];
        // ReLU gate: the stored activation is positive iff the unit fired.
        d2[static_cast<std::size_t>(j)] = a > 0.0 ? dj : 0.0;
    }
    for (int j = 0; j < h; ++j) {
        const double dj = d2[static_cast<std::size_t>(j)];
        if (dj == 0.0) continue;
        g_b2[j] += dj;
        double* grow = g_w2 + static_cast<std::size_t>(j) * h;
        const double* wrow = w2 + static_cast<std::size_t>(j) * h;
        for (int i = 0; i < h; ++i) {
            grow[i] += dj * ws.h1[static_cast<std::size_t>(i)];
            d1[static_cast<std::size_t>(i)] += dj * wrow[i];
        }
    }
    for (int j = 0; j < h; ++j) {
        double dj = d1[static_cast<std::size_t>(j)];
        if (use_masks) dj *= ws.m1[static_cast<std::size_t>(j)];
        if (ws.h1[static_cast<std::size_t>(j)] <= 0.0) continue;
        if (dj == 0.0) continue;
        g_b1[j] += dj;
        double* grow = g_w1 + static_cast<std::size_t>(j) * d;
        for (int i = 0; i < d; ++i) grow[i] += dj * x[i];
    }
}

} // namespace

std::vector<double> one_cycle_schedule(double max_lr, int total_steps) {
    if (total_steps < 1) throw std::runtime_error("one_cycle_schedule needs at least one step");
    if (max_lr <= 0.0) throw std::runtime_error("one_cycle_schedule needs a positive max_lr");
    const double start = max_lr / 25.0;
    const double end = max_lr / 100.0;
    std::vector<double> lr(static_cast<std::size_t>(total_steps));
    if (total_steps == 1) {
        lr[0] = max_lr;
        return lr;
    }
    const int last = total_steps - 1;
    int peak = static_cast<int>(std::llround(0.3 * total_steps));
    peak = std::clamp(peak, 1, last);
    for (int s = 0; s <= peak; ++s) {
        lr[static_cast<std::size_t>(s)] =
            start + (max_lr - start) * static_cast<double>(s) / static_cast<double>(peak);
    }
    for (int s = peak + 1; s <= last; ++s) {
        const double frac = static_cast<double>(s - peak) / static_cast<double>(last - peak);
        lr[static_cast<std::size_t>(s)] =
            end + (max_lr - end) * 0.5 * (1.0 + std::cos(frac * 3.14159265358979323846));
    }
    return lr;
}

double mlp_logit(const MlpParams& p, const double* x) {
    Workspace ws;
    ws.h1.resize(static_cast<std::size_t>(p.hidden));
    ws.h2.resize(static_cast<std::size_t>(p.hidden));
    return forward_row(p, x, ws, false);
}

double mlp_forward(const MlpParams& p, const double* x) {
    const double s = sigmoid(mlp_logit(p, x));
    return std::clamp(s, 1e-12, 1.0 - 1e-12);
}

double mlp_loss_and_grad(const MlpParams& p, const double* rows, std::size_t n,
                         const int* labels, std::vector<double>* grad) {
    if (n == 0) throw std::runtime_error("mlp_loss_and_grad: empty batch");
    Workspace ws;
    ws.h1.resize(static_cast<std::size_t>(p.hidden));
    ws.h2.resize(static_cast<std::size_t>(p.hidden));
    if (grad) grad->assign(p.n_weights(), 0.0);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* x = rows + r * static_cast<std::size_t>(p.in_dim);
        const double z = forward_row(p, x, ws, false);
        loss += softplus(z) - (labels[r] ? z : 0.0);
        if (grad) {
            const double dz = (sigmoid(z) - static_cast<double>(labels[r])) / static_cast<double>(n);
            backward_row(p, x, dz, ws, false, grad->data());
        }
    }
    return loss / static_cast<double>(n);
}

MlpTrainResult train_mlp_matrix(const std::vector<double>& rows, std::size_t n, int dim,
                                const std::vector<int>& labels, const std::vector<int>& groups,
                                const MlpConfig& cfg) {
    if (n == 0) throw std::runtime_error("cannot train on zero samples");
    if (rows.size() != n * static_cast<std::size_t>(dim)) {
        throw std::runtime_error("training matrix shape mismatch");
    }
    if (labels.size() != n || groups.size() != n) {
        throw std::runtime_error("labels/groups length mismatch");
    }
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
        throw std::runtime_error("dropout must lie in [0, 1)");
    }
    if (cfg.epochs < 1) throw std::runtime_error("epochs must be >= 1");

    // Hold out a fraction of the groups, keeping every row of a held-out
    // group together.
    std::vector<int> unique_groups;
    {
        std::unordered_set<int> seen;
        for (int g : groups) {
            if (seen.insert(g).second) unique_groups.push_back(g);
        }
    }
    Rng holdout_rng(cfg.seed, "holdout");
    holdout_rng.shuffle(unique_groups);
    const std::size_t n_hold_groups =
        static_cast<std::size_t>(cfg.holdout_fraction * static_cast<double>(unique_groups.size()));
    std::unordered_set<int> held(unique_groups.begin(),
                                 unique_groups.begin() + static_cast<std::ptrdiff_t>(n_hold_groups));
    std::vector<std::size_t> train_rows, hold_rows;
    for (std::size_t r = 0; r < n; ++r) {
        (held.count(groups[r]) ? hold_rows : train_rows).push_back(r);
    }
    if (train_rows.empty()) throw std::runtime_error("holdout split left no training rows");

    MlpTrainResult out;
    auto& trace = out.trace;
    trace.holdout_empty = hold_rows.empty();
    trace.n_train_rows = train_rows.size();
    trace.n_holdout_rows = hold_rows.size();

    MlpParams p;
    p.in_dim = dim;
    p.hidden = cfg.hidden_units;
    p.w.assign(p.n_weights(), 0.0);
    {
        // Kaiming-uniform fan-in initialization, biases at zero.
        Rng init(cfg.seed, "init");
        const double bound1 = std::sqrt(6.0 / static_cast<double>(dim));
        const double bound2 = std::sqrt(6.0 / static_cast<double>(cfg.hidden_units));
        for (std::size_t i = p.w1(); i < p.b1(); ++i) p.w[i] = init.uniform(-bound1, bound1);
        for (std::size_t i = p.w2(); i < p.b2(); ++i) p.w[i] = init.uniform(-bound2, bound2);
        for (std::size_t i = p.w3(); i < p.b3(); ++i) p.w[i] = init.uniform(-bound2, bound2);
    }

    const std::size_t batch =
        cfg.batch_size <= 0 ? train_rows.size()
                            : std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                    train_rows.size());
    const std::size_t batches_per_epoch = (train_rows.size() + batch - 1) / batch;
    const int total_steps = cfg.epochs * static_cast<int>(batches_per_epoch);
    trace.lr_by_step = one_cycle_schedule(cfg.max_lr, total_steps);

    std::vector<double> grad(p.n_weights(), 0.0);
    std::vector<double> adam_m(p.n_weights(), 0.0);
    std::vector<double> adam_v(p.n_weights(), 0.0);
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    Workspace ws;
    ws.h1.resize(static_cast<std::size_t>(p.hidden));
    ws.h2.resize(static_cast<std::size_t>(p.hidden));
    ws.m1.resize(static_cast<std::size_t>(p.hidden));
    ws.m2.resize(static_cast<std::size_t>(p.hidden));

    auto clean_loss = [&](const std::vector<std::size_t>& idx) {
        double loss = 0.0;
        for (std::size_t r : idx) {
            const double z = forward_row(p, rows.data() + r * static_cast<std::size_t>(dim), ws, false);
            loss += softplus(z) - (labels[r] ? z : 0.0);
        }
        return loss / static_cast<double>(idx.size());
    };

    MlpParams best = p;
    double best_loss = std::numeric_limits<double>::infinity();
    int step = 0;
    std::vector<std::size_t> order = train_rows;
    const bool use_dropout = cfg.dropout > 0.0;
    const double keep = 1.0 - cfg.dropout;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (batches_per_epoch > 1) {
            Rng order_rng(cfg.seed, "order", epoch);
            order_rng.shuffle(order);
        }
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const std::size_t lo = b * batch;
            const std::size_t hi = std::min(lo + batch, order.size());
            const std::size_t bn = hi - lo;
            std::fill(grad.begin(), grad.end(), 0.0);
            Rng drop_rng(cfg.seed, "dropout", epoch, static_cast<std::uint64_t>(b));
            double batch_loss = 0.0;
            for (std::size_t k = lo; k < hi; ++k) {
                const std::size_t r = order[k];
                if (use_dropout) {
                    for (int j = 0; j < p.hidden; ++j) {
                        ws.m1[static_cast<std::size_t>(j)] =
                            drop_rng.next_double() < cfg.dropout ? 0.0 : 1.0 / keep;
                        ws.m2[static_cast<std::size_t>(j)] =
                            drop_rng.next_double() < cfg.dropout ? 0.0 : 1.0 / keep;
                    }
                }
                const double* x = rows.data() + r * static_cast<std::size_t>(dim);
                const double z = forward_row(p, x, ws, use_dropout);
                batch_loss += softplus(z) - (labels[r] ? z : 0.0);
                const double dz =
                    (sigmoid(z) - static_cast<double>(labels[r])) / static_cast<double>(bn);
                backward_row(p, x, dz, ws, use_dropout, grad.data());
            }
            batch_loss /= static_cast<double>(bn);
            if (!std::isfinite(batch_loss)) {
                std::ostringstream os;
                os << "training diverged at epoch " << epoch << " (batch loss " << batch_loss
                   << "); lower max_lr or check feature scaling";
                throw std::runtime_error(os.str());
            }
            epoch_loss += batch_loss;

            const double lr = trace.lr_by_step[static_cast<std::size_t>(step)];
            ++step;
            const double bc1 = 1.0 - std::pow(kBeta1, step);
            const double bc2 = 1.0 - std::pow(kBeta2, step);
            for (std::size_t i = 0; i < p.w.size(); ++i) {
                double g = grad[i];
                if (cfg.weight_decay > 0.0) g += cfg.weight_decay * p.w[i];
                adam_m[i] = kBeta1 * adam_m[i] + (1.0 - kBeta1) * g;
                adam_v[i] = kBeta2 * adam_v[i] + (1.0 - kBeta2) * g * g;
                p.w[i] -= lr * (adam_m[i] / bc1) / (std::sqrt(adam_v[i] / bc2) + kEps);
            }
        }
        trace.train_loss.push_back(epoch_loss / static_cast<double>(batches_per_epoch));
        const double hloss = trace.holdout_empty ? clean_loss(train_rows) : clean_loss(hold_rows);
        if (!std::isfinite(hloss)) {
            throw std::runtime_error("hold-out loss became non-finite at epoch " +
                                     std::to_string(epoch));
        }
        trace.holdout_loss.push_back(hloss);
        if (hloss < best_loss) {
            best_loss = hloss;
            best = p;
            trace.best_epoch = epoch;
        }
    }
    out.params = std::move(best);
    return out;
}

} // namespace rec
