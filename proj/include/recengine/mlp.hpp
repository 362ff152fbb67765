#pragma once

#include <cstdint>
#include <vector>

namespace rec {

struct MlpConfig {
    int hidden_units = 100;
    double dropout = 0.1;
    double weight_decay = 0.0;
    double max_lr = 0.012;
    int epochs = 1000;
    int batch_size = 0; // 0 = full batch
    double holdout_fraction = 0.01;
    std::uint64_t seed = 1;
};

// Two hidden ReLU layers and a sigmoid output unit. Weights live in one flat
// array: [W1 in*h | b1 h | W2 h*h | b2 h | W3 h | b3 1].
struct MlpParams {
    int in_dim = 0;
    int hidden = 0;
    std::vector<double> w;

    std::size_t n_weights() const {
        const std::size_t d = static_cast<std::size_t>(in_dim);
        const std::size_t h = static_cast<std::size_t>(hidden);
        return d * h + h + h * h + h + h + 1;
    }
    std::size_t w1() const { return 0; }
    std::size_t b1() const { return static_cast<std::size_t>(in_dim) * hidden; }
    std::size_t w2() const { return b1() + static_cast<std::size_t>(hidden); }
    std::size_t b2() const { return w2() + static_cast<std::size_t>(hidden) * hidden; }
    std::size_t w3() const { return b2() + static_cast<std::size_t>(hidden); }
    std::size_t b3() const { return w3() + static_cast<std::size_t>(hidden); }
};

// Learning-rate value for each optimizer step: linear ramp from max_lr/25 up
// to max_lr over the first 30% of steps, then cosine anneal to max_lr/100.
// The peak value appears exactly once.
std::vector<double> one_cycle_schedule(double max_lr, int total_steps);

double mlp_logit(const MlpParams& p, const double* x);
// Sigmoid of the logit, clamped away from exact 0 and 1.
double mlp_forward(const MlpParams& p, const double* x);

// Mean binary cross-entropy over rows (no dropout, no weight decay), with
// the full analytic gradient when grad is non-null. Exposed for optimizer
// verification against finite differences.
double mlp_loss_and_grad(const MlpParams& p, const double* rows, std::size_t n,
                         const int* labels, std::vector<double>* grad);

struct TrainingTrace {
    std::vector<double> train_loss;   // mean of batch losses, per epoch
    std::vector<double> holdout_loss; // clean forward after each epoch
    std::vector<double> lr_by_step;
    int best_epoch = -1;
    bool holdout_empty = false;
    std::size_t n_train_rows = 0;
    std::size_t n_holdout_rows = 0;
};

struct MlpTrainResult {
    MlpParams params; // weights from the epoch with the lowest hold-out loss
    TrainingTrace trace;
};

// Trains on a dense row-major matrix. `groups` assigns each row to an
// initiation; a random holdout_fraction of the groups (not rows) is held out
// so paired positives and negatives stay on the same side of the split.
// Deterministic: the same matrix, labels, groups, and config reproduce the
// same weights bit for bit.
MlpTrainResult train_mlp_matrix(const std::vector<double>& rows, std::size_t n, int dim,
                                const std::vector<int>& labels, const std::vector<int>& groups,
                                const MlpConfig& cfg);

} // namespace rec
