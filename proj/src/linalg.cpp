#include "recengine/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rec {

namespace {

// Column-major working storage for the factorization.
struct ColMat {
    std::size_t n, p;
    std::vector<double> d; // n * p
    double& at(std::size_t i, std::size_t j) { return d[j * n + i]; }
    double at(std::size_t i, std::size_t j) const { return d[j * n + i]; }
};

} // namespace

LeastSquaresResult least_squares(const std::vector<double>& a, std::size_t n, std::size_t p,
                                 const std::vector<double>& b, bool allow_rank_deficient,
                                 const std::vector<std::string>* col_names) {
    if (a.size() != n * p) throw std::runtime_error("least_squares: matrix shape mismatch");
    if (b.size() != n) throw std::runtime_error("least_squares: rhs length mismatch");
    if (n < p) throw std::runtime_error("least_squares: fewer rows than columns");

    ColMat m{n, p, std::vector<double>(n * p)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) m.at(i, j) = a[i * p + j];
    }
    std::vector<double> rhs = b;
    std::vector<std::size_t> perm(p);
    for (std::size_t j = 0; j < p; ++j) perm[j] = j;

    // Householder QR with column pivoting on remaining column norms.
    std::vector<double> col_norm2(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) col_norm2[j] += m.at(i, j) * m.at(i, j);
    }
    double max_initial = 0.0;
    for (double v : col_norm2) max_initial = std::max(max_initial, v);
    const double tol2 = std::max(max_initial, 1.0) * 1e-20; // squared-norm cutoff

    std::size_t rank = 0;
    for (std::size_t k = 0; k < p; ++k) {
        // Recompute remaining norms exactly; p is small in every caller.
        std::size_t best = k;
        double best_norm = -1.0;
        for (std::size_t j = k; j < p; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < n; ++i) s += m.at(i, j) * m.at(i, j);
            col_norm2[j] = s;
            if (s > best_norm) {
                best_norm = s;
                best = j;
            }
        }
        if (best_norm <= tol2) break; // remaining columns are numerically zero
        if (best != k) {
            for (std::size_t i = 0; i < n; ++i) std::swap(m.at(i, k), m.at(i, best));
            std::swap(col_norm2[k], col_norm2[best]);
            std::swap(perm[k], perm[best]);
        }
        double alpha = std::sqrt(best_norm);
        if (m.at(k, k) > 0) alpha = -alpha;
        std::vector<double> v(n - k);
        v[0] = m.at(k, k) - alpha;
        for (std::size_t i = k + 1; i < n; ++i) v[i - k] = m.at(i, k);
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        if (vnorm2 > 0.0) {
            for (std::size_t j = k; j < p; ++j) {
                double dot = 0.0;
                for (std::size_t i = k; i < n; ++i) dot += v[i - k] * m.at(i, j);
                const double f = 2.0 * dot / vnorm2;
                for (std::size_t i = k; i < n; ++i) m.at(i, j) -= f * v[i - k];
            }
            double dot = 0.0;
            for (std::size_t i = k; i < n; ++i) dot += v[i - k] * rhs[i];
            const double f = 2.0 * dot / vnorm2;
            for (std::size_t i = k; i < n; ++i) rhs[i] -= f * v[i - k];
        }
        m.at(k, k) = alpha;
        ++rank;
    }

    LeastSquaresResult res;
    res.rank = static_cast<int>(rank);
    for (std::size_t j = rank; j < p; ++j) res.dropped.push_back(static_cast<int>(perm[j]));
    std::sort(res.dropped.begin(), res.dropped.end());
    if (rank < p && !allow_rank_deficient) {
        std::ostringstream os;
        os << "design matrix is rank deficient (rank " << rank << " of " << p
           << "); collinear columns:";
        for (int j : res.dropped) {
            os << ' ';
            if (col_names && j < static_cast<int>(col_names->size())) {
                os << (*col_names)[static_cast<std::size_t>(j)];
            } else {
                os << '#' << j;
            }
        }
        throw std::runtime_error(os.str());
    }

    // Back substitution on the leading rank x rank triangle.
    std::vector<double> y(rank, 0.0);
    for (std::size_t k = rank; k-- > 0;) {
        double s = rhs[k];
        for (std::size_t j = k + 1; j < rank; ++j) s -= m.at(k, j) * y[j];
        y[k] = s / m.at(k, k);
    }
    res.coef.assign(p, 0.0);
    for (std::size_t k = 0; k < rank; ++k) res.coef[perm[k]] = y[k];
    return res;
}

LeastSquaresResult weighted_least_squares(const std::vector<double>& a, std::size_t n,
                                          std::size_t p, const std::vector<double>& b,
                                          const std::vector<double>& w,
                                          bool allow_rank_deficient) {
    if (w.size() != n) throw std::runtime_error("weighted_least_squares: weight length mismatch");
    std::vector<double> aw(a.size());
    std::vector<double> bw(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] < 0.0) throw std::runtime_error("weighted_least_squares: negative weight");
        const double s = std::sqrt(w[i]);
        for (std::size_t j = 0; j < p; ++j) aw[i * p + j] = a[i * p + j] * s;
        bw[i] = b[i] * s;
    }
    return least_squares(aw, n, p, bw, allow_rank_deficient);
}

} // namespace rec
