#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rec {

struct LeastSquaresResult {
    std::vector<double> coef;        // length p; dropped columns get 0
    int rank = 0;
    std::vector<int> dropped;        // column indexes pivoted out as collinear
};

// Minimum-norm-ish basic solution of min ||A x - b|| via Householder QR with
// column pivoting. A is n x p, row-major. When columns are collinear the
// pivot exposes them; with allow_rank_deficient the dependent columns are
// dropped (coefficient 0), otherwise an error names them (using col_names
// when given).
LeastSquaresResult least_squares(const std::vector<double>& a, std::size_t n, std::size_t p,
                                 const std::vector<double>& b, bool allow_rank_deficient = false,
                                 const std::vector<std::string>* col_names = nullptr);

// Rows of a and b scaled by sqrt(w) first (w must be nonnegative).
LeastSquaresResult weighted_least_squares(const std::vector<double>& a, std::size_t n,
                                          std::size_t p, const std::vector<double>& b,
                                          const std::vector<double>& w,
                                          bool allow_rank_deficient = false);

} // namespace rec
