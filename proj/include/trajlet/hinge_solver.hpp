#pragma once

// Dual solver for weighted hinge-loss linear classifiers with an unregularized bias:
//
//   minimize  ||w||^2 + sum_i c_i * max(0, 1 - y_i (w^T x_i + b))
//
// The dual is solved with SMO (second-order working-set selection). The primal
// is recovered from the dual coefficients, and the bias is set to the exact
// minimizer of the primal for the current w (a one-dimensional piecewise-linear
// problem). The solver stops once the duality gap is below a relative tolerance
// and returns the best primal iterate it has seen.

#include "trajlet/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace trajlet::solver {

/// Kernel access used by the solver. `column(i, out)` writes K(i, k) for all k.
template <typename K>
concept KernelSource = requires(const K &k, Eigen::Index i, double *out) {
    { k.size() } -> std::convertible_to<Eigen::Index>;
    { k.diagonal(i) } -> std::convertible_to<double>;
    k.column(i, out);
};

/// Linear kernel over the rows of a matrix. The Gram matrix is precomputed
/// when it fits in `gram_limit` rows, otherwise columns are computed on demand.
class DenseKernel {
  public:
    explicit DenseKernel(Eigen::Ref<const RowMatrix> rows, Eigen::Index gram_limit = 4000)
        : rows_(rows) {
        if (rows_.rows() <= gram_limit) {
            gram_ = rows_ * rows_.transpose();
            has_gram_ = true;
        }
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return rows_.rows(); }

    [[nodiscard]] double diagonal(Eigen::Index i) const {
        return has_gram_ ? gram_(i, i) : rows_.row(i).squaredNorm();
    }

    void column(Eigen::Index i, double *out) const {
        Eigen::Map<Vector> dst(out, size());
        if (has_gram_) {
            dst = gram_.col(i);
        } else {
            dst.noalias() = rows_ * rows_.row(i).transpose();
        }
    }

  private:
    RowMatrix rows_;
    Matrix gram_;
    bool has_gram_ = false;
};

struct HingeOptions {
    long max_iterations = 200000;
    /// Stop when (primal - dual) <= tolerance * primal.
    double tolerance = 1e-6;
    /// SMO steps between duality-gap checks; 0 picks a size-dependent default.
    long check_interval = 0;
};

struct HingeSolution {
    /// Dual coefficients; w = sum_i beta_i y_i x_i.
    std::vector<double> beta;
    double bias = 0.0;
    double objective = 0.0;
    double dual_objective = 0.0;
    long iterations = 0;
    bool converged = false;
    /// Primal objective of each accepted iterate, in order.
    std::vector<double> trace;
};

namespace detail {

/// Exact argmin over b of sum_i c_i max(0, 1 - y_i (s_i + b)) for fixed scores s.
inline double optimal_bias(std::span<const double> scores, std::span<const double> y, std::span<const double> cost) {
    struct Breakpoint {
        double at;
        double weight;
    };
    std::vector<Breakpoint> points;
    points.reserve(scores.size());
    double slope = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (cost[i] <= 0.0) {
            continue;
        }
        if (y[i] > 0) {
            points.push_back({1.0 - scores[i], cost[i]});
            slope -= cost[i];
        } else {
            points.push_back({-1.0 - scores[i], cost[i]});
        }
    }
    if (points.empty()) {
        return 0.0;
    }
    std::sort(points.begin(), points.end(), [](const Breakpoint &a, const Breakpoint &b) { return a.at < b.at; });
    const double flat = 1e-12 * std::accumulate(points.begin(), points.end(), 0.0,
                                                 [](double acc, const Breakpoint &p) { return acc + p.weight; });
    if (slope >= -flat) {
        return points.front().at;
    }
    for (std::size_t k = 0; k < points.size(); ++k) {
        slope += points[k].weight;
        if (slope > flat) {
            return points[k].at;
        }
        if (slope >= -flat) {
            // flat bottom between this breakpoint and the next one
            return k + 1 < points.size() ? 0.5 * (points[k].at + points[k + 1].at) : points[k].at;
        }
    }
    return points.back().at;
}

inline double hinge_sum(std::span<const double> scores, double bias, std::span<const double> y,
                        std::span<const double> cost) {
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        sum += cost[i] * std::max(0.0, 1.0 - y[i] * (scores[i] + bias));
    }
    return sum;
}

}  // namespace detail

template <KernelSource Kernel>
HingeSolution solve_hinge(const Kernel &kernel, std::span<const double> y, std::span<const double> cost,
                          const HingeOptions &options = {}) {
    const auto n = static_cast<std::size_t>(kernel.size());
    if (y.size() != n || cost.size() != n) {
        throw dimension_error("hinge solver: labels and costs must match the kernel size");
    }
    if (n == 0) {
        throw invalid_argument("hinge solver: empty problem");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] != 1.0 && y[i] != -1.0) {
            throw invalid_argument("hinge solver: labels must be +1 or -1");
        }
        if (!(cost[i] >= 0.0) || !std::isfinite(cost[i])) {
            throw invalid_argument("hinge solver: costs must be finite and non-negative");
        }
    }

    constexpr double tau = 1e-12;
    std::vector<double> upper(n);
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) {
        upper[i] = 0.5 * cost[i];
        diag[i] = kernel.diagonal(static_cast<Eigen::Index>(i));
    }
    std::vector<double> beta(n, 0.0);
    std::vector<double> grad(n, -1.0);  // Q beta - 1
    std::vector<double> col_i(n);
    std::vector<double> col_j(n);
    std::vector<double> scores(n);

    const long interval = options.check_interval > 0
                              ? options.check_interval
                              : std::max<long>(20, static_cast<long>(n / 8));

    HingeSolution best;
    best.objective = std::numeric_limits<double>::infinity();

    // Evaluates the primal at the current beta (with its optimal bias) and the dual bound.
    auto check = [&]() {
        double quad = 0.0;  // beta^T Q beta = ||w||^2
        double linear = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = y[i] * (grad[i] + 1.0);
            quad += beta[i] * (grad[i] + 1.0);
            linear += beta[i];
        }
        quad = std::max(quad, 0.0);
        const double b = detail::optimal_bias(scores, y, cost);
        const double primal = quad + detail::hinge_sum(scores, b, y, cost);
        const double dual = 2.0 * linear - quad;
        if (primal < best.objective) {
            best.objective = primal;
            best.bias = b;
            best.beta = beta;
            best.trace.push_back(primal);
        }
        best.dual_objective = std::max(best.dual_objective, dual);
        return best.objective - best.dual_objective <= options.tolerance * std::abs(best.objective);
    };

    best.dual_objective = -std::numeric_limits<double>::infinity();
    bool converged = check();
    long iter = 0;
    while (!converged && iter < options.max_iterations) {
        // working set: i maximizes -y_i G_i over I_up, j by second-order gain over I_low
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t) {
            const bool up = y[t] > 0 ? beta[t] < upper[t] : beta[t] > 0.0;
            if (up && -y[t] * grad[t] >= gmax) {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if (i == n) {
            check();
            converged = true;
            break;
        }
        kernel.column(static_cast<Eigen::Index>(i), col_i.data());
        double gmax2 = -std::numeric_limits<double>::infinity();
        double best_gain = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const bool low = y[t] > 0 ? beta[t] > 0.0 : beta[t] < upper[t];
            if (!low) {
                continue;
            }
            const double v = y[t] * grad[t];
            gmax2 = std::max(gmax2, v);
            const double diff = gmax + v;
            if (diff > 0.0) {
                double quad = diag[i] + diag[t] - 2.0 * col_i[t];
                if (quad <= 0.0) {
                    quad = tau;
                }
                const double gain = -(diff * diff) / quad;
                if (gain <= best_gain) {
                    best_gain = gain;
                    j = t;
                }
            }
        }
        if (j == n || gmax + gmax2 < 1e-12) {
            // KKT conditions hold to rounding
            check();
            converged = true;
            break;
        }
        kernel.column(static_cast<Eigen::Index>(j), col_j.data());

        const double old_i = beta[i];
        const double old_j = beta[j];
        const double qij = y[i] * y[j] * col_i[j];
        if (y[i] != y[j]) {
            double quad = diag[i] + diag[j] + 2.0 * qij;
            if (quad <= 0.0) {
                quad = tau;
            }
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = beta[i] - beta[j];
            beta[i] += delta;
            beta[j] += delta;
            if (diff > 0.0) {
                if (beta[j] < 0.0) {
                    beta[j] = 0.0;
                    beta[i] = diff;
                }
            } else if (beta[i] < 0.0) {
                beta[i] = 0.0;
                beta[j] = -diff;
            }
            if (diff > upper[i] - upper[j]) {
                if (beta[i] > upper[i]) {
                    beta[i] = upper[i];
                    beta[j] = upper[i] - diff;
                }
            } else if (beta[j] > upper[j]) {
                beta[j] = upper[j];
                beta[i] = upper[j] + diff;
            }
        } else {
            double quad = diag[i] + diag[j] - 2.0 * qij;
            if (quad <= 0.0) {
                quad = tau;
            }
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = beta[i] + beta[j];
            beta[i] -= delta;
            beta[j] += delta;
            if (sum > upper[i]) {
                if (beta[i] > upper[i]) {
                    beta[i] = upper[i];
                    beta[j] = sum - upper[i];
                }
            } else if (beta[j] < 0.0) {
                beta[j] = 0.0;
                beta[i] = sum;
            }
            if (sum > upper[j]) {
                if (beta[j] > upper[j]) {
                    beta[j] = upper[j];
                    beta[i] = sum - upper[j];
                }
            } else if (beta[i] < 0.0) {
                beta[i] = 0.0;
                beta[j] = sum;
            }
        }
        const double di = (beta[i] - old_i) * y[i];
        const double dj = (beta[j] - old_j) * y[j];
        for (std::size_t t = 0; t < n; ++t) {
            grad[t] += y[t] * (col_i[t] * di + col_j[t] * dj);
        }
        ++iter;
        if (iter % interval == 0) {
            converged = check();
        }
    }
    if (!converged) {
        converged = check();
    }
    best.converged = converged;
    best.iterations = iter;
    return best;
}

/// w = sum_i beta_i y_i x_i over the rows of `rows`.
inline Vector primal_weight(const Eigen::Ref<const RowMatrix> &rows, std::span<const double> beta,
                            std::span<const double> y) {
    Vector w = Vector::Zero(rows.cols());
    for (std::size_t i = 0; i < beta.size(); ++i) {
        if (beta[i] != 0.0) {
            w.noalias() += (beta[i] * y[i]) * rows.row(static_cast<Eigen::Index>(i)).transpose();
        }
    }
    return w;
}

}  // namespace trajlet::solver
