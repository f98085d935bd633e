#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "levy_bsde/error.hpp"

namespace levy_bsde {

struct BasisConfig {
    unsigned degree = 2;
    double ridge = 1e-10;
};

/// Polynomial basis of total degree <= q in standardized state components.
/// Components with zero sample variance are dropped (their monomials are
/// collinear with the intercept). The intercept is always the first column.
class PolynomialBasis {
public:
    PolynomialBasis() = default;

    PolynomialBasis(std::span<const double> states, std::size_t dim, unsigned degree) : dim_(dim) {
        if (dim == 0 || states.size() % dim != 0) throw ValidationError("basis: states must be paths x dim");
        const std::size_t paths = states.size() / dim;
        for (std::size_t c = 0; c < dim; ++c) {
            double mean = 0.0;
            for (std::size_t m = 0; m < paths; ++m) mean += states[m * dim + c];
            mean /= static_cast<double>(paths);
            double var = 0.0;
            for (std::size_t m = 0; m < paths; ++m) {
                const double dx = states[m * dim + c] - mean;
                var += dx * dx;
            }
            var /= static_cast<double>(paths);
            const double scale = std::sqrt(var);
            if (scale > 1e-12 * (1.0 + std::abs(mean))) {
                active_.push_back(c);
                mean_.push_back(mean);
                inv_scale_.push_back(1.0 / scale);
            }
        }
        build_exponents(degree);
    }

    std::size_t size() const noexcept { return exponents_.size(); }
    std::size_t active_components() const noexcept { return active_.size(); }

    void evaluate(std::span<const double> x, std::span<double> out) const {
        std::vector<double> z(active_.size());
        for (std::size_t a = 0; a < active_.size(); ++a) z[a] = (x[active_[a]] - mean_[a]) * inv_scale_[a];
        for (std::size_t b = 0; b < exponents_.size(); ++b) {
            double v = 1.0;
            for (std::size_t a = 0; a < active_.size(); ++a) {
                for (unsigned e = 0; e < exponents_[b][a]; ++e) v *= z[a];
            }
            out[b] = v;
        }
    }

private:
    void build_exponents(unsigned degree) {
        std::vector<unsigned> current(active_.size(), 0);
        // graded order: all monomials of total degree 0, then 1, ...
        for (unsigned total = 0; total <= degree; ++total) enumerate(0, total, current);
        if (active_.empty()) exponents_.assign(1, {});
    }

    void enumerate(std::size_t pos, unsigned remaining, std::vector<unsigned>& current) {
        if (pos == current.size()) {
            if (remaining == 0) exponents_.push_back(current);
            return;
        }
        for (unsigned e = remaining + 1; e-- > 0;) {
            current[pos] = e;
            enumerate(pos + 1, remaining - e, current);
        }
        current[pos] = 0;
    }

    std::size_t dim_ = 0;
    std::vector<std::size_t> active_;
    std::vector<double> mean_;
    std::vector<double> inv_scale_;
    std::vector<std::vector<unsigned>> exponents_;
};

struct RegressionFit {
    std::vector<double> coefficients;
    std::vector<double> fitted;
    double residual_std = 0.0;
};

/// Least-squares projection onto a polynomial basis of the states, with ridge
/// penalty ridge * paths * |beta|^2 on every coefficient except the intercept.
/// The design is factorized once; fit() can be called for many right-hand sides.
class Regression {
public:
    Regression(std::span<const double> states, std::size_t dim, const BasisConfig& cfg)
        : basis_(states, dim, cfg.degree), paths_(states.size() / dim) {
        if (paths_ == 0) throw ValidationError("regression: need at least one path");
        if (!(cfg.ridge >= 0.0)) throw ValidationError("regression: ridge must be >= 0");
        const auto cols = static_cast<Eigen::Index>(basis_.size());
        const auto rows = static_cast<Eigen::Index>(paths_);
        const bool ridge = cfg.ridge > 0.0 && cols > 1;
        design_.resize(rows, cols);
        std::vector<double> row(basis_.size());
        for (std::size_t m = 0; m < paths_; ++m) {
            basis_.evaluate(states.subspan(m * dim, dim), row);
            for (Eigen::Index b = 0; b < cols; ++b) design_(static_cast<Eigen::Index>(m), b) = row[static_cast<std::size_t>(b)];
        }
        Eigen::MatrixXd augmented = design_;
        if (ridge) {
            augmented.conservativeResize(rows + cols - 1, cols);
            augmented.bottomRows(cols - 1).setZero();
            const double w = std::sqrt(cfg.ridge * static_cast<double>(paths_));
            for (Eigen::Index b = 1; b < cols; ++b) augmented(rows + b - 1, b) = w;
        }
        qr_.compute(augmented);
        augmented_rows_ = augmented.rows();
        const auto& r = qr_.matrixR();
        const double first = std::abs(r(0, 0));
        const double last = std::abs(r(cols - 1, cols - 1));
        condition_ = last > 0.0 ? first / last : std::numeric_limits<double>::infinity();
        if (qr_.rank() < cols) {
            throw RegressionError("regression: rank-deficient design (rank " + std::to_string(qr_.rank()) + " of " +
                                      std::to_string(cols) + ") beyond ridge repair",
                                  condition_);
        }
    }

    std::size_t basis_size() const noexcept { return basis_.size(); }
    std::size_t paths() const noexcept { return paths_; }
    /// Ratio of the largest to smallest |R_ii| of the pivoted QR.
    double condition() const noexcept { return condition_; }

    RegressionFit fit(std::span<const double> values) const {
        if (values.size() != paths_) throw ValidationError("regression: values must have one entry per path");
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(augmented_rows_);
        for (std::size_t m = 0; m < paths_; ++m) rhs(static_cast<Eigen::Index>(m)) = values[m];
        const Eigen::VectorXd beta = qr_.solve(rhs);
        const Eigen::VectorXd fitted = design_ * beta;
        RegressionFit out;
        out.coefficients.assign(beta.data(), beta.data() + beta.size());
        out.fitted.assign(fitted.data(), fitted.data() + fitted.size());
        double ss = 0.0;
        for (std::size_t m = 0; m < paths_; ++m) {
            const double e = values[m] - out.fitted[m];
            ss += e * e;
        }
        const std::size_t dof = paths_ > basis_.size() ? paths_ - basis_.size() : 0;
        out.residual_std = dof > 0 ? std::sqrt(ss / static_cast<double>(dof)) : 0.0;
        return out;
    }

private:
    PolynomialBasis basis_;
    std::size_t paths_;
    Eigen::MatrixXd design_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
    Eigen::Index augmented_rows_ = 0;
    double condition_ = 1.0;
};

/// One-shot regression of per-path values on per-path states (paths x dim).
inline RegressionFit regress(std::span<const double> values, std::span<const double> states, std::size_t dim,
                             const BasisConfig& cfg = {}) {
    return Regression(states, dim, cfg).fit(values);
}

}  // namespace levy_bsde
