#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathhjb/path.hpp"

namespace pathhjb {

struct TrajectoryBatch;

// Path features available to the conditional-expectation estimator. The
// problem is non-Markovian, so running functionals of the path are offered
// besides the current state.
enum class Feature { state, running_integral, running_max, running_min, time };

struct RegressionBasis {
    std::vector<Feature> features{Feature::state, Feature::running_integral};
    // Polynomial degree; 0 (cell means) is allowed only with cells > 0.
    unsigned degree = 2;
    // cells > 0: local fits on equal-count cells of the first raw feature.
    // Cell means (degree 0) give a monotone conditional-expectation estimator.
    unsigned cells = 0;
    double ridge = 1e-8;
    // Regressions whose regularized Gram matrix is worse conditioned fail.
    double max_condition = 1e12;

    void validate() const;
    // Raw feature count for a path of dimension `dim`.
    std::size_t raw_size(std::size_t dim) const;
    // Raw features of `p` at its final node.
    void raw_features(PathView p, std::span<double> out) const;
    std::string describe() const;
};

Feature feature_from_string(const std::string& name);
std::string to_string(Feature f);

// Raw features of every trajectory of a batch at every node from start to end,
// accumulated in one pass per trajectory.
class FeatureTable {
public:
    FeatureTable(const TrajectoryBatch& batch, const RegressionBasis& basis);

    std::size_t width() const { return width_; }
    std::span<const double> at(std::size_t path, std::size_t node) const {
        return {data_.data() + ((node - start_) * paths_ + path) * width_, width_};
    }

private:
    std::size_t width_ = 0;
    std::size_t paths_ = 0;
    std::size_t start_ = 0;
    std::vector<double> data_;
};

// Ridge least-squares fit of several targets on a polynomial of standardized
// features. Near-constant features and monomials are dropped; the intercept
// is the sample mean, so constant targets are reproduced exactly.
class LinearFit {
public:
    // `raw`: samples x raw features; `targets`: samples x outputs.
    static LinearFit fit(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& targets,
                         const RegressionBasis& basis, const std::string& context);

    Eigen::VectorXd predict(std::span<const double> raw) const;
    double predict_one(std::span<const double> raw, Eigen::Index output) const;
    double condition_number() const { return condition_; }
    std::size_t columns() const { return exponents_.size(); }
    std::size_t cell_count() const { return local_.empty() ? 1 : local_.size(); }

private:
    void design_row(std::span<const double> raw, Eigen::VectorXd& row) const;
    void fit_cells(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& targets, const RegressionBasis& basis,
                   const std::string& context);
    std::size_t cell_of(double key) const;

    std::vector<Eigen::Index> active_;
    std::vector<double> feat_mean_;
    std::vector<double> feat_scale_;
    std::vector<std::vector<unsigned>> exponents_;
    Eigen::VectorXd col_mean_;
    Eigen::VectorXd col_scale_;
    Eigen::VectorXd intercept_;
    Eigen::MatrixXd coef_;
    double condition_ = 1.0;
    std::vector<double> edges_;  // interior cell boundaries on the first raw feature
    std::vector<LinearFit> local_;
};

}  // namespace pathhjb
