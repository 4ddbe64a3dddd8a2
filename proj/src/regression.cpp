#include "pathhjb/regression.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pathhjb/error.hpp"
#include "pathhjb/sde.hpp"

namespace pathhjb {

namespace {

// Exponent vectors of all monomials of total degree 1..degree in `vars` variables.
void monomials(std::size_t vars, unsigned degree, std::vector<std::vector<unsigned>>& out) {
    std::vector<unsigned> cur(vars, 0);
    // Enumerate by total degree so the column order is stable.
    for (unsigned total = 1; total <= degree; ++total) {
        std::function<void(std::size_t, unsigned)> rec = [&](std::size_t var, unsigned left) {
            if (var + 1 == vars) {
                cur[var] = left;
                out.push_back(cur);
                cur[var] = 0;
                return;
            }
            for (unsigned e = left + 1; e-- > 0;) {
                cur[var] = e;
                rec(var + 1, left - e);
            }
            cur[var] = 0;
        };
        if (vars > 0) {
            rec(0, total);
        }
    }
}

double shifted_mean(const double* x, std::size_t n, std::size_t stride) {
    const double shift = x[0];
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i * stride] - shift;
    }
    return shift + acc / static_cast<double>(n);
}

}  // namespace

void RegressionBasis::validate() const {
    require(!features.empty(), "regression basis needs at least one feature");
    require(degree <= 3, "regression degree must be at most 3");
    require(degree >= 1 || cells > 0, "regression degree 0 needs cells > 0");
    require(ridge >= 0.0, "ridge weight must be non-negative");
}

std::size_t RegressionBasis::raw_size(std::size_t dim) const {
    std::size_t n = 0;
    for (Feature f : features) {
        n += f == Feature::time ? 1 : dim;
    }
    return n;
}

void RegressionBasis::raw_features(PathView p, std::span<double> out) const {
    std::size_t j = 0;
    const std::size_t d = p.dim();
    for (Feature f : features) {
        for (std::size_t c = 0; c < (f == Feature::time ? 1 : d); ++c) {
            double v = 0.0;
            switch (f) {
                case Feature::state:
                    v = p.endpoint(c);
                    break;
                case Feature::running_integral:
                    for (std::size_t i = 0; i + 1 < p.node_count(); ++i) {
                        v += p(i, c);
                    }
                    v *= p.step();
                    break;
                case Feature::running_max:
                    v = p(0, c);
                    for (std::size_t i = 1; i < p.node_count(); ++i) {
                        v = std::max(v, p(i, c));
                    }
                    break;
                case Feature::running_min:
                    v = p(0, c);
                    for (std::size_t i = 1; i < p.node_count(); ++i) {
                        v = std::min(v, p(i, c));
                    }
                    break;
                case Feature::time:
                    v = p.final_time();
                    break;
            }
            out[j++] = v;
        }
    }
}

std::string RegressionBasis::describe() const {
    std::ostringstream s;
    if (cells > 0) {
        s << "cells" << cells << ":";
    }
    s << "poly" << degree << "(";
    for (std::size_t i = 0; i < features.size(); ++i) {
        s << (i ? "," : "") << to_string(features[i]);
    }
    s << ")";
    return s.str();
}

Feature feature_from_string(const std::string& name) {
    if (name == "state") return Feature::state;
    if (name == "running_integral") return Feature::running_integral;
    if (name == "running_max") return Feature::running_max;
    if (name == "running_min") return Feature::running_min;
    if (name == "time") return Feature::time;
    throw InvalidArgument("unknown regression feature: " + name);
}

std::string to_string(Feature f) {
    switch (f) {
        case Feature::state: return "state";
        case Feature::running_integral: return "running_integral";
        case Feature::running_max: return "running_max";
        case Feature::running_min: return "running_min";
        case Feature::time: return "time";
    }
    return "?";
}

FeatureTable::FeatureTable(const TrajectoryBatch& batch, const RegressionBasis& basis)
    : width_(basis.raw_size(batch.dim)), paths_(batch.paths), start_(batch.start_node) {
    basis.validate();
    const std::size_t d = batch.dim;
    const std::size_t span_nodes = batch.end_node - batch.start_node + 1;
    data_.assign(span_nodes * paths_ * width_, 0.0);
    std::vector<double> integral(d);
    std::vector<double> hi(d);
    std::vector<double> lo(d);
    for (std::size_t m = 0; m < paths_; ++m) {
        const PathView x = batch.path(m);
        std::fill(integral.begin(), integral.end(), 0.0);
        for (std::size_t c = 0; c < d; ++c) {
            hi[c] = lo[c] = x(0, c);
        }
        for (std::size_t k = 0; k <= batch.end_node; ++k) {
            if (k > 0) {
                for (std::size_t c = 0; c < d; ++c) {
                    integral[c] += x(k - 1, c);
                    hi[c] = std::max(hi[c], x(k, c));
                    lo[c] = std::min(lo[c], x(k, c));
                }
            }
            if (k < start_) {
                continue;
            }
            double* row = data_.data() + ((k - start_) * paths_ + m) * width_;
            std::size_t j = 0;
            for (Feature f : basis.features) {
                for (std::size_t c = 0; c < (f == Feature::time ? 1 : d); ++c) {
                    switch (f) {
                        case Feature::state: row[j] = x(k, c); break;
                        case Feature::running_integral: row[j] = integral[c] * batch.step; break;
                        case Feature::running_max: row[j] = hi[c]; break;
                        case Feature::running_min: row[j] = lo[c]; break;
                        case Feature::time: row[j] = batch.step * static_cast<double>(k); break;
                    }
                    ++j;
                }
            }
        }
    }
}

LinearFit LinearFit::fit(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& targets,
                         const RegressionBasis& basis, const std::string& context) {
    const Eigen::Index n = raw.rows();
    require(n > 0 && targets.rows() == n, "regression: sample counts disagree");
    LinearFit out;
    if (basis.cells > 0) {
        out.fit_cells(raw, targets, basis, context);
        return out;
    }
    out.intercept_.resize(targets.cols());
    for (Eigen::Index r = 0; r < targets.cols(); ++r) {
        out.intercept_(r) = shifted_mean(targets.data() + r * n, static_cast<std::size_t>(n), 1);
    }

    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const double mean = shifted_mean(raw.data() + j * n, static_cast<std::size_t>(n), 1);
        const double sd = std::sqrt((raw.col(j).array() - mean).square().mean());
        if (sd > 1e-12 * (1.0 + std::abs(mean))) {
            out.active_.push_back(j);
            out.feat_mean_.push_back(mean);
            out.feat_scale_.push_back(sd);
        }
    }
    if (out.active_.empty() || n < 2) {
        out.coef_.resize(0, targets.cols());
        return out;
    }
    monomials(out.active_.size(), basis.degree, out.exponents_);

    const auto p = static_cast<Eigen::Index>(out.exponents_.size());
    Eigen::MatrixXd design(n, p);
    out.col_mean_ = Eigen::VectorXd::Zero(p);
    out.col_scale_ = Eigen::VectorXd::Ones(p);
    Eigen::VectorXd row(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> r(static_cast<std::size_t>(raw.cols()));
        for (Eigen::Index j = 0; j < raw.cols(); ++j) {
            r[static_cast<std::size_t>(j)] = raw(i, j);
        }
        out.design_row(r, row);
        design.row(i) = row.transpose();
    }
    // Center and scale columns; drop the ones that are constant on the sample.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < p; ++c) {
        const double mean = design.col(c).mean();
        const double sd = std::sqrt((design.col(c).array() - mean).square().mean());
        out.col_mean_(c) = mean;
        out.col_scale_(c) = sd;
        if (sd > 1e-10) {
            keep.push_back(c);
        }
    }
    std::vector<std::vector<unsigned>> kept_exp;
    Eigen::MatrixXd centered(n, static_cast<Eigen::Index>(keep.size()));
    Eigen::VectorXd kept_mean(static_cast<Eigen::Index>(keep.size()));
    Eigen::VectorXd kept_scale(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const Eigen::Index c = keep[k];
        const auto kk = static_cast<Eigen::Index>(k);
        centered.col(kk) = (design.col(c).array() - out.col_mean_(c)) / out.col_scale_(c);
        kept_mean(kk) = out.col_mean_(c);
        kept_scale(kk) = out.col_scale_(c);
        kept_exp.push_back(out.exponents_[static_cast<std::size_t>(c)]);
    }
    out.exponents_ = std::move(kept_exp);
    out.col_mean_ = kept_mean;
    out.col_scale_ = kept_scale;
    const auto q = static_cast<Eigen::Index>(keep.size());
    if (q == 0) {
        out.coef_.resize(0, targets.cols());
        return out;
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q, q);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), inv_n);
    gram = gram.selfadjointView<Eigen::Lower>();
    gram.diagonal().array() += basis.ridge;
    Eigen::MatrixXd centered_targets = targets.rowwise() - out.intercept_.transpose();
    const Eigen::MatrixXd rhs = centered.transpose() * centered_targets * inv_n;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    out.condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(out.condition_ <= basis.max_condition)) {
        std::ostringstream msg;
        msg << "singular regression at " << context << " (condition number " << out.condition_ << ")";
        throw NumericalError(msg.str());
    }
    out.coef_ = gram.ldlt().solve(rhs);
    return out;
}

void LinearFit::design_row(std::span<const double> raw, Eigen::VectorXd& row) const {
    std::vector<double> z(active_.size());
    for (std::size_t a = 0; a < active_.size(); ++a) {
        z[a] = (raw[static_cast<std::size_t>(active_[a])] - feat_mean_[a]) / feat_scale_[a];
    }
    row.resize(static_cast<Eigen::Index>(exponents_.size()));
    for (std::size_t c = 0; c < exponents_.size(); ++c) {
        double v = 1.0;
        for (std::size_t a = 0; a < z.size(); ++a) {
            for (unsigned e = 0; e < exponents_[c][a]; ++e) {
                v *= z[a];
            }
        }
        row(static_cast<Eigen::Index>(c)) = v;
    }
}

void LinearFit::fit_cells(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& targets, const RegressionBasis& basis,
                          const std::string& context) {
    const Eigen::Index n = raw.rows();
    require(raw.cols() > 0, "regression: cells need at least one raw feature");
    std::vector<double> key(raw.col(0).data(), raw.col(0).data() + n);
    std::sort(key.begin(), key.end());
    const std::size_t cells = std::min<std::size_t>(basis.cells, static_cast<std::size_t>(n));
    for (std::size_t c = 1; c < cells; ++c) {
        const double edge = key[c * static_cast<std::size_t>(n) / cells];
        if (edge > key.front() && (edges_.empty() || edge > edges_.back())) {
            edges_.push_back(edge);
        }
    }
    RegressionBasis local = basis;
    local.cells = 0;
    std::vector<std::vector<Eigen::Index>> members(edges_.size() + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        members[cell_of(raw(i, 0))].push_back(i);
    }
    for (std::size_t c = 0; c < members.size(); ++c) {
        const auto& rows = members[c];
        const auto m = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd r(m, raw.cols());
        Eigen::MatrixXd t(m, targets.cols());
        for (Eigen::Index i = 0; i < m; ++i) {
            r.row(i) = raw.row(rows[static_cast<std::size_t>(i)]);
            t.row(i) = targets.row(rows[static_cast<std::size_t>(i)]);
        }
        local_.push_back(fit(r, t, local, context + ", cell " + std::to_string(c)));
        condition_ = std::max(condition_, local_.back().condition_);
    }
}

std::size_t LinearFit::cell_of(double key) const {
    return static_cast<std::size_t>(std::upper_bound(edges_.begin(), edges_.end(), key) - edges_.begin());
}

Eigen::VectorXd LinearFit::predict(std::span<const double> raw) const {
    if (!local_.empty()) {
        return local_[cell_of(raw[0])].predict(raw);
    }
    if (coef_.rows() == 0) {
        return intercept_;
    }
    Eigen::VectorXd row;
    design_row(raw, row);
    row = ((row - col_mean_).array() / col_scale_.array()).matrix();
    return intercept_ + coef_.transpose() * row;
}

double LinearFit::predict_one(std::span<const double> raw, Eigen::Index output) const {
    return predict(raw)(output);
}

}  // namespace pathhjb
