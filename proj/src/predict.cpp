#include "glucolens/predict.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "glucolens/csv.hpp"
#include "glucolens/rng.hpp"

namespace glucolens::predict {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

CgmSeries extract_cgm(const SlotGrid& grid) {
    const Channel& bg = grid.channel(kChGlucose);
    CgmSeries s;
    s.t0 = grid.t0();
    std::int64_t span = grid.t_end() - grid.t0();
    std::size_t n_bins =
        static_cast<std::size_t>((span + kCgmIntervalSeconds - 1) / kCgmIntervalSeconds);
    s.v.assign(n_bins, 0.0);
    s.mask.assign(n_bins, 0);
    for (std::size_t slot = 0; slot < grid.n_slots(); ++slot) {
        if (!bg.mask[slot]) continue;
        auto bin = static_cast<std::size_t>((grid.slot_time(slot) - grid.t0()) /
                                            kCgmIntervalSeconds);
        s.v[bin] = bg.values[slot];  // ascending slots: latest wins
        s.mask[bin] = 1;
    }
    return s;
}

DesignMatrix make_lagged(const CgmSeries& cgm, int m_lags, int horizon_min) {
    if (m_lags < 1) throw std::invalid_argument("need at least one lag");
    if (horizon_min <= 0 || horizon_min % 5 != 0)
        throw std::invalid_argument("horizon must be a positive multiple of 5 minutes");
    const int h = horizon_min / 5;
    const auto n = static_cast<std::int64_t>(cgm.size());
    if (n < m_lags + h)
        throw std::invalid_argument("series shorter than lag window plus horizon");

    std::vector<std::size_t> bins;
    for (std::int64_t t = m_lags - 1; t + h < n; ++t) {
        if (!cgm.mask[static_cast<std::size_t>(t + h)]) continue;  // target unobserved
        bins.push_back(static_cast<std::size_t>(t));
    }
    DesignMatrix D;
    D.horizon_min = horizon_min;
    D.row_bins = bins;
    const auto rows = static_cast<Index>(bins.size());
    D.X = MatrixXd::Zero(rows, m_lags);
    D.M = MatrixXd::Zero(rows, m_lags);
    D.y = VectorXd::Zero(rows);
    for (Index r = 0; r < rows; ++r) {
        std::size_t t = bins[static_cast<std::size_t>(r)];
        for (int j = 0; j < m_lags; ++j) {
            std::size_t src = t - static_cast<std::size_t>(j);
            if (cgm.mask[src]) {
                D.X(r, j) = cgm.v[src];
                D.M(r, j) = 1.0;
            }
        }
        D.y(r) = cgm.v[t + static_cast<std::size_t>(h)];
    }
    return D;
}

void lagged_block(const CgmSeries& series, std::span<const std::size_t> row_bins,
                  int m_lags, Eigen::MatrixXd& values, Eigen::MatrixXd& mask) {
    const auto rows = static_cast<Index>(row_bins.size());
    values = MatrixXd::Zero(rows, m_lags);
    mask = MatrixXd::Zero(rows, m_lags);
    for (Index r = 0; r < rows; ++r) {
        std::size_t t = row_bins[static_cast<std::size_t>(r)];
        for (int j = 0; j < m_lags; ++j) {
            if (t < static_cast<std::size_t>(j)) continue;
            std::size_t src = t - static_cast<std::size_t>(j);
            if (src >= series.size()) continue;
            if (series.mask[src]) {
                values(r, j) = series.v[src];
                mask(r, j) = 1.0;
            }
        }
    }
}

std::vector<Eigen::Index> complete_rows(const DesignMatrix& D) {
    std::vector<Index> out;
    for (Index r = 0; r < D.M.rows(); ++r)
        if (D.M.row(r).minCoeff() > 0.5) out.push_back(r);
    return out;
}

Standardizer fit_standardizer(const DesignMatrix& D, std::span<const Eigen::Index> rows) {
    if (rows.empty()) throw std::invalid_argument("empty training fold");
    const Index m = D.X.cols();
    Standardizer s;
    s.mean = VectorXd::Zero(m);
    s.std = VectorXd::Ones(m);
    for (Index j = 0; j < m; ++j) {
        double sum = 0.0;
        std::size_t n = 0;
        for (Index r : rows) {
            if (D.M(r, j) < 0.5) continue;
            sum += D.X(r, j);
            ++n;
        }
        if (n == 0) {
            s.warnings.push_back("feature lag" + std::to_string(j) +
                                 " has no observations in the training fold; dropped");
            continue;
        }
        double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (Index r : rows) {
            if (D.M(r, j) < 0.5) continue;
            double d = D.X(r, j) - mean;
            ss += d * d;
        }
        double var = ss / static_cast<double>(n);
        if (var <= 0.0) {
            s.warnings.push_back("feature lag" + std::to_string(j) +
                                 " has zero variance in the training fold; dropped");
            continue;
        }
        s.mean(j) = mean;
        s.std(j) = std::sqrt(var);
        s.kept.push_back(j);
    }
    if (s.kept.empty()) throw std::invalid_argument("no usable features after standardization");
    double ysum = 0.0;
    for (Index r : rows) ysum += D.y(r);
    s.y_mean = ysum / static_cast<double>(rows.size());
    double yss = 0.0;
    for (Index r : rows) {
        double d = D.y(r) - s.y_mean;
        yss += d * d;
    }
    double yvar = yss / static_cast<double>(rows.size());
    s.y_std = yvar > 0.0 ? std::sqrt(yvar) : 1.0;
    return s;
}

void Standardizer::apply(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M,
                         std::span<const Eigen::Index> rows, Eigen::MatrixXd& Xs,
                         Eigen::MatrixXd& Ms) const {
    const auto nr = static_cast<Index>(rows.size());
    const auto nk = static_cast<Index>(kept.size());
    Xs = MatrixXd::Zero(nr, nk);
    Ms = MatrixXd::Zero(nr, nk);
    for (Index i = 0; i < nr; ++i) {
        Index r = rows[static_cast<std::size_t>(i)];
        for (Index jk = 0; jk < nk; ++jk) {
            Index j = kept[static_cast<std::size_t>(jk)];
            if (M(r, j) < 0.5) continue;
            Xs(i, jk) = (X(r, j) - mean(j)) / std(j);
            Ms(i, jk) = 1.0;
        }
    }
}

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::static_last: return "static";
        case ModelKind::ols: return "ols";
        case ModelKind::lasso: return "lasso";
        case ModelKind::ridge: return "ridge";
        case ModelKind::elastic_net: return "elastic_net";
        case ModelKind::total_variation: return "tv";
        case ModelKind::kernel_masked: return "kernel";
        case ModelKind::kernel_exog: return "kernel_exog";
    }
    return "?";
}

std::optional<ModelKind> parse_model(std::string_view name) {
    for (ModelKind k : {ModelKind::static_last, ModelKind::ols, ModelKind::lasso,
                        ModelKind::ridge, ModelKind::elastic_net,
                        ModelKind::total_variation, ModelKind::kernel_masked,
                        ModelKind::kernel_exog}) {
        if (name == to_string(k)) return k;
    }
    return std::nullopt;
}

double ols_objective(const MatrixXd& X, const VectorXd& y, const VectorXd& w) {
    return (X * w - y).squaredNorm();
}

double lasso_objective(const MatrixXd& X, const VectorXd& y, const VectorXd& w,
                       double lambda) {
    return ols_objective(X, y, w) + lambda * w.lpNorm<1>();
}

double enet_objective(const MatrixXd& X, const VectorXd& y, const VectorXd& w, double alpha,
                      double lambda) {
    return ols_objective(X, y, w) + alpha * (w.squaredNorm() + lambda * w.lpNorm<1>());
}

double tv_objective(const MatrixXd& X, const VectorXd& y, const VectorXd& w, double lambda) {
    double tv = 0.0;
    for (Index j = 0; j + 1 < w.size(); ++j) tv += std::abs(w(j + 1) - w(j));
    return ols_objective(X, y, w) + lambda * tv;
}

FitResult fit_ols(const MatrixXd& X, const VectorXd& y) {
    if (X.rows() == 0) throw std::invalid_argument("no training rows");
    MatrixXd G = X.transpose() * X;
    FitResult res;
    res.kind = ModelKind::ols;
    Eigen::FullPivLU<MatrixXd> lu(G);
    if (lu.rank() < G.cols()) {
        // singular normal matrix: fall back to a whisper of ridge
        res.singular_fallback = true;
        MatrixXd Greg = G + 1e-8 * MatrixXd::Identity(G.rows(), G.cols());
        res.w = Greg.ldlt().solve(X.transpose() * y);
    } else {
        res.w = lu.solve(X.transpose() * y);
    }
    res.objective = ols_objective(X, y, res.w);
    res.iterations = 1;
    return res;
}

FitResult fit_ridge(const MatrixXd& X, const VectorXd& y, double lambda) {
    if (X.rows() == 0) throw std::invalid_argument("no training rows");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    MatrixXd G = X.transpose() * X + lambda * MatrixXd::Identity(X.cols(), X.cols());
    FitResult res;
    res.kind = ModelKind::ridge;
    res.lambda = lambda;
    res.w = G.ldlt().solve(X.transpose() * y);
    res.objective = ols_objective(X, y, res.w) + lambda * res.w.squaredNorm();
    res.iterations = 1;
    return res;
}

namespace {

double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

// Cyclic coordinate descent on
//   ||Xw - y||^2 + l2_coef ||w||^2 + sum_j penalty_j |w_j|
// run until the objective changes by less than tol between sweeps and the
// KKT residual is driven below kkt_tol (the objective flattens long before
// the weights settle, so the stationarity check is what actually gates).
std::pair<VectorXd, int> cd_solve(const MatrixXd& X, const VectorXd& y,
                                  const VectorXd& penalty, double l2_coef,
                                  double tol = 1e-8, double kkt_tol = 1e-8,
                                  int max_sweeps = 200000) {
    const Index m = X.cols();
    MatrixXd G = X.transpose() * X;
    VectorXd c = X.transpose() * y;
    const double yy = y.squaredNorm();
    VectorXd w = VectorXd::Zero(m);
    VectorXd Gw = VectorXd::Zero(m);
    auto objective = [&]() {
        double quad = w.dot(Gw) - 2.0 * w.dot(c) + yy + l2_coef * w.squaredNorm();
        for (Index j = 0; j < m; ++j) quad += penalty(j) * std::abs(w(j));
        return quad;
    };
    auto kkt_residual = [&]() {
        double worst = 0.0;
        for (Index j = 0; j < m; ++j) {
            double g = 2.0 * (Gw(j) - c(j)) + 2.0 * l2_coef * w(j);
            double viol = w(j) == 0.0 ? std::max(0.0, std::abs(g) - penalty(j))
                                      : std::abs(g + penalty(j) * (w(j) > 0 ? 1.0 : -1.0));
            worst = std::max(worst, viol);
        }
        return worst;
    };
    double prev = objective();
    int sweeps = 0;
    while (sweeps < max_sweeps) {
        ++sweeps;
        for (Index j = 0; j < m; ++j) {
            double denom = G(j, j) + l2_coef;
            if (denom <= 0.0) continue;  // constant-zero column
            double rho = c(j) - Gw(j) + G(j, j) * w(j);
            double z = soft_threshold(rho, 0.5 * penalty(j)) / denom;
            if (z != w(j)) {
                Gw += G.col(j) * (z - w(j));
                w(j) = z;
            }
        }
        Gw = G * w;  // refresh accumulated drift once per sweep
        double cur = objective();
        bool flat = std::abs(prev - cur) < tol;
        prev = cur;
        if (flat && kkt_residual() <= kkt_tol) break;
    }
    return {w, sweeps};
}

}  // namespace

FitResult fit_lasso(const MatrixXd& X, const VectorXd& y, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    auto [w, sweeps] = cd_solve(X, y, VectorXd::Constant(X.cols(), lambda), 0.0);
    FitResult res;
    res.kind = ModelKind::lasso;
    res.lambda = lambda;
    res.w = w;
    res.objective = lasso_objective(X, y, w, lambda);
    res.iterations = sweeps;
    return res;
}

FitResult fit_elastic_net(const MatrixXd& X, const VectorXd& y, double alpha,
                          double lambda) {
    if (alpha < 0.0 || lambda < 0.0) throw std::invalid_argument("alpha/lambda must be >= 0");
    auto [w, sweeps] = cd_solve(X, y, VectorXd::Constant(X.cols(), alpha * lambda), alpha);
    FitResult res;
    res.kind = ModelKind::elastic_net;
    res.alpha = alpha;
    res.lambda = lambda;
    res.w = w;
    res.objective = enet_objective(X, y, w, alpha, lambda);
    res.iterations = sweeps;
    return res;
}

FitResult fit_tv(const MatrixXd& X, const VectorXd& y, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    const Index m = X.cols();
    // w = cumulative sums of u; column j of the transformed design is the
    // suffix sum of the original columns from j on
    MatrixXd Xl(X.rows(), m);
    Xl.col(m - 1) = X.col(m - 1);
    for (Index j = m - 2; j >= 0; --j) Xl.col(j) = Xl.col(j + 1) + X.col(j);
    VectorXd penalty = VectorXd::Constant(m, lambda);
    penalty(0) = 0.0;  // base weight unpenalized
    auto [u, sweeps] = cd_solve(Xl, y, penalty, 0.0);
    VectorXd w(m);
    double acc = 0.0;
    for (Index j = 0; j < m; ++j) {
        acc += u(j);
        w(j) = acc;
    }
    FitResult res;
    res.kind = ModelKind::total_variation;
    res.lambda = lambda;
    res.w = w;
    res.objective = tv_objective(X, y, w, lambda);
    res.iterations = sweeps;
    return res;
}

double kernel_loss(const MatrixXd& X, const MatrixXd& M, const VectorXd& y,
                   const VectorXd& w) {
    double total = 0.0;
    for (Index i = 0; i < X.rows(); ++i) {
        double d = M.row(i).dot(w);
        if (std::abs(d) < kKernelDenomGuard) continue;
        double r = X.row(i).dot(w) / d - y(i);
        total += r * r;
    }
    return total;
}

double kernel_loss_grad(const MatrixXd& X, const MatrixXd& M, const VectorXd& y,
                        const VectorXd& w, VectorXd& grad) {
    grad = VectorXd::Zero(w.size());
    double total = 0.0;
    for (Index i = 0; i < X.rows(); ++i) {
        double d = M.row(i).dot(w);
        if (std::abs(d) < kKernelDenomGuard) continue;
        double num = X.row(i).dot(w);
        double r = num / d - y(i);
        total += r * r;
        grad += (2.0 * r / (d * d)) * (d * X.row(i).transpose() - num * M.row(i).transpose());
    }
    return total;
}

VectorXd kernel_predictions(const MatrixXd& X, const MatrixXd& M, const VectorXd& w) {
    VectorXd out(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        double d = M.row(i).dot(w);
        out(i) = std::abs(d) < kKernelDenomGuard
                     ? std::numeric_limits<double>::quiet_NaN()
                     : X.row(i).dot(w) / d;
    }
    return out;
}

namespace {

FitResult fit_kernel_core(const MatrixXd& X, const MatrixXd& M, const VectorXd& y,
                          VectorXd w, const SgdConfig& cfg, ModelKind kind) {
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (cfg.epochs <= 0) throw std::invalid_argument("epochs must be > 0");
    if (cfg.batch_size <= 0) throw std::invalid_argument("batch_size must be > 0");
    if (X.rows() == 0) throw std::invalid_argument("no training rows");
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed);
    // Rows just clear of the denominator guard still carry a 1/d^2 factor
    // that can dwarf the rest of the batch; capping each row's contribution
    // keeps those steps bounded without changing their direction.
    const double row_clip = 10.0;
    VectorXd g(w.size()), gi(w.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        std::size_t used_this_epoch = 0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            g.setZero();
            int used = 0;
            for (std::size_t bi = start; bi < end; ++bi) {
                auto i = static_cast<Index>(order[bi]);
                double d = M.row(i).dot(w);
                if (std::abs(d) < kKernelDenomGuard) continue;  // loss pole: skip this step
                double num = X.row(i).dot(w);
                double r = num / d - y(i);
                gi = (2.0 * r / (d * d)) *
                     (d * X.row(i).transpose() - num * M.row(i).transpose());
                double norm = gi.norm();
                if (norm > row_clip) gi *= row_clip / norm;
                g += gi;
                ++used;
            }
            if (used > 0) {
                w -= (cfg.learning_rate / used) * g;
                used_this_epoch += static_cast<std::size_t>(used);
            }
        }
        if (used_this_epoch == 0)
            throw std::runtime_error(
                "kernel regression diverged: every training row was skipped for an epoch");
    }
    FitResult res;
    res.kind = kind;
    res.w = w;
    res.objective = kernel_loss(X, M, y, w);
    res.iterations = cfg.epochs;
    return res;
}

}  // namespace

FitResult fit_kernel_masked(const MatrixXd& X, const MatrixXd& M, const VectorXd& y,
                            const SgdConfig& cfg) {
    return fit_kernel_core(X, M, y, VectorXd::Ones(X.cols()), cfg, ModelKind::kernel_masked);
}

FitResult fit_kernel_exog(const MatrixXd& Xbg, const MatrixXd& Mbg, const MatrixXd& Xex,
                          const MatrixXd& Mex, const VectorXd& y, const SgdConfig& cfg) {
    if (Xbg.rows() != Xex.rows()) throw std::invalid_argument("bg/exog row mismatch");
    MatrixXd X(Xbg.rows(), Xbg.cols() + Xex.cols());
    X << Xbg, Xex;
    MatrixXd M(Mbg.rows(), Mbg.cols() + Mex.cols());
    M << Mbg, Mex;
    VectorXd w0 = VectorXd::Zero(X.cols());
    w0.head(Xbg.cols()) = VectorXd::Ones(Xbg.cols());
    return fit_kernel_core(X, M, y, w0, cfg, ModelKind::kernel_exog);
}

std::vector<double> predict_static(const DesignMatrix& D,
                                   std::span<const Eigen::Index> rows) {
    std::vector<double> preds;
    preds.reserve(rows.size());
    for (Index r : rows) {
        double v = std::numeric_limits<double>::quiet_NaN();
        for (Index j = 0; j < D.M.cols(); ++j) {
            if (D.M(r, j) > 0.5) {
                v = D.X(r, j);  // column 0 is the newest lag
                break;
            }
        }
        if (std::isnan(v))
            throw std::invalid_argument("static prediction needs an observed lag");
        preds.push_back(v);
    }
    return preds;
}

namespace {

std::vector<double> linear_predictions(const FoldContext& c, const VectorXd& w) {
    std::vector<double> preds;
    preds.reserve(static_cast<std::size_t>(c.Xt.rows()));
    VectorXd p = c.Xt * w;
    for (Index i = 0; i < p.size(); ++i)
        preds.push_back(c.standardizer.inverse_y(p(i)));
    return preds;
}

std::vector<double> kernel_to_mgdl(const FoldContext& c, const VectorXd& raw) {
    std::vector<double> preds;
    preds.reserve(static_cast<std::size_t>(raw.size()));
    for (Index i = 0; i < raw.size(); ++i) {
        // a guarded denominator at test time falls back to the train mean
        double v = std::isnan(raw(i)) ? 0.0 : raw(i);
        preds.push_back(c.standardizer.inverse_y(v));
    }
    return preds;
}

}  // namespace

ModelSpec standard_model(ModelKind kind, const HyperParams& hp, const SgdConfig& sgd) {
    ModelSpec spec;
    spec.name = to_string(kind);
    switch (kind) {
        case ModelKind::static_last:
            spec.trains_on_complete = false;
            spec.fit_predict = [](const FoldContext& c) {
                return predict_static(*c.design, c.test_rows);
            };
            break;
        case ModelKind::ols:
            spec.fit_predict = [](const FoldContext& c) {
                return linear_predictions(c, fit_ols(c.Xc, c.yc).w);
            };
            break;
        case ModelKind::ridge:
            spec.fit_predict = [hp](const FoldContext& c) {
                return linear_predictions(c, fit_ridge(c.Xc, c.yc, hp.lambda_ridge).w);
            };
            break;
        case ModelKind::lasso:
            spec.fit_predict = [hp](const FoldContext& c) {
                return linear_predictions(c, fit_lasso(c.Xc, c.yc, hp.lambda_lasso).w);
            };
            break;
        case ModelKind::elastic_net:
            spec.fit_predict = [hp](const FoldContext& c) {
                return linear_predictions(
                    c, fit_elastic_net(c.Xc, c.yc, hp.alpha_enet, hp.lambda_enet).w);
            };
            break;
        case ModelKind::total_variation:
            spec.fit_predict = [hp](const FoldContext& c) {
                return linear_predictions(c, fit_tv(c.Xc, c.yc, hp.lambda_tv).w);
            };
            break;
        case ModelKind::kernel_masked:
            spec.trains_on_complete = false;
            spec.fit_predict = [sgd](const FoldContext& c) {
                FitResult f = fit_kernel_masked(c.Xa, c.Ma, c.ya, sgd);
                return kernel_to_mgdl(c, kernel_predictions(c.Xt, c.Mt, f.w));
            };
            break;
        case ModelKind::kernel_exog:
            spec.trains_on_complete = false;
            spec.needs_exog = true;
            spec.fit_predict = [sgd](const FoldContext& c) {
                FitResult f = fit_kernel_exog(c.Xa, c.Ma, c.Ea, c.EMa, c.ya, sgd);
                MatrixXd Xt(c.Xt.rows(), c.Xt.cols() + c.Et.cols());
                Xt << c.Xt, c.Et;
                MatrixXd Mt(c.Mt.rows(), c.Mt.cols() + c.EMt.cols());
                Mt << c.Mt, c.EMt;
                return kernel_to_mgdl(c, kernel_predictions(Xt, Mt, f.w));
            };
            break;
    }
    return spec;
}

std::optional<double> CvResult::mean_rmse(const std::string& model, int horizon) const {
    for (const auto& row : summary)
        if (row.model == model && row.horizon_min == horizon) return row.mean_rmse;
    return std::nullopt;
}

CvResult cross_validate(const CgmSeries& cgm, const CgmSeries* exog,
                        std::span<const ModelSpec> models, std::span<const int> horizons,
                        int folds, int m_lags) {
    if (folds < 2) throw std::invalid_argument("need at least 2 folds");
    CvResult out;
    for (int horizon : horizons) {
        DesignMatrix D = make_lagged(cgm, m_lags, horizon);
        const Index n = D.X.rows();
        if (n < folds + 1)
            throw std::invalid_argument("fold too small for lag construction");
        const int horizon_bins = horizon / 5;

        MatrixXd E, EM;
        if (exog) lagged_block(*exog, D.row_bins, m_lags, E, EM);

        std::vector<bool> complete(static_cast<std::size_t>(n));
        for (Index r = 0; r < n; ++r)
            complete[static_cast<std::size_t>(r)] = D.M.row(r).minCoeff() > 0.5;

        for (int f = 0; f < folds; ++f) {
            Index test_begin = (n * (f + 1)) / (folds + 1);
            Index test_end = (n * (f + 2)) / (folds + 1);
            std::size_t test_begin_bin = D.row_bins[static_cast<std::size_t>(test_begin)];

            std::vector<Index> train_all, train_comp, test_rows;
            for (Index r = 0; r < test_begin; ++r) {
                // purge rows whose target time reaches into the test block
                if (D.row_bins[static_cast<std::size_t>(r)] +
                        static_cast<std::size_t>(horizon_bins) >=
                    test_begin_bin)
                    continue;
                train_all.push_back(r);
                if (complete[static_cast<std::size_t>(r)]) train_comp.push_back(r);
            }
            for (Index r = test_begin; r < test_end; ++r)
                if (complete[static_cast<std::size_t>(r)]) test_rows.push_back(r);

            bool base_viable = !test_rows.empty() && train_all.size() >= 2;
            FoldContext ctx;
            bool ctx_ready = false;
            if (base_viable) {
                try {
                    ctx.standardizer = fit_standardizer(D, train_all);
                    Eigen::MatrixXd dump;
                    ctx.standardizer.apply(D.X, D.M, train_comp, ctx.Xc, dump);
                    ctx.yc = VectorXd(static_cast<Index>(train_comp.size()));
                    for (std::size_t i = 0; i < train_comp.size(); ++i)
                        ctx.yc(static_cast<Index>(i)) =
                            ctx.standardizer.transform_y(D.y(train_comp[i]));
                    ctx.standardizer.apply(D.X, D.M, train_all, ctx.Xa, ctx.Ma);
                    ctx.ya = VectorXd(static_cast<Index>(train_all.size()));
                    for (std::size_t i = 0; i < train_all.size(); ++i)
                        ctx.ya(static_cast<Index>(i)) =
                            ctx.standardizer.transform_y(D.y(train_all[i]));
                    ctx.standardizer.apply(D.X, D.M, test_rows, ctx.Xt, ctx.Mt);
                    if (exog) {
                        ctx.has_exog = true;
                        auto pick = [&](const std::vector<Index>& rows, const MatrixXd& src,
                                        MatrixXd& dst) {
                            dst.resize(static_cast<Index>(rows.size()), src.cols());
                            for (std::size_t i = 0; i < rows.size(); ++i)
                                dst.row(static_cast<Index>(i)) = src.row(rows[i]);
                        };
                        pick(train_all, E, ctx.Ea);
                        pick(train_all, EM, ctx.EMa);
                        pick(test_rows, E, ctx.Et);
                        pick(test_rows, EM, ctx.EMt);
                    }
                    ctx.design = &D;
                    ctx.test_rows = test_rows;
                    ctx_ready = true;
                } catch (const std::exception& e) {
                    std::cerr << "fold " << (f + 1) << " at horizon " << horizon
                              << " skipped: " << e.what() << "\n";
                }
            }

            for (const auto& spec : models) {
                std::optional<double> rmse;
                bool viable = ctx_ready;
                if (spec.needs_exog && !exog) viable = false;
                if (spec.trains_on_complete && train_comp.size() < 2) viable = false;
                if (viable) {
                    try {
                        std::vector<double> preds = spec.fit_predict(ctx);
                        double ss = 0.0;
                        for (std::size_t i = 0; i < test_rows.size(); ++i) {
                            double d = preds[i] - D.y(test_rows[i]);
                            ss += d * d;
                        }
                        rmse = std::sqrt(ss / static_cast<double>(test_rows.size()));
                    } catch (const std::exception& e) {
                        std::cerr << spec.name << " fold " << (f + 1) << " horizon "
                                  << horizon << " failed: " << e.what() << "\n";
                    }
                }
                out.rows.push_back({spec.name, horizon, f + 1, rmse});
            }
        }
    }

    for (const auto& spec : models) {
        for (int horizon : horizons) {
            double sum = 0.0;
            int count = 0;
            for (const auto& row : out.rows) {
                if (row.model != spec.name || row.horizon_min != horizon || !row.rmse)
                    continue;
                sum += *row.rmse;
                ++count;
            }
            CvSummaryRow s;
            s.model = spec.name;
            s.horizon_min = horizon;
            if (count > 0) s.mean_rmse = sum / count;
            out.summary.push_back(s);
        }
    }
    return out;
}

void write_rmse_csv(const std::filesystem::path& per_fold,
                    const std::filesystem::path& summary, const CvResult& result) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : result.rows)
        rows.push_back({r.model, std::to_string(r.horizon_min), std::to_string(r.fold),
                        r.rmse ? format_double(*r.rmse) : "NA"});
    write_csv(per_fold, {"model", "horizon_min", "fold", "rmse_mgdl"}, rows);

    rows.clear();
    for (const auto& r : result.summary)
        rows.push_back({r.model, std::to_string(r.horizon_min),
                        r.mean_rmse ? format_double(*r.mean_rmse) : "NA"});
    write_csv(summary, {"model", "horizon_min", "mean_rmse"}, rows);
}

}  // namespace glucolens::predict
