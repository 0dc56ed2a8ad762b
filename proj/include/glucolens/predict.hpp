#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glucolens/slot_grid.hpp"

namespace glucolens::predict {

// Rows whose masked denominator falls below this are skipped during
// kernel-regression training; the loss has a pole there.
inline constexpr double kKernelDenomGuard = 1e-6;

// Glucose channel resampled to the 5-minute CGM cadence; latest reading
// per bin wins, matching the grid collision policy.
struct CgmSeries {
    Timestamp t0;
    std::vector<double> v;
    std::vector<std::uint8_t> mask;

    std::size_t size() const { return v.size(); }
    Timestamp bin_time(std::size_t i) const {
        return t0 + static_cast<std::int64_t>(i) * kCgmIntervalSeconds;
    }
};

CgmSeries extract_cgm(const SlotGrid& grid);

// Lagged design: row r predicts y = bg at horizon from features
// X(r, j) = bg[t - j * 5min], j = 0..m-1 (column 0 is the newest lag;
// adjacent columns are temporally adjacent). Masked feature entries are
// stored as 0 with M(r, j) = 0. Rows whose target is unobserved are
// dropped; rows with missing features are kept, masks record the pattern.
struct DesignMatrix {
    Eigen::MatrixXd X;
    Eigen::MatrixXd M;
    Eigen::VectorXd y;  // raw mg/dl
    int horizon_min = 0;
    std::vector<std::size_t> row_bins;  // CGM bin of each row's feature time
};

DesignMatrix make_lagged(const CgmSeries& cgm, int m_lags, int horizon_min);

// Lagged block of an auxiliary per-bin series (values kept raw), aligned
// with the given design rows.
void lagged_block(const CgmSeries& series, std::span<const std::size_t> row_bins,
                  int m_lags, Eigen::MatrixXd& values, Eigen::MatrixXd& mask);

std::vector<Eigen::Index> complete_rows(const DesignMatrix& D);

// Zero-mean unit-variance transform fitted on training rows only (masked
// statistics); zero-variance features are dropped and reported.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    std::vector<Eigen::Index> kept;
    double y_mean = 0.0;
    double y_std = 1.0;
    std::vector<std::string> warnings;

    void apply(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M,
               std::span<const Eigen::Index> rows, Eigen::MatrixXd& Xs,
               Eigen::MatrixXd& Ms) const;
    double transform_y(double v) const { return (v - y_mean) / y_std; }
    double inverse_y(double v) const { return v * y_std + y_mean; }
};

Standardizer fit_standardizer(const DesignMatrix& D, std::span<const Eigen::Index> rows);

enum class ModelKind {
    static_last,
    ols,
    lasso,
    ridge,
    elastic_net,
    total_variation,
    kernel_masked,
    kernel_exog,
};
const char* to_string(ModelKind kind);
std::optional<ModelKind> parse_model(std::string_view name);

struct FitResult {
    ModelKind kind = ModelKind::ols;
    Eigen::VectorXd w;
    double lambda = 0.0;
    double alpha = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool singular_fallback = false;  // OLS hit a singular normal matrix
};

// Closed-form solutions of the least-squares objectives (no intercept; the
// standardizer centers features and targets).
FitResult fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
FitResult fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

// Cyclic coordinate descent until the objective change drops below 1e-8.
FitResult fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);
FitResult fit_elastic_net(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                          double lambda);

// Total-variation penalty on adjacent-lag weight differences, solved
// exactly by reparameterizing the weights as cumulative sums of difference
// variables (the base weight unpenalized), which reduces to a lasso.
FitResult fit_tv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

double ols_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& w);
double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, double lambda);
double enet_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& w, double alpha, double lambda);
double tv_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w, double lambda);

struct SgdConfig {
    double learning_rate = 0.05;
    int epochs = 200;
    int batch_size = 32;
    std::uint64_t seed = 1;
};

// Masked kernel regression: sum_i (w.x_i / w.delta_i - y_i)^2 over rows
// clear of the denominator guard. Missing entries of X must be stored as
// zero so they do not reach the numerator.
double kernel_loss(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M,
                   const Eigen::VectorXd& y, const Eigen::VectorXd& w);
double kernel_loss_grad(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M,
                        const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                        Eigen::VectorXd& grad);
// NaN for rows whose denominator is inside the guard.
Eigen::VectorXd kernel_predictions(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M,
                                   const Eigen::VectorXd& w);

// Seeded mini-batch SGD from the all-ones start (a uniform masked average).
FitResult fit_kernel_masked(const Eigen::MatrixXd& X, const Eigen::MatrixXd& M,
                            const Eigen::VectorXd& y, const SgdConfig& cfg);

// Adds lagged exogenous indicators with their own observation masks; the
// exogenous weight block starts at zero so the initial model matches
// fit_kernel_masked's starting point.
FitResult fit_kernel_exog(const Eigen::MatrixXd& Xbg, const Eigen::MatrixXd& Mbg,
                          const Eigen::MatrixXd& Xex, const Eigen::MatrixXd& Mex,
                          const Eigen::VectorXd& y, const SgdConfig& cfg);

// Carries the most recent observed lag forward, in mg/dl.
std::vector<double> predict_static(const DesignMatrix& D,
                                   std::span<const Eigen::Index> rows);

struct HyperParams {
    double lambda_lasso = 1.0;
    double lambda_ridge = 1.0;
    double alpha_enet = 1.0;
    double lambda_enet = 0.5;
    double lambda_tv = 1.0;
};

// Everything a model needs for one fold, already standardized. Linear
// models train on the complete block; kernel models train on every row.
struct FoldContext {
    Eigen::MatrixXd Xc;  // complete train rows
    Eigen::VectorXd yc;
    Eigen::MatrixXd Xa;  // all train rows (masked entries zero)
    Eigen::MatrixXd Ma;
    Eigen::VectorXd ya;
    Eigen::MatrixXd Xt;  // complete test rows
    Eigen::MatrixXd Mt;
    bool has_exog = false;
    Eigen::MatrixXd Ea, EMa, Et, EMt;  // exogenous blocks, raw binary
    const DesignMatrix* design = nullptr;
    std::vector<Eigen::Index> test_rows;
    Standardizer standardizer;
};

struct ModelSpec {
    std::string name;
    bool needs_exog = false;
    // Linear models require complete training rows; kernel and static do
    // not. The harness skips unviable (model, fold) pairs with an NA cell.
    bool trains_on_complete = true;
    // Returns one mg/dl prediction per fold test row.
    std::function<std::vector<double>(const FoldContext&)> fit_predict;
};

ModelSpec standard_model(ModelKind kind, const HyperParams& hp, const SgdConfig& sgd);

struct CvRow {
    std::string model;
    int horizon_min = 0;
    int fold = 0;                 // 1-based
    std::optional<double> rmse;   // nullopt when the fold was not viable
};

struct CvSummaryRow {
    std::string model;
    int horizon_min = 0;
    std::optional<double> mean_rmse;
};

struct CvResult {
    std::vector<CvRow> rows;
    std::vector<CvSummaryRow> summary;

    std::optional<double> mean_rmse(const std::string& model, int horizon) const;
};

// Forward-chaining cross validation: rows split into folds+1 contiguous
// chunks; fold f trains on chunks [0, f] (targets purged past the test
// boundary) and tests on chunk f+1. Test rows are complete-observation
// only. RMSE is reported in mg/dl.
CvResult cross_validate(const CgmSeries& cgm, const CgmSeries* exog,
                        std::span<const ModelSpec> models, std::span<const int> horizons,
                        int folds, int m_lags);

void write_rmse_csv(const std::filesystem::path& per_fold,
                    const std::filesystem::path& summary, const CvResult& result);

}  // namespace glucolens::predict
