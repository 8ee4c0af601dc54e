#pragma once

#include "curricula/curriculum.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace curricula::stability {

/// One training example of the synthetic mixture: a displacement vector z and
/// its subset tag. Per-example loss is (mu/2) ||theta - theta* - z||^2, so the
/// ideal difficulty of z is (mu/2) ||z||^2.
struct Example {
    Eigen::VectorXd z;
    bool hard = false;
};

/// Strongly convex objective with easy/hard gradient-noise components.
/// The objective is quadratic with diagonal Hessian; hessian_diag empty means
/// the isotropic case H = mu * I (so L = mu and every bound quantity has a
/// closed form). Stochastic gradients are grad F(theta) + xi with xi isotropic
/// Gaussian of total variance sigma_easy_sq or sigma_hard_sq by subset tag;
/// easy and hard draws are independent, so the covariance cross-term of the
/// effective-variance decomposition is exactly zero.
struct MixtureProblem {
    int dim = 2;
    Eigen::VectorXd theta_star;
    double mu = 1.0;
    double lipschitz = 1.0;
    Eigen::VectorXd hessian_diag;
    double rho = 0.5;
    double sigma_easy_sq = 0.0;
    double sigma_hard_sq = 1.0;
    std::vector<Example> examples;

    void validate() const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
    std::size_t hard_count() const;
};

/// Generates round(rho*n) hard examples with strictly larger ||z|| than every
/// easy example, so ideal difficulty separates the subsets.
MixtureProblem make_mixture_problem(int dim, std::size_t n_examples, double rho,
                                    double sigma_easy_sq, double sigma_hard_sq, double mu,
                                    std::uint64_t seed);

/// Psi(z) = loss at the optimum = (mu/2) ||z||^2.
double ideal_difficulty(const MixtureProblem& problem, const Eigen::VectorXd& z);

/// (1-mu*eta)^t d0 + (1-(1-mu*eta)^t) (eta/mu) sigma^2, the constant-variance
/// SGD stability bound.
double stability_bound(std::uint64_t t, double initial_sq_dist, double mu, double eta,
                       double sigma_sq);

/// sigma_stab^2(R) = (mu/eta) R^2: the largest effective gradient variance
/// that keeps the expected squared radius within R^2.
double stability_threshold(double radius, double mu, double eta);

/// alpha sigma_easy^2 + (1-alpha) sigma_hard^2 + delta.
double effective_variance(double alpha, double sigma_easy_sq, double sigma_hard_sq, double delta);

enum class SamplingKind { uniform, curriculum, fixed_alpha };

const char* to_string(SamplingKind kind);

struct SamplingSpec {
    SamplingKind kind = SamplingKind::uniform;
    /// curriculum: pacing over ideal-difficulty scores; progress at update
    /// step s is (s+1)/steps, so the first step never draws an empty set.
    curriculum::PacingKind pacing = curriculum::PacingKind::quantile;
    /// fixed_alpha: easy fraction per step (size steps, or size 1 for a
    /// constant).
    std::vector<double> alpha_table;
    /// uniform only: scale the easy noise by the normalized mean-path
    /// residual, modeling easy gradients vanishing as the easy subset is fit.
    bool emergent_easy_decay = false;
};

/// alpha ramp from `start` down to `end` over the first until_frac of the run.
std::vector<double> linear_alpha_table(std::uint64_t steps, double start, double end,
                                       double until_frac);

struct SgdRunConfig {
    double eta = 0.1;
    std::uint64_t steps = 100;
    std::uint64_t replicates = 10000;
    std::uint64_t seed = 0;
    Eigen::VectorXd theta0;
    SamplingSpec sampling;
    int threads = 0; // 0 = hardware concurrency

    void validate(const MixtureProblem& problem) const;
};

/// theta* + R * u with u the normalized all-ones direction.
Eigen::VectorXd initial_point(const MixtureProblem& problem, double sq_dist);

/// Monte Carlo trajectory statistics. Distances are recorded at t = 0..steps;
/// per-step quantities (effective variance, noise scale, saturation) cover the
/// update steps t = 0..steps-1. The GNS denominator is the squared gradient
/// norm along the exact mean path (the noiseless GD path of the quadratic);
/// entries where it falls below 1e-12 are saturated and reported as +inf.
/// `bound` applies the stability bound with the running max of the analytic
/// effective variance.
struct TrajectoryStats {
    std::string mode;
    std::vector<double> mean_sq_dist;
    std::vector<double> mean_sq_se;
    std::vector<double> sigma_sq;
    std::vector<double> sigma_sq_hat;
    std::vector<double> sigma_sq_hat_se;
    std::vector<double> gns;
    std::vector<double> gns_hat;
    std::vector<double> gns_hat_se;
    std::vector<char> gns_saturated;
    std::vector<double> bound;
    bool aborted = false;
    std::uint64_t abort_step = 0;
};

TrajectoryStats run_sgd(const MixtureProblem& problem, const SgdRunConfig& config);

/// Analytic effective gradient variance per update step for a configuration.
std::vector<double> analytic_sigma_sq(const MixtureProblem& problem, const SgdRunConfig& config);

/// First update step whose analytic effective variance exceeds the threshold
/// (the measured stability horizon T_stab); nullopt when it never crosses.
std::optional<std::uint64_t> first_sigma_crossing(std::span<const double> sigma_sq,
                                                  double threshold);

/// Expected squared distance recursion for the isotropic quadratic:
/// e_{t+1} = (1 - eta*mu)^2 e_t + eta^2 sigma_t^2. Used as the independent
/// closed-form reference for the Monte Carlo runs.
std::vector<double> quadratic_mean_sq_recursion(double initial_sq_dist, double mu, double eta,
                                                std::span<const double> sigma_sq);

/// Single stochastic gradient draw of the noise model at a fixed point; the
/// building block of run_sgd, exposed for the statistical checks.
Eigen::VectorXd sample_gradient(const MixtureProblem& problem, bool hard_tag,
                                const Eigen::VectorXd& theta, std::mt19937_64& rng,
                                double easy_scale = 1.0);

struct OrderingComparison {
    struct Entry {
        std::string label;
        SamplingKind kind = SamplingKind::uniform;
        double late_sigma_sq_mean = 0.0;
        double late_gns_mean = 0.0;
        double late_gns_se = 0.0;
        bool gns_valid = false;
        double final_mean_sq = 0.0;
        double final_se = 0.0;
    };
    std::vector<Entry> entries;
    std::uint64_t late_window_begin = 0;
    std::uint64_t steps = 0;
};

/// Runs every config on the same problem and reports late-window (last 20% of
/// update steps) mean effective variance and noise scale plus the final mean
/// squared distance. When sigma_hard^2 > sigma_easy^2, a curriculum config
/// whose late-window analytic variance exceeds a uniform/fixed_alpha config's
/// is a numerical_error (the orderings are misconfigured).
OrderingComparison compare_orderings(
    const MixtureProblem& problem,
    std::span<const std::pair<std::string, SgdRunConfig>> configs);

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryStats& stats);
void write_comparison_csv(const std::filesystem::path& path, const OrderingComparison& report);

} // namespace curricula::stability
