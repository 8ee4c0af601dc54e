#include "curricula/stability.hpp"

#include "curricula/errors.hpp"
#include "curricula/util.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace curricula::stability {

namespace {

constexpr double kGnsSaturationFloor = 1e-12;
constexpr double kDivergenceLimit = 1e12;
constexpr std::uint64_t kReplicateBlock = 128;

double inf() {
    return std::numeric_limits<double>::infinity();
}

// Ideal-difficulty order of the examples: positions sorted by (Psi, index).
std::vector<std::size_t> difficulty_order(const MixtureProblem& problem) {
    std::vector<std::size_t> order(problem.examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return problem.examples[a].z.squaredNorm() < problem.examples[b].z.squaredNorm();
    });
    return order;
}

// Per-step sampling plan: how many of the difficulty-sorted examples are
// exposed, and the constant alpha / easy-noise scale where applicable.
struct SamplingPlan {
    std::vector<std::uint64_t> exposed_count; // curriculum only
    std::vector<std::uint64_t> exposed_hard;  // hard examples within prefix
    std::vector<double> alpha;                // fixed_alpha only
    std::vector<double> easy_scale;           // uniform (emergent decay)
    std::vector<std::size_t> order;           // difficulty-sorted positions
};

// Squared distance of the exact mean path to the optimum after t steps; the
// mean iterate follows noiseless gradient descent on the quadratic.
double mean_path_sq_dist(const MixtureProblem& problem, const Eigen::VectorXd& theta0,
                         double eta, std::uint64_t t) {
    const Eigen::VectorXd delta0 = theta0 - problem.theta_star;
    if (problem.hessian_diag.size() == 0) {
        return std::pow(1.0 - eta * problem.mu, 2.0 * static_cast<double>(t)) *
               delta0.squaredNorm();
    }
    double sq = 0.0;
    for (Eigen::Index i = 0; i < delta0.size(); ++i) {
        const double contraction = 1.0 - eta * problem.hessian_diag(i);
        sq += std::pow(contraction, 2.0 * static_cast<double>(t)) * delta0(i) * delta0(i);
    }
    return sq;
}

double mean_path_grad_sq(const MixtureProblem& problem, const Eigen::VectorXd& theta0,
                         double eta, std::uint64_t t) {
    const Eigen::VectorXd delta0 = theta0 - problem.theta_star;
    if (problem.hessian_diag.size() == 0) {
        return problem.mu * problem.mu *
               std::pow(1.0 - eta * problem.mu, 2.0 * static_cast<double>(t)) *
               delta0.squaredNorm();
    }
    double sq = 0.0;
    for (Eigen::Index i = 0; i < delta0.size(); ++i) {
        const double h = problem.hessian_diag(i);
        const double coord = std::pow(1.0 - eta * h, static_cast<double>(t)) * delta0(i);
        sq += h * h * coord * coord;
    }
    return sq;
}

SamplingPlan build_plan(const MixtureProblem& problem, const SgdRunConfig& config) {
    SamplingPlan plan;
    const std::uint64_t steps = config.steps;
    const SamplingSpec& spec = config.sampling;

    switch (spec.kind) {
    case SamplingKind::fixed_alpha: {
        plan.alpha.resize(steps);
        for (std::uint64_t s = 0; s < steps; ++s) {
            plan.alpha[s] =
                spec.alpha_table.size() == 1 ? spec.alpha_table[0] : spec.alpha_table[s];
        }
        break;
    }
    case SamplingKind::uniform: {
        plan.easy_scale.assign(steps, 1.0);
        if (spec.emergent_easy_decay) {
            const double initial = (config.theta0 - problem.theta_star).norm();
            for (std::uint64_t s = 0; s < steps; ++s) {
                if (initial == 0.0) {
                    plan.easy_scale[s] = 0.0;
                } else {
                    const double residual =
                        std::sqrt(mean_path_sq_dist(problem, config.theta0, config.eta, s));
                    plan.easy_scale[s] = std::min(1.0, residual / initial);
                }
            }
        }
        break;
    }
    case SamplingKind::curriculum: {
        plan.order = difficulty_order(problem);
        const std::size_t n = plan.order.size();
        std::vector<std::uint64_t> hard_prefix(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            hard_prefix[i + 1] =
                hard_prefix[i] + (problem.examples[plan.order[i]].hard ? 1 : 0);
        }

        std::vector<double> sorted_scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            sorted_scores[i] = ideal_difficulty(problem, problem.examples[plan.order[i]].z);
        }
        const curriculum::PacingSchedule schedule{spec.pacing, sorted_scores.front(),
                                                  sorted_scores.back()};

        plan.exposed_count.resize(steps);
        plan.exposed_hard.resize(steps);
        for (std::uint64_t s = 0; s < steps; ++s) {
            const double t =
                static_cast<double>(s + 1) / static_cast<double>(steps);
            std::size_t count;
            if (spec.pacing == curriculum::PacingKind::quantile) {
                count = static_cast<std::size_t>(std::ceil(t * static_cast<double>(n)));
            } else {
                const double threshold = curriculum::pacing_value(schedule, t);
                count = static_cast<std::size_t>(
                    std::upper_bound(sorted_scores.begin(), sorted_scores.end(), threshold) -
                    sorted_scores.begin());
            }
            count = std::max<std::size_t>(count, 1);
            plan.exposed_count[s] = count;
            plan.exposed_hard[s] = hard_prefix[count];
        }
        break;
    }
    }
    return plan;
}

std::vector<double> plan_sigma_sq(const MixtureProblem& problem, const SgdRunConfig& config,
                                  const SamplingPlan& plan) {
    const std::uint64_t steps = config.steps;
    std::vector<double> sigma(steps);
    const double se = problem.sigma_easy_sq;
    const double sh = problem.sigma_hard_sq;
    const auto n = static_cast<double>(problem.examples.size());
    const auto n_hard = static_cast<double>(problem.hard_count());

    for (std::uint64_t s = 0; s < steps; ++s) {
        switch (config.sampling.kind) {
        case SamplingKind::fixed_alpha:
            sigma[s] = effective_variance(plan.alpha[s], se, sh, 0.0);
            break;
        case SamplingKind::uniform: {
            const double scale = plan.easy_scale[s];
            sigma[s] = ((n - n_hard) * scale * scale * se + n_hard * sh) / n;
            break;
        }
        case SamplingKind::curriculum: {
            const auto count = static_cast<double>(plan.exposed_count[s]);
            const auto hard = static_cast<double>(plan.exposed_hard[s]);
            sigma[s] = ((count - hard) * se + hard * sh) / count;
            break;
        }
        }
    }
    return sigma;
}

struct BlockAccum {
    std::vector<double> d2;
    std::vector<double> d4;
    std::vector<double> xi2;
    std::vector<double> xi4;
};

} // namespace

void MixtureProblem::validate() const {
    if (dim < 1) {
        throw invalid_argument_error("dimension must be >= 1");
    }
    if (theta_star.size() != dim) {
        throw invalid_argument_error("theta_star size does not match dimension");
    }
    if (!(mu > 0.0)) {
        throw invalid_argument_error("strong convexity constant mu must be > 0");
    }
    if (lipschitz < mu) {
        throw invalid_argument_error("Lipschitz constant must be >= mu");
    }
    if (hessian_diag.size() != 0) {
        if (hessian_diag.size() != dim) {
            throw invalid_argument_error("hessian_diag size does not match dimension");
        }
        if (hessian_diag.minCoeff() < mu || hessian_diag.maxCoeff() > lipschitz) {
            throw invalid_argument_error("hessian eigenvalues must lie in [mu, L]");
        }
    }
    if (!(rho > 0.0 && rho < 1.0)) {
        throw invalid_argument_error("hard fraction rho must lie in (0,1)");
    }
    if (sigma_easy_sq < 0.0 || !(sigma_hard_sq > sigma_easy_sq)) {
        throw invalid_argument_error(
            "noise variances must satisfy 0 <= sigma_easy^2 < sigma_hard^2");
    }
    for (const Example& ex : examples) {
        if (ex.z.size() != dim) {
            throw invalid_argument_error("example dimension mismatch");
        }
    }
}

Eigen::VectorXd MixtureProblem::gradient(const Eigen::VectorXd& theta) const {
    if (hessian_diag.size() == 0) {
        return mu * (theta - theta_star);
    }
    return hessian_diag.asDiagonal() * (theta - theta_star);
}

std::size_t MixtureProblem::hard_count() const {
    std::size_t n = 0;
    for (const Example& ex : examples) {
        n += ex.hard ? 1 : 0;
    }
    return n;
}

MixtureProblem make_mixture_problem(int dim, std::size_t n_examples, double rho,
                                    double sigma_easy_sq, double sigma_hard_sq, double mu,
                                    std::uint64_t seed) {
    if (n_examples < 2) {
        throw invalid_argument_error("need at least 2 examples");
    }
    MixtureProblem problem;
    problem.dim = dim;
    problem.theta_star = Eigen::VectorXd::Zero(dim);
    problem.mu = mu;
    problem.lipschitz = mu;
    problem.rho = rho;
    problem.sigma_easy_sq = sigma_easy_sq;
    problem.sigma_hard_sq = sigma_hard_sq;

    auto n_hard = static_cast<std::size_t>(std::llround(rho * static_cast<double>(n_examples)));
    n_hard = std::clamp<std::size_t>(n_hard, 1, n_examples - 1);

    auto rng = util::make_rng(seed, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> easy_radius(0.1, 1.0);
    std::uniform_real_distribution<double> hard_radius(1.5, 2.5);

    problem.examples.reserve(n_examples);
    for (std::size_t i = 0; i < n_examples; ++i) {
        Eigen::VectorXd direction(dim);
        do {
            for (int d = 0; d < dim; ++d) {
                direction(d) = normal(rng);
            }
        } while (direction.norm() == 0.0);
        direction.normalize();
        const bool hard = i < n_hard;
        const double radius = hard ? hard_radius(rng) : easy_radius(rng);
        problem.examples.push_back({radius * direction, hard});
    }
    problem.validate();
    return problem;
}

double ideal_difficulty(const MixtureProblem& problem, const Eigen::VectorXd& z) {
    return 0.5 * problem.mu * z.squaredNorm();
}

double stability_bound(std::uint64_t t, double initial_sq_dist, double mu, double eta,
                       double sigma_sq) {
    if (!(mu * eta > 0.0 && mu * eta < 1.0)) {
        throw invalid_argument_error("stability bound requires 0 < mu*eta < 1");
    }
    const double contraction = std::pow(1.0 - mu * eta, static_cast<double>(t));
    return contraction * initial_sq_dist + (1.0 - contraction) * (eta / mu) * sigma_sq;
}

double stability_threshold(double radius, double mu, double eta) {
    if (!(radius > 0.0) || !(mu > 0.0) || !(eta > 0.0)) {
        throw invalid_argument_error("stability threshold requires R, mu, eta > 0");
    }
    return (mu / eta) * radius * radius;
}

double effective_variance(double alpha, double sigma_easy_sq, double sigma_hard_sq,
                          double delta) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw invalid_argument_error("easy fraction alpha must lie in [0,1]");
    }
    return alpha * sigma_easy_sq + (1.0 - alpha) * sigma_hard_sq + delta;
}

const char* to_string(SamplingKind kind) {
    switch (kind) {
    case SamplingKind::uniform:
        return "uniform";
    case SamplingKind::curriculum:
        return "curriculum";
    case SamplingKind::fixed_alpha:
        return "fixed_alpha";
    }
    return "?";
}

std::vector<double> linear_alpha_table(std::uint64_t steps, double start, double end,
                                       double until_frac) {
    if (!(until_frac > 0.0 && until_frac <= 1.0)) {
        throw invalid_argument_error("until_frac must lie in (0,1]");
    }
    std::vector<double> table(steps);
    const double horizon = until_frac * static_cast<double>(steps);
    for (std::uint64_t s = 0; s < steps; ++s) {
        const double f = std::min(1.0, static_cast<double>(s) / horizon);
        table[s] = start + f * (end - start);
    }
    return table;
}

void SgdRunConfig::validate(const MixtureProblem& problem) const {
    problem.validate();
    if (!(eta > 0.0) || eta * problem.lipschitz > 1.0 + 1e-12) {
        throw invalid_argument_error("step size must satisfy 0 < eta*L <= 1");
    }
    if (steps == 0 || replicates == 0) {
        throw invalid_argument_error("steps and replicates must be positive");
    }
    if (theta0.size() != problem.dim) {
        throw invalid_argument_error("theta0 dimension mismatch");
    }
    if (sampling.kind == SamplingKind::fixed_alpha) {
        if (sampling.alpha_table.empty() ||
            (sampling.alpha_table.size() != 1 && sampling.alpha_table.size() != steps)) {
            throw invalid_argument_error("alpha table must have 1 or `steps` entries");
        }
        for (double a : sampling.alpha_table) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw invalid_argument_error("alpha entries must lie in [0,1]");
            }
        }
    }
    if (sampling.kind == SamplingKind::curriculum && problem.examples.empty()) {
        throw invalid_argument_error("curriculum sampling requires examples");
    }
    if ((sampling.kind == SamplingKind::uniform || sampling.kind == SamplingKind::curriculum) &&
        problem.examples.empty()) {
        throw invalid_argument_error("example-based sampling requires examples");
    }
}

Eigen::VectorXd initial_point(const MixtureProblem& problem, double sq_dist) {
    if (sq_dist < 0.0) {
        throw invalid_argument_error("squared distance must be nonnegative");
    }
    Eigen::VectorXd direction = Eigen::VectorXd::Ones(problem.dim);
    direction.normalize();
    return problem.theta_star + std::sqrt(sq_dist) * direction;
}

Eigen::VectorXd sample_gradient(const MixtureProblem& problem, bool hard_tag,
                                const Eigen::VectorXd& theta, std::mt19937_64& rng,
                                double easy_scale) {
    const double variance = hard_tag ? problem.sigma_hard_sq
                                     : easy_scale * easy_scale * problem.sigma_easy_sq;
    const double sd = std::sqrt(variance / static_cast<double>(problem.dim));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd g = problem.gradient(theta);
    for (int d = 0; d < problem.dim; ++d) {
        g(d) += sd * normal(rng);
    }
    return g;
}

std::vector<double> analytic_sigma_sq(const MixtureProblem& problem,
                                      const SgdRunConfig& config) {
    config.validate(problem);
    const SamplingPlan plan = build_plan(problem, config);
    return plan_sigma_sq(problem, config, plan);
}

std::optional<std::uint64_t> first_sigma_crossing(std::span<const double> sigma_sq,
                                                  double threshold) {
    for (std::size_t s = 0; s < sigma_sq.size(); ++s) {
        if (sigma_sq[s] > threshold) {
            return s;
        }
    }
    return std::nullopt;
}

std::vector<double> quadratic_mean_sq_recursion(double initial_sq_dist, double mu, double eta,
                                                std::span<const double> sigma_sq) {
    std::vector<double> expected(sigma_sq.size() + 1);
    expected[0] = initial_sq_dist;
    const double contraction = (1.0 - eta * mu) * (1.0 - eta * mu);
    for (std::size_t s = 0; s < sigma_sq.size(); ++s) {
        expected[s + 1] = contraction * expected[s] + eta * eta * sigma_sq[s];
    }
    return expected;
}

TrajectoryStats run_sgd(const MixtureProblem& problem, const SgdRunConfig& config) {
    config.validate(problem);
    const std::uint64_t steps = config.steps;
    const std::uint64_t replicates = config.replicates;
    const SamplingPlan plan = build_plan(problem, config);
    const std::vector<double> sigma = plan_sigma_sq(problem, config, plan);

    const std::uint64_t n_blocks = (replicates + kReplicateBlock - 1) / kReplicateBlock;
    std::vector<BlockAccum> blocks(n_blocks);

    auto worker_body = [&](std::uint64_t block) {
        BlockAccum& acc = blocks[block];
        acc.d2.assign(steps + 1, 0.0);
        acc.d4.assign(steps + 1, 0.0);
        acc.xi2.assign(steps, 0.0);
        acc.xi4.assign(steps, 0.0);
        const std::uint64_t lo = block * kReplicateBlock;
        const std::uint64_t hi = std::min(replicates, lo + kReplicateBlock);

        const auto n_examples = problem.examples.size();
        std::uniform_int_distribution<std::size_t> any_example(0, n_examples > 0 ? n_examples - 1
                                                                                 : 0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);

        Eigen::VectorXd theta(problem.dim);
        for (std::uint64_t r = lo; r < hi; ++r) {
            auto rng = util::make_rng(config.seed, r);
            theta = config.theta0;
            {
                const double d2 = (theta - problem.theta_star).squaredNorm();
                acc.d2[0] += d2;
                acc.d4[0] += d2 * d2;
            }
            for (std::uint64_t s = 0; s < steps; ++s) {
                bool hard = false;
                double easy_scale = 1.0;
                switch (config.sampling.kind) {
                case SamplingKind::uniform:
                    hard = problem.examples[any_example(rng)].hard;
                    easy_scale = plan.easy_scale[s];
                    break;
                case SamplingKind::fixed_alpha:
                    hard = unit(rng) >= plan.alpha[s];
                    break;
                case SamplingKind::curriculum: {
                    std::uniform_int_distribution<std::uint64_t> exposed(
                        0, plan.exposed_count[s] - 1);
                    hard = problem.examples[plan.order[exposed(rng)]].hard;
                    break;
                }
                }
                const double variance = hard ? problem.sigma_hard_sq
                                             : easy_scale * easy_scale * problem.sigma_easy_sq;
                const double sd = std::sqrt(variance / static_cast<double>(problem.dim));
                double xi_sq = 0.0;
                Eigen::VectorXd g = problem.gradient(theta);
                for (int d = 0; d < problem.dim; ++d) {
                    const double noise = sd * normal(rng);
                    xi_sq += noise * noise;
                    g(d) += noise;
                }
                theta -= config.eta * g;
                const double d2 = (theta - problem.theta_star).squaredNorm();
                acc.d2[s + 1] += d2;
                acc.d4[s + 1] += d2 * d2;
                acc.xi2[s] += xi_sq;
                acc.xi4[s] += xi_sq * xi_sq;
            }
        }
    };

    unsigned n_threads = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                            : std::thread::hardware_concurrency();
    n_threads = std::max(1u, std::min<unsigned>(n_threads, static_cast<unsigned>(n_blocks)));
    if (n_threads == 1) {
        for (std::uint64_t b = 0; b < n_blocks; ++b) {
            worker_body(b);
        }
    } else {
        std::atomic<std::uint64_t> next_block{0};
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (unsigned i = 0; i < n_threads; ++i) {
            pool.emplace_back([&] {
                while (true) {
                    const std::uint64_t b = next_block.fetch_add(1);
                    if (b >= n_blocks) {
                        return;
                    }
                    worker_body(b);
                }
            });
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }

    // Fixed-order reduction over blocks keeps results identical for any
    // thread count.
    std::vector<double> sum_d2(steps + 1, 0.0);
    std::vector<double> sum_d4(steps + 1, 0.0);
    std::vector<double> sum_xi2(steps, 0.0);
    std::vector<double> sum_xi4(steps, 0.0);
    for (const BlockAccum& acc : blocks) {
        for (std::uint64_t t = 0; t <= steps; ++t) {
            sum_d2[t] += acc.d2[t];
            sum_d4[t] += acc.d4[t];
        }
        for (std::uint64_t s = 0; s < steps; ++s) {
            sum_xi2[s] += acc.xi2[s];
            sum_xi4[s] += acc.xi4[s];
        }
    }

    TrajectoryStats stats;
    stats.mode = to_string(config.sampling.kind);
    if (config.sampling.kind == SamplingKind::uniform && config.sampling.emergent_easy_decay) {
        stats.mode += "+emergent_easy_decay";
    }
    const double n = static_cast<double>(replicates);
    double running_max_sigma = 0.0;
    const double initial_sq = (config.theta0 - problem.theta_star).squaredNorm();
    // Same expression as stability_bound, but tolerating the mu*eta = 1
    // endpoint admitted by eta <= 1/L (contraction factor exactly 0).
    const auto bound_at = [&](std::uint64_t t, double sigma_sq) {
        const double contraction = std::pow(1.0 - problem.mu * config.eta,
                                            static_cast<double>(t));
        return contraction * initial_sq +
               (1.0 - contraction) * (config.eta / problem.mu) * sigma_sq;
    };

    for (std::uint64_t t = 0; t <= steps; ++t) {
        const double mean = sum_d2[t] / n;
        const double var = std::max(0.0, sum_d4[t] / n - mean * mean);
        stats.mean_sq_dist.push_back(mean);
        stats.mean_sq_se.push_back(replicates > 1 ? std::sqrt(var / (n - 1.0)) : 0.0);
        stats.bound.push_back(bound_at(t, running_max_sigma));
        if (t < steps) {
            running_max_sigma = std::max(running_max_sigma, sigma[t]);
        }
        if (mean > kDivergenceLimit) {
            stats.aborted = true;
            stats.abort_step = t;
            break;
        }
    }

    const std::uint64_t recorded_steps =
        stats.aborted ? stats.abort_step : steps;
    for (std::uint64_t s = 0; s < recorded_steps; ++s) {
        stats.sigma_sq.push_back(sigma[s]);
        const double hat = sum_xi2[s] / n;
        const double hat_var = std::max(0.0, sum_xi4[s] / n - hat * hat);
        const double hat_se = replicates > 1 ? std::sqrt(hat_var / (n - 1.0)) : 0.0;
        stats.sigma_sq_hat.push_back(hat);
        stats.sigma_sq_hat_se.push_back(hat_se);

        const double grad_sq = mean_path_grad_sq(problem, config.theta0, config.eta, s);
        const bool saturated = grad_sq < kGnsSaturationFloor;
        stats.gns_saturated.push_back(saturated ? 1 : 0);
        stats.gns.push_back(saturated ? inf() : sigma[s] / grad_sq);
        stats.gns_hat.push_back(saturated ? inf() : hat / grad_sq);
        stats.gns_hat_se.push_back(saturated ? inf() : hat_se / grad_sq);
    }
    return stats;
}

OrderingComparison compare_orderings(
    const MixtureProblem& problem,
    std::span<const std::pair<std::string, SgdRunConfig>> configs) {
    if (configs.size() < 2) {
        throw invalid_argument_error("need at least 2 configurations to compare");
    }
    const std::uint64_t steps = configs.front().second.steps;
    for (const auto& [label, config] : configs) {
        if (config.steps != steps) {
            throw invalid_argument_error("configurations disagree on step count; cannot align");
        }
    }

    OrderingComparison report;
    report.steps = steps;
    report.late_window_begin = steps - steps / 5;

    double min_uniform_sigma = inf();
    double max_curriculum_sigma = -inf();
    for (const auto& [label, config] : configs) {
        const TrajectoryStats stats = run_sgd(problem, config);
        if (stats.aborted) {
            throw numerical_error("run '" + label + "' diverged at step " +
                                  std::to_string(stats.abort_step));
        }
        OrderingComparison::Entry entry;
        entry.label = label;
        entry.kind = config.sampling.kind;

        double sigma_sum = 0.0;
        double gns_sum = 0.0;
        double gns_var_sum = 0.0;
        std::uint64_t count = 0;
        bool all_unsaturated = true;
        for (std::uint64_t s = report.late_window_begin; s < steps; ++s) {
            sigma_sum += stats.sigma_sq[s];
            if (stats.gns_saturated[s]) {
                all_unsaturated = false;
            } else {
                gns_sum += stats.gns_hat[s];
                gns_var_sum += stats.gns_hat_se[s] * stats.gns_hat_se[s];
            }
            ++count;
        }
        entry.late_sigma_sq_mean = sigma_sum / static_cast<double>(count);
        entry.gns_valid = all_unsaturated;
        if (all_unsaturated) {
            entry.late_gns_mean = gns_sum / static_cast<double>(count);
            entry.late_gns_se = std::sqrt(gns_var_sum) / static_cast<double>(count);
        } else {
            entry.late_gns_mean = inf();
            entry.late_gns_se = inf();
        }
        entry.final_mean_sq = stats.mean_sq_dist.back();
        entry.final_se = stats.mean_sq_se.back();
        report.entries.push_back(entry);

        if (config.sampling.kind == SamplingKind::curriculum) {
            max_curriculum_sigma = std::max(max_curriculum_sigma, entry.late_sigma_sq_mean);
        } else {
            min_uniform_sigma = std::min(min_uniform_sigma, entry.late_sigma_sq_mean);
        }
    }

    if (problem.sigma_hard_sq > problem.sigma_easy_sq &&
        std::isfinite(max_curriculum_sigma) && std::isfinite(min_uniform_sigma) &&
        max_curriculum_sigma > min_uniform_sigma + 1e-12) {
        throw numerical_error(
            "late-window effective variance under a curriculum exceeds uniform sampling's");
    }
    return report;
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryStats& stats) {
    std::ostringstream out;
    out << "step,mean_sq_dist,stderr,sigma_sq,gns,bound\n";
    for (std::size_t t = 0; t < stats.mean_sq_dist.size(); ++t) {
        out << t << ',' << util::format_double(stats.mean_sq_dist[t]) << ','
            << util::format_double(stats.mean_sq_se[t]) << ',';
        if (t < stats.sigma_sq.size()) {
            out << util::format_double(stats.sigma_sq[t]);
        }
        out << ',';
        if (t < stats.gns.size()) {
            out << (stats.gns_saturated[t] ? "inf" : util::format_double(stats.gns[t]));
        }
        out << ',' << util::format_double(stats.bound[t]) << '\n';
    }
    util::write_text_file(path, out.str());
}

void write_comparison_csv(const std::filesystem::path& path, const OrderingComparison& report) {
    std::ostringstream out;
    out << "label,sampling,late_sigma_sq_mean,late_gns_mean,late_gns_se,final_mean_sq,final_se\n";
    for (const auto& entry : report.entries) {
        out << entry.label << ',' << to_string(entry.kind) << ','
            << util::format_double(entry.late_sigma_sq_mean) << ','
            << (entry.gns_valid ? util::format_double(entry.late_gns_mean) : "inf") << ','
            << (entry.gns_valid ? util::format_double(entry.late_gns_se) : "inf") << ','
            << util::format_double(entry.final_mean_sq) << ','
            << util::format_double(entry.final_se) << '\n';
    }
    util::write_text_file(path, out.str());
}

} // namespace curricula::stability
