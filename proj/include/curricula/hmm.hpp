#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace curricula::hmm {

/// One run's observation sequence: T x D metric matrix plus the checkpoint
/// step behind each row (0..T-1 when the source carries no step column).
struct Sequence {
    std::string label;
    Eigen::MatrixXd values;
    std::vector<std::uint64_t> steps;
};

/// Sequences together with the z-scoring statistics that produced them.
/// mean/stddev are empty for raw (unnormalized) observation sets.
struct ObservationSet {
    std::vector<Sequence> sequences;
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;
    std::vector<std::string> warnings;

    std::size_t dimension() const;
    std::size_t total_rows() const;
};

ObservationSet observation_set(std::vector<Sequence> sequences);

/// Statistics are pooled jointly over all runs (population variance), then
/// applied per element. Zero-variance dimensions map to 0 with a warning.
ObservationSet zscore(std::vector<Sequence> sequences);

/// Gaussian HMM with diagonal covariance per state. means and variances are
/// K x D; transition is K x K row-stochastic.
struct HmmModel {
    int states = 0;
    Eigen::VectorXd initial;
    Eigen::MatrixXd transition;
    Eigen::MatrixXd means;
    Eigen::MatrixXd variances;

    void validate() const;
};

/// log p(seq | model) via the scaled forward recursion.
double forward_loglik(const HmmModel& model, const Eigen::MatrixXd& seq);

/// Most probable state path (log-domain dynamic programming).
std::vector<int> viterbi(const HmmModel& model, const Eigen::MatrixXd& seq);

struct EmConfig {
    int max_iters = 200;
    double tol = 1e-6;
    double variance_floor = 1e-6;
};

struct FitResult {
    HmmModel model;
    /// Total log-likelihood before each M-step; non-decreasing.
    std::vector<double> loglik_trace;
};

/// Baum-Welch over all sequences jointly. Emission means are seeded
/// k-means++-style from the pooled observations; initial and transition
/// probabilities start uniform.
FitResult baum_welch(const ObservationSet& obs, int states, std::uint64_t seed,
                     const EmConfig& config = {});

struct BicEntry {
    int states = 0;
    double loglik = 0.0;
    double bic = 0.0;
    int param_count = 0;
};

struct BicResult {
    int selected_states = 0;
    std::vector<BicEntry> table;
};

/// BIC = -2 loglik + k_params ln(total observations) with
/// k_params = (K-1) + K(K-1) + 2KD; per K the best of the seeded restarts.
BicResult bic_select(const ObservationSet& obs, std::span<const int> state_range,
                     std::span<const std::uint64_t> seeds, const EmConfig& config = {});

/// Viterbi decode of every run with states relabeled by first-visit order of
/// the longest run, so phase labels are comparable across runs.
struct TrainingMap {
    std::vector<std::string> run_labels;
    std::vector<std::vector<int>> paths;
    std::vector<std::vector<std::uint64_t>> path_steps;
    std::vector<std::uint64_t> dwell_counts;
    Eigen::MatrixXd transition_counts;
    /// relabel[old_state] = new_state.
    std::vector<int> relabel;
};

TrainingMap training_map(const HmmModel& model, const ObservationSet& obs);

// File formats. The model JSON stores the normalization statistics so a
// fitted model can decode new runs under the same scaling.
void write_model_json(const std::filesystem::path& path, const HmmModel& model,
                      const ObservationSet& obs);
struct LoadedModel {
    HmmModel model;
    Eigen::VectorXd normalization_mean;
    Eigen::VectorXd normalization_stddev;
};
LoadedModel read_model_json(const std::filesystem::path& path);

/// Metrics CSV from the spectral diagnostics: step column + metric columns.
/// The run label is the file stem.
Sequence read_metrics_csv_sequence(const std::filesystem::path& path);

void write_paths_csv(const std::filesystem::path& path, const TrainingMap& map);
void write_transition_counts_csv(const std::filesystem::path& path, const TrainingMap& map);

} // namespace curricula::hmm
