#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace curricula::spectral {

enum class MatrixRole { weight, bias, lm_head };

const char* to_string(MatrixRole role);
MatrixRole role_from_string(const std::string& name);

/// One named matrix from a checkpoint. Values are stored row-major, matching
/// the on-disk layout byte for byte.
struct MatrixEntry {
    std::string name;
    MatrixRole role = MatrixRole::weight;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Eigen::MatrixXd matrix() const;
};

struct MatrixArchive {
    std::vector<MatrixEntry> entries;

    /// rows*cols == value count per entry, at most one lm_head, biases are
    /// single-column. Throws corrupt_archive_error on violation.
    void validate() const;

    const MatrixEntry* lm_head() const;
};

// Per-matrix helpers shared by the metrics and the tests.
double entrywise_l1(const Eigen::MatrixXd& m);
double frobenius_norm(const Eigen::MatrixXd& m);
/// Sum of diagonal entries W(i,i) for i < min(rows, cols); the standard trace
/// on square matrices.
double matrix_trace(const Eigen::MatrixXd& m);
Eigen::VectorXd singular_values(const Eigen::MatrixXd& m);

/// KL divergence between the normalized singular-value distribution and the
/// uniform distribution over r = min(rows, cols) components (natural log).
/// 0 for a flat spectrum, log r for a single spike. Singular values below
/// 1e-12 * sigma_max are treated as exactly zero.
double singular_entropy(const Eigen::MatrixXd& m);

/// Squared Frobenius error of the best rank-<=r approximation: the discarded
/// spectral energy sum_{i>r} sigma_i^2.
double rank_gap(const Eigen::MatrixXd& m, std::size_t r);

/// The 14 per-checkpoint summary metrics. Per-matrix quantities are averaged
/// uniformly over weight matrices (role weight or lm_head); element statistics
/// pool all elements of the role. Bias statistics are absent when the archive
/// has no bias entries. Variances are population variances; the median of an
/// even count is the mean of the two central elements.
struct CheckpointMetrics {
    double l1_avg = 0.0;
    double l2_avg = 0.0;
    double l1_l2_ratio = 0.0;
    double weight_mean = 0.0;
    double weight_median = 0.0;
    double weight_var = 0.0;
    std::optional<double> bias_mean;
    std::optional<double> bias_median;
    std::optional<double> bias_var;
    double trace_avg = 0.0;
    double spectral_avg = 0.0;
    double trace_spectral_ratio = 0.0;
    double singular_mean = 0.0;
    double singular_var = 0.0;

    static constexpr std::size_t kCount = 14;
    static const std::array<const char*, kCount>& names();
    std::array<std::optional<double>, kCount> as_row() const;
};

CheckpointMetrics checkpoint_metrics(const MatrixArchive& archive);

// Archive directory layout: manifest.json with [{name, role, rows, cols,
// file}] plus one raw file per entry holding row-major IEEE-754 doubles,
// little-endian. Round trips are bit-exact.
void write_archive(const MatrixArchive& archive, const std::filesystem::path& dir);
MatrixArchive read_archive(const std::filesystem::path& dir);

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const std::pair<std::uint64_t, CheckpointMetrics>> rows);

} // namespace curricula::spectral
