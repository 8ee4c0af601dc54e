#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace curricula::gns {

/// Mean gradient of one batch together with its squared norm. The stored
/// squared_norm must agree with the vector within 1e-12 relative.
struct GradientBatchStats {
    int batch_size = 0;
    std::vector<double> grad;
    double squared_norm = 0.0;

    static GradientBatchStats from_gradient(int batch_size, std::vector<double> grad);
    void validate() const;
};

enum class Method { exact, two_batch_estimate };

const char* to_string(Method method);

/// Gradient noise scale tr(Sigma) / ||G||^2. For two-batch estimates a
/// negative trace or non-positive gradient estimate is flagged rather than
/// silently clamped; `value` keeps the raw ratio (NaN when the gradient
/// estimate is non-positive).
struct NoiseScale {
    double value = 0.0;
    Method method = Method::exact;
    int b_small = 0;
    int b_big = 0;
    bool negative_flagged = false;
    double trace_estimate = 0.0;
    double grad_sq_estimate = 0.0;
};

NoiseScale gns_exact(double trace_sigma, std::span<const double> grad);

/// Unbiased small/big-batch estimator. With m1, m2 the mean squared gradient
/// norms at batch sizes B1 < B2:
///   ||G||^2 ~ (B2 m2 - B1 m1) / (B2 - B1)
///   tr(Sigma) ~ (m1 - m2) / (1/B1 - 1/B2)
NoiseScale estimate_gns(std::span<const GradientBatchStats> small_batches,
                        std::span<const GradientBatchStats> big_batches);

struct GnsRow {
    std::uint64_t step = 0;
    NoiseScale scale;
};

void write_gns_csv(const std::filesystem::path& path, std::span<const GnsRow> rows);

} // namespace curricula::gns
