#include "curricula/grad_noise.hpp"

#include "curricula/errors.hpp"
#include "curricula/util.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace curricula::gns {

namespace {

double squared_norm_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return s;
}

double mean_squared_norm(std::span<const GradientBatchStats> batches) {
    double sum = 0.0;
    for (const GradientBatchStats& b : batches) {
        sum += b.squared_norm;
    }
    return sum / static_cast<double>(batches.size());
}

int common_batch_size(std::span<const GradientBatchStats> batches, const char* which) {
    const int size = batches.front().batch_size;
    for (const GradientBatchStats& b : batches) {
        b.validate();
        if (b.batch_size != size) {
            throw invalid_argument_error(std::string(which) +
                                         " batches carry mixed batch sizes");
        }
    }
    return size;
}

} // namespace

GradientBatchStats GradientBatchStats::from_gradient(int batch_size, std::vector<double> grad) {
    GradientBatchStats stats;
    stats.batch_size = batch_size;
    stats.squared_norm = squared_norm_of(grad);
    stats.grad = std::move(grad);
    stats.validate();
    return stats;
}

void GradientBatchStats::validate() const {
    if (batch_size <= 0) {
        throw invalid_argument_error("batch_size must be positive");
    }
    if (grad.empty()) {
        return; // norm-only record
    }
    const double actual = squared_norm_of(grad);
    const double scale = std::max(std::abs(actual), std::abs(squared_norm));
    if (std::abs(actual - squared_norm) > 1e-12 * std::max(scale, 1.0)) {
        throw invalid_argument_error("squared_norm does not match gradient vector");
    }
}

const char* to_string(Method method) {
    return method == Method::exact ? "exact" : "two_batch_estimate";
}

NoiseScale gns_exact(double trace_sigma, std::span<const double> grad) {
    if (trace_sigma < 0.0) {
        throw invalid_argument_error("tr(Sigma) must be nonnegative");
    }
    const double grad_sq = squared_norm_of(grad);
    if (!(grad_sq > 0.0)) {
        throw division_by_zero_error("zero gradient: noise scale undefined at the optimum");
    }
    NoiseScale scale;
    scale.method = Method::exact;
    scale.trace_estimate = trace_sigma;
    scale.grad_sq_estimate = grad_sq;
    scale.value = trace_sigma / grad_sq;
    return scale;
}

NoiseScale estimate_gns(std::span<const GradientBatchStats> small_batches,
                        std::span<const GradientBatchStats> big_batches) {
    if (small_batches.size() < 2 || big_batches.size() < 2) {
        throw insufficient_data_error("need at least 2 batches per batch size");
    }
    const int b_small = common_batch_size(small_batches, "small");
    const int b_big = common_batch_size(big_batches, "big");
    if (b_small == b_big) {
        throw invalid_argument_error("batch sizes must differ");
    }
    if (b_small > b_big) {
        throw invalid_argument_error("small batch size exceeds big batch size");
    }

    const double m1 = mean_squared_norm(small_batches);
    const double m2 = mean_squared_norm(big_batches);
    const double big = static_cast<double>(b_big);
    const double small = static_cast<double>(b_small);

    NoiseScale scale;
    scale.method = Method::two_batch_estimate;
    scale.b_small = b_small;
    scale.b_big = b_big;
    scale.grad_sq_estimate = (big * m2 - small * m1) / (big - small);
    scale.trace_estimate = (m1 - m2) / (1.0 / small - 1.0 / big);
    if (scale.grad_sq_estimate <= 0.0) {
        scale.negative_flagged = true;
        scale.value = std::numeric_limits<double>::quiet_NaN();
        return scale;
    }
    scale.value = scale.trace_estimate / scale.grad_sq_estimate;
    scale.negative_flagged = scale.trace_estimate < 0.0;
    return scale;
}

void write_gns_csv(const std::filesystem::path& path, std::span<const GnsRow> rows) {
    std::ostringstream out;
    out << "step,gns,method,b_small,b_big\n";
    for (const GnsRow& row : rows) {
        out << row.step << ',' << util::format_double(row.scale.value) << ','
            << to_string(row.scale.method) << ',' << row.scale.b_small << ','
            << row.scale.b_big << '\n';
    }
    util::write_text_file(path, out.str());
}

} // namespace curricula::gns
