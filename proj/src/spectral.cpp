#include "curricula/spectral.hpp"

#include "curricula/errors.hpp"
#include "curricula/util.hpp"

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace curricula::spectral {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kSingularZeroTol = 1e-12;

double median_of_sorted(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) {
        return values[n / 2];
    }
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct PooledStats {
    double mean = 0.0;
    double median = 0.0;
    double var = 0.0;
};

PooledStats pooled_stats(std::vector<double>& values) {
    PooledStats stats;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    stats.mean = sum / n;
    double ss = 0.0;
    for (double v : values) {
        const double d = v - stats.mean;
        ss += d * d;
    }
    stats.var = ss / n;
    stats.median = median_of_sorted(values);
    return stats;
}

void put_f64_le(std::string& out, double value) {
    const auto bits = std::bit_cast<std::uint64_t>(value);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
}

double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) {
        bits = (bits << 8) | p[i];
    }
    return std::bit_cast<double>(bits);
}

} // namespace

const char* to_string(MatrixRole role) {
    switch (role) {
    case MatrixRole::weight:
        return "weight";
    case MatrixRole::bias:
        return "bias";
    case MatrixRole::lm_head:
        return "lm_head";
    }
    return "?";
}

MatrixRole role_from_string(const std::string& name) {
    if (name == "weight") {
        return MatrixRole::weight;
    }
    if (name == "bias") {
        return MatrixRole::bias;
    }
    if (name == "lm_head") {
        return MatrixRole::lm_head;
    }
    throw invalid_argument_error("unknown matrix role '" + name + "'");
}

Eigen::MatrixXd MatrixEntry::matrix() const {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(values.data(), static_cast<Eigen::Index>(rows),
                                      static_cast<Eigen::Index>(cols));
}

void MatrixArchive::validate() const {
    std::size_t heads = 0;
    for (const MatrixEntry& entry : entries) {
        if (entry.rows * entry.cols != entry.values.size()) {
            throw corrupt_archive_error("entry '" + entry.name + "': " +
                                        std::to_string(entry.values.size()) + " values for " +
                                        std::to_string(entry.rows) + "x" +
                                        std::to_string(entry.cols));
        }
        if (entry.role == MatrixRole::bias && entry.cols != 1) {
            throw corrupt_archive_error("bias entry '" + entry.name + "' must have cols == 1");
        }
        if (entry.role == MatrixRole::lm_head) {
            ++heads;
        }
    }
    if (heads > 1) {
        throw corrupt_archive_error("archive has " + std::to_string(heads) + " lm_head entries");
    }
}

const MatrixEntry* MatrixArchive::lm_head() const {
    for (const MatrixEntry& entry : entries) {
        if (entry.role == MatrixRole::lm_head) {
            return &entry;
        }
    }
    return nullptr;
}

double entrywise_l1(const Eigen::MatrixXd& m) {
    return m.cwiseAbs().sum();
}

double frobenius_norm(const Eigen::MatrixXd& m) {
    return m.norm();
}

double matrix_trace(const Eigen::MatrixXd& m) {
    const Eigen::Index r = std::min(m.rows(), m.cols());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < r; ++i) {
        sum += m(i, i);
    }
    return sum;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues();
}

double singular_entropy(const Eigen::MatrixXd& m) {
    const Eigen::VectorXd sigma = singular_values(m);
    const double total = sigma.sum();
    if (!(total > 0.0)) {
        throw invalid_argument_error("singular entropy of an all-zero matrix is undefined");
    }
    const double cutoff = kSingularZeroTol * sigma(0);
    const double r = static_cast<double>(sigma.size());
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma(i) <= cutoff) {
            continue; // 0 * log 0 := 0
        }
        const double p = sigma(i) / total;
        entropy += p * std::log(r * p);
    }
    return entropy;
}

double rank_gap(const Eigen::MatrixXd& m, std::size_t r) {
    const auto full = static_cast<std::size_t>(std::min(m.rows(), m.cols()));
    if (r > full) {
        throw invalid_argument_error("rank " + std::to_string(r) + " exceeds min dimension " +
                                     std::to_string(full));
    }
    const Eigen::VectorXd sigma = singular_values(m);
    double gap = 0.0;
    for (auto i = static_cast<Eigen::Index>(r); i < sigma.size(); ++i) {
        gap += sigma(i) * sigma(i);
    }
    return gap;
}

const std::array<const char*, CheckpointMetrics::kCount>& CheckpointMetrics::names() {
    static const std::array<const char*, kCount> n = {
        "l1_avg",         "l2_avg",      "l1_l2_ratio",          "weight_mean",
        "weight_median",  "weight_var",  "bias_mean",            "bias_median",
        "bias_var",       "trace_avg",   "spectral_avg",         "trace_spectral_ratio",
        "singular_mean",  "singular_var"};
    return n;
}

std::array<std::optional<double>, CheckpointMetrics::kCount> CheckpointMetrics::as_row() const {
    return {l1_avg,     l2_avg,      l1_l2_ratio,          weight_mean, weight_median,
            weight_var, bias_mean,   bias_median,          bias_var,    trace_avg,
            spectral_avg, trace_spectral_ratio, singular_mean, singular_var};
}

CheckpointMetrics checkpoint_metrics(const MatrixArchive& archive) {
    archive.validate();

    std::vector<double> weight_elems;
    std::vector<double> bias_elems;
    std::vector<double> all_sigma;
    double l1_sum = 0.0;
    double l2_sum = 0.0;
    double ratio_sum = 0.0;
    double trace_sum = 0.0;
    double spectral_sum = 0.0;
    double trace_spectral_sum = 0.0;
    std::size_t n_weight = 0;

    for (const MatrixEntry& entry : archive.entries) {
        if (entry.role == MatrixRole::bias) {
            bias_elems.insert(bias_elems.end(), entry.values.begin(), entry.values.end());
            continue;
        }
        ++n_weight;
        weight_elems.insert(weight_elems.end(), entry.values.begin(), entry.values.end());
        const Eigen::MatrixXd m = entry.matrix();
        const double l1 = entrywise_l1(m);
        const double l2 = frobenius_norm(m);
        const double trace = matrix_trace(m);
        const Eigen::VectorXd sigma = singular_values(m);
        const double spectral = sigma.size() > 0 ? sigma(0) : 0.0;
        l1_sum += l1;
        l2_sum += l2;
        if (!(l2 > 0.0)) {
            throw numerical_error("matrix '" + entry.name + "' is all zeros; L1/L2 undefined");
        }
        ratio_sum += l1 / l2;
        trace_sum += trace;
        spectral_sum += spectral;
        if (!(spectral > 0.0)) {
            throw numerical_error("matrix '" + entry.name + "' has zero spectral norm");
        }
        trace_spectral_sum += trace / spectral;
        for (Eigen::Index i = 0; i < sigma.size(); ++i) {
            all_sigma.push_back(sigma(i));
        }
    }

    if (n_weight == 0) {
        throw invalid_argument_error("archive has no weight matrices");
    }

    CheckpointMetrics metrics;
    const double nw = static_cast<double>(n_weight);
    metrics.l1_avg = l1_sum / nw;
    metrics.l2_avg = l2_sum / nw;
    metrics.l1_l2_ratio = ratio_sum / nw;
    metrics.trace_avg = trace_sum / nw;
    metrics.spectral_avg = spectral_sum / nw;
    metrics.trace_spectral_ratio = trace_spectral_sum / nw;

    const PooledStats ws = pooled_stats(weight_elems);
    metrics.weight_mean = ws.mean;
    metrics.weight_median = ws.median;
    metrics.weight_var = ws.var;

    if (!bias_elems.empty()) {
        const PooledStats bs = pooled_stats(bias_elems);
        metrics.bias_mean = bs.mean;
        metrics.bias_median = bs.median;
        metrics.bias_var = bs.var;
    }

    PooledStats sigma_stats = pooled_stats(all_sigma);
    metrics.singular_mean = sigma_stats.mean;
    metrics.singular_var = sigma_stats.var;
    return metrics;
}

void write_archive(const MatrixArchive& archive, const std::filesystem::path& dir) {
    archive.validate();
    std::filesystem::create_directories(dir);
    ordered_json manifest;
    ordered_json entries = ordered_json::array();
    for (std::size_t i = 0; i < archive.entries.size(); ++i) {
        const MatrixEntry& entry = archive.entries[i];
        const std::string file = "m" + std::to_string(i) + ".f64";
        entries.push_back({{"name", entry.name},
                           {"role", to_string(entry.role)},
                           {"rows", entry.rows},
                           {"cols", entry.cols},
                           {"file", file}});
        std::string raw;
        raw.reserve(entry.values.size() * 8);
        for (double v : entry.values) {
            put_f64_le(raw, v);
        }
        util::write_text_file(dir / file, raw);
    }
    manifest["entries"] = std::move(entries);
    util::write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

MatrixArchive read_archive(const std::filesystem::path& dir) {
    json manifest = json::parse(util::read_text_file(dir / "manifest.json"));
    MatrixArchive archive;
    for (const auto& meta : manifest.at("entries")) {
        MatrixEntry entry;
        entry.name = meta.at("name").get<std::string>();
        entry.role = role_from_string(meta.at("role").get<std::string>());
        entry.rows = meta.at("rows").get<std::size_t>();
        entry.cols = meta.at("cols").get<std::size_t>();
        const std::string raw = util::read_text_file(dir / meta.at("file").get<std::string>());
        if (raw.size() != entry.rows * entry.cols * 8) {
            throw corrupt_archive_error("entry '" + entry.name + "': file size " +
                                        std::to_string(raw.size()) + " != expected " +
                                        std::to_string(entry.rows * entry.cols * 8));
        }
        entry.values.resize(entry.rows * entry.cols);
        const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
        for (std::size_t i = 0; i < entry.values.size(); ++i) {
            entry.values[i] = get_f64_le(bytes + 8 * i);
        }
        archive.entries.push_back(std::move(entry));
    }
    archive.validate();
    return archive;
}

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const std::pair<std::uint64_t, CheckpointMetrics>> rows) {
    std::ostringstream out;
    out << "step";
    for (const char* name : CheckpointMetrics::names()) {
        out << ',' << name;
    }
    out << '\n';
    for (const auto& [step, metrics] : rows) {
        out << step;
        for (const auto& value : metrics.as_row()) {
            out << ',';
            if (value.has_value()) {
                out << util::format_double(*value);
            }
        }
        out << '\n';
    }
    util::write_text_file(path, out.str());
}

} // namespace curricula::spectral
