#include "curricula/hmm.hpp"

#include "curricula/errors.hpp"
#include "curricula/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace curricula::hmm {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_sequence(const HmmModel& model, const Eigen::MatrixXd& seq) {
    if (seq.rows() == 0) {
        throw invalid_argument_error("empty observation sequence");
    }
    if (seq.cols() != model.means.cols()) {
        throw invalid_argument_error("sequence dimension " + std::to_string(seq.cols()) +
                                     " does not match model dimension " +
                                     std::to_string(model.means.cols()));
    }
    if (!seq.allFinite()) {
        throw invalid_argument_error("non-finite observation");
    }
}

// log N(x | mean_k, diag(var_k)) for every state, one row per time step.
Eigen::MatrixXd log_emissions(const HmmModel& model, const Eigen::MatrixXd& seq) {
    const Eigen::Index T = seq.rows();
    const Eigen::Index K = model.states;
    const Eigen::Index D = seq.cols();
    Eigen::MatrixXd logb(T, K);
    Eigen::VectorXd log_norm(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        double s = 0.0;
        for (Eigen::Index d = 0; d < D; ++d) {
            s += std::log(model.variances(k, d));
        }
        log_norm(k) = -0.5 * (static_cast<double>(D) * kLog2Pi + s);
    }
    for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index k = 0; k < K; ++k) {
            double q = 0.0;
            for (Eigen::Index d = 0; d < D; ++d) {
                const double diff = seq(t, d) - model.means(k, d);
                q += diff * diff / model.variances(k, d);
            }
            logb(t, k) = log_norm(k) - 0.5 * q;
        }
    }
    return logb;
}

struct ForwardBackward {
    Eigen::MatrixXd gamma;          // T x K state posteriors
    Eigen::MatrixXd xi_sum;         // K x K expected transition counts
    double loglik = 0.0;
};

// Scaled forward-backward. Emissions are shifted by the per-step max before
// exponentiating; the shift cancels in gamma and xi and is restored in the
// log-likelihood.
ForwardBackward forward_backward(const HmmModel& model, const Eigen::MatrixXd& seq) {
    const Eigen::Index T = seq.rows();
    const Eigen::Index K = model.states;
    const Eigen::MatrixXd logb = log_emissions(model, seq);

    Eigen::MatrixXd e(T, K);
    Eigen::VectorXd shift(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        shift(t) = logb.row(t).maxCoeff();
        e.row(t) = (logb.row(t).array() - shift(t)).exp();
    }

    Eigen::MatrixXd alpha(T, K);
    Eigen::VectorXd scale(T);
    double loglik = 0.0;
    alpha.row(0) = model.initial.transpose().array() * e.row(0).array();
    scale(0) = alpha.row(0).sum();
    if (!(scale(0) > 0.0) || !std::isfinite(scale(0))) {
        throw numerical_error("forward recursion underflow at t=0");
    }
    alpha.row(0) /= scale(0);
    loglik += std::log(scale(0)) + shift(0);
    for (Eigen::Index t = 1; t < T; ++t) {
        alpha.row(t) =
            (alpha.row(t - 1) * model.transition).array() * e.row(t).array();
        scale(t) = alpha.row(t).sum();
        if (!(scale(t) > 0.0) || !std::isfinite(scale(t))) {
            throw numerical_error("forward recursion underflow at t=" + std::to_string(t));
        }
        alpha.row(t) /= scale(t);
        loglik += std::log(scale(t)) + shift(t);
    }

    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(T, K);
    beta.row(T - 1).setOnes();
    for (Eigen::Index t = T - 2; t >= 0; --t) {
        beta.row(t) = (model.transition *
                       (e.row(t + 1).transpose().array() * beta.row(t + 1).transpose().array())
                           .matrix())
                          .transpose() /
                      scale(t + 1);
    }

    ForwardBackward fb;
    fb.loglik = loglik;
    fb.gamma = alpha.array() * beta.array();
    fb.xi_sum = Eigen::MatrixXd::Zero(K, K);
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
        const Eigen::VectorXd weighted =
            (e.row(t + 1).transpose().array() * beta.row(t + 1).transpose().array()) / scale(t + 1);
        fb.xi_sum += ((alpha.row(t).transpose() * weighted.transpose()).array() *
                      model.transition.array())
                         .matrix();
    }
    return fb;
}

Eigen::MatrixXd pooled_rows(const ObservationSet& obs) {
    const auto D = static_cast<Eigen::Index>(obs.dimension());
    const auto N = static_cast<Eigen::Index>(obs.total_rows());
    Eigen::MatrixXd pooled(N, D);
    Eigen::Index row = 0;
    for (const Sequence& seq : obs.sequences) {
        pooled.middleRows(row, seq.values.rows()) = seq.values;
        row += seq.values.rows();
    }
    return pooled;
}

// k-means++ style selection of K rows as initial emission means.
Eigen::MatrixXd seed_means(const Eigen::MatrixXd& pooled, int states, std::mt19937_64& rng) {
    const Eigen::Index N = pooled.rows();
    Eigen::MatrixXd means(states, pooled.cols());
    std::uniform_int_distribution<Eigen::Index> uniform(0, N - 1);
    means.row(0) = pooled.row(uniform(rng));
    Eigen::VectorXd dist2 = (pooled.rowwise() - means.row(0)).rowwise().squaredNorm();
    for (int k = 1; k < states; ++k) {
        const double total = dist2.sum();
        Eigen::Index pick;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            pick = 0;
            for (Eigen::Index i = 0; i < N; ++i) {
                target -= dist2(i);
                if (target <= 0.0) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        } else {
            pick = uniform(rng);
        }
        means.row(k) = pooled.row(pick);
        dist2 = dist2.cwiseMin((pooled.rowwise() - means.row(k)).rowwise().squaredNorm());
    }
    return means;
}

} // namespace

std::size_t ObservationSet::dimension() const {
    return sequences.empty() ? 0 : static_cast<std::size_t>(sequences.front().values.cols());
}

std::size_t ObservationSet::total_rows() const {
    std::size_t n = 0;
    for (const Sequence& seq : sequences) {
        n += static_cast<std::size_t>(seq.values.rows());
    }
    return n;
}

ObservationSet observation_set(std::vector<Sequence> sequences) {
    if (sequences.empty()) {
        throw invalid_argument_error("no observation sequences");
    }
    const Eigen::Index D = sequences.front().values.cols();
    for (Sequence& seq : sequences) {
        if (seq.values.rows() == 0) {
            throw invalid_argument_error("sequence '" + seq.label + "' is empty");
        }
        if (seq.values.cols() != D) {
            throw invalid_argument_error("sequence '" + seq.label +
                                         "' has mismatched dimension");
        }
        if (!seq.values.allFinite()) {
            throw invalid_argument_error("sequence '" + seq.label +
                                         "' contains non-finite values");
        }
        if (seq.steps.empty()) {
            seq.steps.resize(static_cast<std::size_t>(seq.values.rows()));
            std::iota(seq.steps.begin(), seq.steps.end(), std::uint64_t{0});
        } else if (seq.steps.size() != static_cast<std::size_t>(seq.values.rows())) {
            throw invalid_argument_error("sequence '" + seq.label +
                                         "' step labels do not match row count");
        }
    }
    ObservationSet obs;
    obs.sequences = std::move(sequences);
    return obs;
}

ObservationSet zscore(std::vector<Sequence> sequences) {
    ObservationSet obs = observation_set(std::move(sequences));
    const auto D = static_cast<Eigen::Index>(obs.dimension());
    const auto N = static_cast<double>(obs.total_rows());
    if (N < 2) {
        throw invalid_argument_error("z-scoring needs at least 2 pooled observations");
    }

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
    for (const Sequence& seq : obs.sequences) {
        mean += seq.values.colwise().sum().transpose();
    }
    mean /= N;

    Eigen::VectorXd var = Eigen::VectorXd::Zero(D);
    for (const Sequence& seq : obs.sequences) {
        var += (seq.values.rowwise() - mean.transpose()).array().square().colwise().sum().matrix();
    }
    var /= N;

    obs.mean = mean;
    obs.stddev = var.array().sqrt();
    for (Eigen::Index d = 0; d < D; ++d) {
        if (obs.stddev(d) == 0.0) {
            obs.warnings.push_back("dimension " + std::to_string(d) +
                                   " has zero variance; normalized to 0");
        }
    }
    for (Sequence& seq : obs.sequences) {
        for (Eigen::Index d = 0; d < D; ++d) {
            if (obs.stddev(d) == 0.0) {
                seq.values.col(d).setZero();
            } else {
                seq.values.col(d) = (seq.values.col(d).array() - mean(d)) / obs.stddev(d);
            }
        }
    }
    return obs;
}

void HmmModel::validate() const {
    if (states < 1 || initial.size() != states || transition.rows() != states ||
        transition.cols() != states || means.rows() != states || variances.rows() != states ||
        means.cols() != variances.cols()) {
        throw invalid_argument_error("inconsistent HMM model shapes");
    }
    if (std::abs(initial.sum() - 1.0) > 1e-10) {
        throw invalid_argument_error("initial distribution does not sum to 1");
    }
    for (Eigen::Index i = 0; i < states; ++i) {
        if (std::abs(transition.row(i).sum() - 1.0) > 1e-10) {
            throw invalid_argument_error("transition row " + std::to_string(i) +
                                         " does not sum to 1");
        }
    }
    if ((variances.array() <= 0.0).any()) {
        throw invalid_argument_error("emission variances must be positive");
    }
}

double forward_loglik(const HmmModel& model, const Eigen::MatrixXd& seq) {
    model.validate();
    check_sequence(model, seq);
    return forward_backward(model, seq).loglik;
}

std::vector<int> viterbi(const HmmModel& model, const Eigen::MatrixXd& seq) {
    model.validate();
    check_sequence(model, seq);
    const Eigen::Index T = seq.rows();
    const Eigen::Index K = model.states;
    const Eigen::MatrixXd logb = log_emissions(model, seq);
    const Eigen::MatrixXd log_trans = model.transition.array().max(0.0).log().matrix();
    const Eigen::VectorXd log_init =
        model.initial.array().max(0.0).log().matrix();

    Eigen::MatrixXd delta(T, K);
    Eigen::MatrixXi back(T, K);
    delta.row(0) = (log_init + logb.row(0).transpose()).transpose();
    back.row(0).setZero();
    for (Eigen::Index t = 1; t < T; ++t) {
        for (Eigen::Index k = 0; k < K; ++k) {
            double best = kNegInf;
            Eigen::Index best_i = 0;
            for (Eigen::Index i = 0; i < K; ++i) {
                const double cand = delta(t - 1, i) + log_trans(i, k);
                if (cand > best) {
                    best = cand;
                    best_i = i;
                }
            }
            delta(t, k) = best + logb(t, k);
            back(t, k) = static_cast<int>(best_i);
        }
    }

    std::vector<int> path(static_cast<std::size_t>(T));
    Eigen::Index state = 0;
    delta.row(T - 1).maxCoeff(&state);
    path[static_cast<std::size_t>(T - 1)] = static_cast<int>(state);
    for (Eigen::Index t = T - 1; t > 0; --t) {
        state = back(t, state);
        path[static_cast<std::size_t>(t - 1)] = static_cast<int>(state);
    }
    return path;
}

FitResult baum_welch(const ObservationSet& obs, int states, std::uint64_t seed,
                     const EmConfig& config) {
    if (states < 1) {
        throw invalid_argument_error("state count must be >= 1");
    }
    if (obs.sequences.empty()) {
        throw invalid_argument_error("no observation sequences");
    }
    if (obs.total_rows() < static_cast<std::size_t>(states)) {
        throw insufficient_data_error("fewer observations than states");
    }

    const Eigen::MatrixXd pooled = pooled_rows(obs);
    const Eigen::Index D = pooled.cols();
    auto rng = util::make_rng(seed, 0);

    HmmModel model;
    model.states = states;
    model.initial = Eigen::VectorXd::Constant(states, 1.0 / states);
    model.transition = Eigen::MatrixXd::Constant(states, states, 1.0 / states);
    model.means = seed_means(pooled, states, rng);
    const Eigen::VectorXd pooled_mean = pooled.colwise().mean().transpose();
    Eigen::VectorXd pooled_var =
        (pooled.rowwise() - pooled_mean.transpose()).array().square().colwise().mean().transpose();
    pooled_var = pooled_var.cwiseMax(config.variance_floor);
    model.variances = pooled_var.transpose().replicate(states, 1);

    FitResult result;
    for (int iter = 0; iter < config.max_iters; ++iter) {
        Eigen::VectorXd init_acc = Eigen::VectorXd::Zero(states);
        Eigen::MatrixXd trans_acc = Eigen::MatrixXd::Zero(states, states);
        Eigen::VectorXd weight = Eigen::VectorXd::Zero(states);
        Eigen::MatrixXd mean_acc = Eigen::MatrixXd::Zero(states, D);
        Eigen::MatrixXd sq_acc = Eigen::MatrixXd::Zero(states, D);
        double loglik = 0.0;

        for (const Sequence& seq : obs.sequences) {
            const ForwardBackward fb = forward_backward(model, seq.values);
            loglik += fb.loglik;
            init_acc += fb.gamma.row(0).transpose();
            trans_acc += fb.xi_sum;
            weight += fb.gamma.colwise().sum().transpose();
            mean_acc += fb.gamma.transpose() * seq.values;
            sq_acc += fb.gamma.transpose() * seq.values.array().square().matrix();
        }

        result.loglik_trace.push_back(loglik);

        model.initial = init_acc / static_cast<double>(obs.sequences.size());
        for (Eigen::Index i = 0; i < states; ++i) {
            const double row_sum = trans_acc.row(i).sum();
            if (row_sum > 0.0) {
                model.transition.row(i) = trans_acc.row(i) / row_sum;
            }
            if (weight(i) > 0.0) {
                model.means.row(i) = mean_acc.row(i) / weight(i);
                model.variances.row(i) =
                    (sq_acc.row(i) / weight(i) - model.means.row(i).array().square().matrix())
                        .cwiseMax(config.variance_floor);
            }
        }

        if (result.loglik_trace.size() >= 2) {
            const double gain =
                loglik - result.loglik_trace[result.loglik_trace.size() - 2];
            if (gain < config.tol) {
                break;
            }
        }
    }
    result.model = model;
    return result;
}

BicResult bic_select(const ObservationSet& obs, std::span<const int> state_range,
                     std::span<const std::uint64_t> seeds, const EmConfig& config) {
    if (state_range.empty()) {
        throw invalid_argument_error("empty state range");
    }
    if (seeds.empty()) {
        throw invalid_argument_error("need at least one restart seed");
    }
    const double n = static_cast<double>(obs.total_rows());
    const auto D = static_cast<int>(obs.dimension());

    BicResult result;
    for (int states : state_range) {
        double best = kNegInf;
        for (std::uint64_t seed : seeds) {
            const FitResult fit = baum_welch(obs, states, seed, config);
            double loglik = 0.0;
            for (const Sequence& seq : obs.sequences) {
                loglik += forward_loglik(fit.model, seq.values);
            }
            best = std::max(best, loglik);
        }
        BicEntry entry;
        entry.states = states;
        entry.loglik = best;
        entry.param_count = (states - 1) + states * (states - 1) + 2 * states * D;
        entry.bic = -2.0 * best + static_cast<double>(entry.param_count) * std::log(n);
        result.table.push_back(entry);
    }
    const auto it = std::min_element(result.table.begin(), result.table.end(),
                                     [](const BicEntry& a, const BicEntry& b) {
                                         if (a.bic != b.bic) {
                                             return a.bic < b.bic;
                                         }
                                         return a.states < b.states;
                                     });
    result.selected_states = it->states;
    return result;
}

TrainingMap training_map(const HmmModel& model, const ObservationSet& obs) {
    model.validate();
    if (obs.sequences.empty()) {
        throw invalid_argument_error("no observation sequences");
    }

    TrainingMap map;
    std::vector<std::vector<int>> raw_paths;
    std::size_t longest = 0;
    for (std::size_t i = 0; i < obs.sequences.size(); ++i) {
        const Sequence& seq = obs.sequences[i];
        raw_paths.push_back(viterbi(model, seq.values));
        map.run_labels.push_back(seq.label);
        map.path_steps.push_back(seq.steps);
        if (seq.values.rows() > obs.sequences[longest].values.rows()) {
            longest = i;
        }
    }

    // Relabel by first-visit order along the longest run; unseen states keep
    // their relative order afterwards.
    map.relabel.assign(static_cast<std::size_t>(model.states), -1);
    int next = 0;
    for (int state : raw_paths[longest]) {
        if (map.relabel[static_cast<std::size_t>(state)] < 0) {
            map.relabel[static_cast<std::size_t>(state)] = next++;
        }
    }
    for (std::size_t k = 0; k < map.relabel.size(); ++k) {
        if (map.relabel[k] < 0) {
            map.relabel[k] = next++;
        }
    }

    map.dwell_counts.assign(static_cast<std::size_t>(model.states), 0);
    map.transition_counts = Eigen::MatrixXd::Zero(model.states, model.states);
    for (const std::vector<int>& raw : raw_paths) {
        std::vector<int> path;
        path.reserve(raw.size());
        for (int state : raw) {
            path.push_back(map.relabel[static_cast<std::size_t>(state)]);
        }
        for (std::size_t t = 0; t < path.size(); ++t) {
            ++map.dwell_counts[static_cast<std::size_t>(path[t])];
            if (t + 1 < path.size()) {
                map.transition_counts(path[t], path[t + 1]) += 1.0;
            }
        }
        map.paths.push_back(std::move(path));
    }
    return map;
}

void write_model_json(const std::filesystem::path& path, const HmmModel& model,
                      const ObservationSet& obs) {
    model.validate();
    ordered_json j;
    j["states"] = model.states;
    j["initial"] = std::vector<double>(model.initial.data(), model.initial.data() + model.states);
    auto matrix_to_json = [](const Eigen::MatrixXd& m) {
        ordered_json rows = ordered_json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            std::vector<double> row(m.cols());
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                row[static_cast<std::size_t>(c)] = m(i, c);
            }
            rows.push_back(row);
        }
        return rows;
    };
    j["transition"] = matrix_to_json(model.transition);
    j["means"] = matrix_to_json(model.means);
    j["variances"] = matrix_to_json(model.variances);
    if (obs.mean.size() > 0) {
        j["normalization"] = {
            {"mean", std::vector<double>(obs.mean.data(), obs.mean.data() + obs.mean.size())},
            {"stddev",
             std::vector<double>(obs.stddev.data(), obs.stddev.data() + obs.stddev.size())}};
    }
    util::write_text_file(path, j.dump(2) + "\n");
}

LoadedModel read_model_json(const std::filesystem::path& path) {
    const json j = json::parse(util::read_text_file(path));
    LoadedModel loaded;
    loaded.model.states = j.at("states").get<int>();
    const auto initial = j.at("initial").get<std::vector<double>>();
    loaded.model.initial =
        Eigen::Map<const Eigen::VectorXd>(initial.data(), static_cast<Eigen::Index>(initial.size()));
    auto matrix_from_json = [](const json& rows) {
        const auto R = static_cast<Eigen::Index>(rows.size());
        const auto C = static_cast<Eigen::Index>(rows.at(0).size());
        Eigen::MatrixXd m(R, C);
        for (Eigen::Index i = 0; i < R; ++i) {
            for (Eigen::Index c = 0; c < C; ++c) {
                m(i, c) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c))
                              .get<double>();
            }
        }
        return m;
    };
    loaded.model.transition = matrix_from_json(j.at("transition"));
    loaded.model.means = matrix_from_json(j.at("means"));
    loaded.model.variances = matrix_from_json(j.at("variances"));
    loaded.model.validate();
    if (j.contains("normalization")) {
        const auto mean = j["normalization"].at("mean").get<std::vector<double>>();
        const auto stddev = j["normalization"].at("stddev").get<std::vector<double>>();
        loaded.normalization_mean =
            Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        loaded.normalization_stddev = Eigen::Map<const Eigen::VectorXd>(
            stddev.data(), static_cast<Eigen::Index>(stddev.size()));
    }
    return loaded;
}

Sequence read_metrics_csv_sequence(const std::filesystem::path& path) {
    const auto rows = util::read_csv(path);
    if (rows.empty()) {
        throw insufficient_data_error("metrics file " + path.string() + " has no data rows");
    }
    const std::size_t cols = rows.front().size();
    if (cols < 2) {
        throw corrupt_archive_error(path.string() + ": expected step plus metric columns");
    }
    Sequence seq;
    seq.label = path.stem().string();
    seq.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols - 1));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) {
            throw corrupt_archive_error(path.string() + ": ragged row " + std::to_string(i));
        }
        seq.steps.push_back(util::parse_u64(rows[i][0]));
        for (std::size_t c = 1; c < cols; ++c) {
            if (rows[i][c].empty()) {
                throw invalid_argument_error(path.string() + ": empty metric cell in row " +
                                             std::to_string(i) +
                                             "; runs must provide every metric");
            }
            seq.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c - 1)) =
                util::parse_double(rows[i][c]);
        }
    }
    return seq;
}

void write_paths_csv(const std::filesystem::path& path, const TrainingMap& map) {
    std::ostringstream out;
    out << "run,step,state\n";
    for (std::size_t r = 0; r < map.paths.size(); ++r) {
        for (std::size_t t = 0; t < map.paths[r].size(); ++t) {
            out << map.run_labels[r] << ',' << map.path_steps[r][t] << ',' << map.paths[r][t]
                << '\n';
        }
    }
    util::write_text_file(path, out.str());
}

void write_transition_counts_csv(const std::filesystem::path& path, const TrainingMap& map) {
    std::ostringstream out;
    out << "from_state,to_state,count\n";
    for (Eigen::Index i = 0; i < map.transition_counts.rows(); ++i) {
        for (Eigen::Index j = 0; j < map.transition_counts.cols(); ++j) {
            out << i << ',' << j << ',' << util::format_double(map.transition_counts(i, j))
                << '\n';
        }
    }
    util::write_text_file(path, out.str());
}

} // namespace curricula::hmm
