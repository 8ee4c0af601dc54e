// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned in code next to each check.

#include "curricula/corpus.hpp"
#include "curricula/curriculum.hpp"
#include "curricula/errors.hpp"
#include "curricula/grad_noise.hpp"
#include "curricula/hmm.hpp"
#include "curricula/scoring.hpp"
#include "curricula/spectral.hpp"
#include "curricula/stability.hpp"
#include "curricula/util.hpp"

#include "hmm_oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

using namespace curricula;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& what, const std::string& detail) {
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << what;
    if (!detail.empty()) {
        std::cout << " (" << detail << ")";
    }
    std::cout << "\n";
    if (!ok) {
        ++g_failures;
    }
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
    return util::format_double(v);
}

// --------------------------------------------------------------------------
// 1. formula exactness

void criterion_1() {
    const double tol = 1e-9;
    bool ok = std::abs(scoring::zipf_from_fpmw(1000.0) - 6.0) < tol;

    const scoring::Lexicon verbs = scoring::Lexicon::from_entries(
        scoring::LexiconKind::verb_set,
        std::vector<std::pair<std::string, double>>{{"run", 0}, {"jump", 0}});
    const std::vector<std::string> four = {"run", "run", "jump", "jump"};
    ok = ok && std::abs(scoring::score_words(four, scoring::IndexKind::verb_variation, verbs) -
                        1.0) < tol;
    const std::vector<std::string> none = {"table", "chair"};
    ok = ok &&
         std::abs(scoring::score_words(none, scoring::IndexKind::verb_variation, verbs)) < tol;

    ok = ok && std::abs(spectral::singular_entropy(Eigen::MatrixXd::Identity(4, 4))) < tol;
    Eigen::MatrixXd spike = Eigen::MatrixXd::Zero(4, 4);
    spike(0, 0) = 2.5;
    ok = ok && std::abs(spectral::singular_entropy(spike) - std::log(4.0)) < tol;

    report(1, ok, "formula exactness to 1e-9",
           "zipf(1000)=" + fmt(scoring::zipf_from_fpmw(1000.0)) +
               ", spike entropy=" + fmt(spectral::singular_entropy(spike)));
}

// --------------------------------------------------------------------------
// 2. Eckart-Young rank gap

void criterion_2() {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
    m(0, 0) = 3;
    m(1, 1) = 2;
    m(2, 2) = 1;
    const double expected[] = {14.0, 5.0, 1.0, 0.0};
    bool ok = true;
    std::ostringstream detail;
    for (std::size_t r = 0; r <= 3; ++r) {
        const double gap = spectral::rank_gap(m, r);
        ok = ok && std::abs(gap - expected[r]) < 1e-9;
        detail << (r > 0 ? " " : "") << fmt(gap);
    }
    report(2, ok, "rank gap of diag(3,2,1) equals {14,5,1,0} to 1e-9", detail.str());
}

// --------------------------------------------------------------------------
// 3. constant-variance stability bound

void criterion_3() {
    const auto start = std::chrono::steady_clock::now();
    // isotropic quadratic, mu = 1, eta = 0.1, constant sigma^2 = 1
    stability::MixtureProblem problem =
        stability::make_mixture_problem(10, 100, 0.5, 0.5, 1.0, 1.0, 2027);
    stability::SgdRunConfig config;
    config.eta = 0.1;
    config.steps = 200;
    config.replicates = 10000;
    config.seed = 314159;
    config.theta0 = stability::initial_point(problem, 4.0);
    config.sampling.kind = stability::SamplingKind::fixed_alpha;
    config.sampling.alpha_table = {0.0}; // always the sigma^2 = 1 component

    const stability::TrajectoryStats stats = stability::run_sgd(problem, config);

    bool bound_ok = true;
    std::uint64_t first_violation = 0;
    for (std::uint64_t t = 0; t <= config.steps; ++t) {
        const double bound = stability::stability_bound(t, 4.0, 1.0, 0.1, 1.0);
        if (stats.mean_sq_dist[t] > bound + 3.0 * stats.mean_sq_se[t]) {
            bound_ok = false;
            first_violation = t;
            break;
        }
    }

    // closed-form recursion fixed point: eta sigma^2 / (2 - eta mu) with mu=1
    const double stationary = config.eta * 1.0 / (2.0 - config.eta * 1.0);
    const double final_mean = stats.mean_sq_dist.back();
    const double final_se = stats.mean_sq_se.back();
    const bool stationary_ok = std::abs(final_mean - stationary) <= 3.0 * final_se;

    const double secs = elapsed_s(start);
    report(3, bound_ok && stationary_ok && secs < 60.0,
           "constant-variance trajectories respect the stability bound",
           bound_ok ? "final=" + fmt(final_mean) + " vs stationary=" + fmt(stationary) +
                          " +- 3*" + fmt(final_se) + ", " + fmt(secs) + "s"
                    : "bound violated at t=" + std::to_string(first_violation));
}

// --------------------------------------------------------------------------
// 4 + 5. variance-threshold dichotomy and the noise-scale direction

struct OrderingRuns {
    stability::MixtureProblem problem;
    stability::TrajectoryStats uniform;
    stability::TrajectoryStats curriculum;
    std::uint64_t steps = 100;
    double radius_sq = 0.2;
    double sigma_stab = 0.0;
};

OrderingRuns run_ordering_experiment() {
    OrderingRuns runs;
    runs.problem = stability::make_mixture_problem(10, 1000, 0.5, 0.1, 10.0, 1.0, 777);

    const double eta = 0.1;
    runs.sigma_stab = stability::stability_threshold(std::sqrt(runs.radius_sq), 1.0, eta);

    stability::SgdRunConfig uniform;
    uniform.eta = eta;
    uniform.steps = runs.steps;
    uniform.replicates = 10000;
    uniform.seed = 20260809;
    uniform.theta0 = stability::initial_point(runs.problem, runs.radius_sq);
    uniform.sampling.kind = stability::SamplingKind::fixed_alpha;
    // easy share decays to zero over the first 60% of training
    uniform.sampling.alpha_table = stability::linear_alpha_table(runs.steps, 0.5, 0.0, 0.6);

    stability::SgdRunConfig curriculum = uniform;
    curriculum.seed = 20260810;
    curriculum.sampling = {};
    curriculum.sampling.kind = stability::SamplingKind::curriculum;
    curriculum.sampling.pacing = curricula::curriculum::PacingKind::quantile;

    runs.uniform = stability::run_sgd(runs.problem, uniform);
    runs.curriculum = stability::run_sgd(runs.problem, curriculum);
    return runs;
}

void criteria_4_and_5() {
    const auto start = std::chrono::steady_clock::now();
    const OrderingRuns runs = run_ordering_experiment();
    const std::uint64_t steps = runs.steps;
    const std::uint64_t window_begin = steps - steps / 5;

    // sigma_stab^2(R) must sit strictly between the two noise components
    const bool setup_ok = runs.problem.sigma_easy_sq < runs.sigma_stab &&
                          runs.sigma_stab < runs.problem.sigma_hard_sq;

    // part (2): uniform sampling's late-window radius exceeds R^2
    double late_mean = 0.0;
    double late_se = 0.0;
    std::uint64_t count = 0;
    for (std::uint64_t t = window_begin; t <= steps; ++t) {
        late_mean += runs.uniform.mean_sq_dist[t];
        late_se += runs.uniform.mean_sq_se[t];
        ++count;
    }
    late_mean /= static_cast<double>(count);
    late_se /= static_cast<double>(count);
    const bool uniform_exceeds = late_mean - 3.0 * late_se > runs.radius_sq;

    // part (3): within the measured stability horizon the curriculum stays
    // inside the target radius
    const auto t_stab =
        stability::first_sigma_crossing(runs.curriculum.sigma_sq, runs.sigma_stab);
    bool curriculum_ok = t_stab.has_value();
    const std::uint64_t horizon = t_stab.value_or(steps);
    for (std::uint64_t t = 0; curriculum_ok && t <= horizon; ++t) {
        if (runs.curriculum.mean_sq_dist[t] >
            runs.radius_sq + 3.0 * runs.curriculum.mean_sq_se[t]) {
            curriculum_ok = false;
        }
    }

    const double secs = elapsed_s(start);
    report(4, setup_ok && uniform_exceeds && curriculum_ok && secs < 120.0,
           "uniform exceeds the stability radius; paced run stays inside through T_stab",
           "uniform late radius=" + fmt(late_mean) + " > R^2=" + fmt(runs.radius_sq) +
               ", T_stab=" + std::to_string(horizon) + ", " + fmt(secs) + "s");

    // criterion 5: late-window mean noise scale, non-overlapping 3*SE bands
    double gns_u = 0.0;
    double gns_u_var = 0.0;
    double gns_c = 0.0;
    double gns_c_var = 0.0;
    bool unsaturated = true;
    for (std::uint64_t s = window_begin; s < steps; ++s) {
        unsaturated = unsaturated && runs.uniform.gns_saturated[s] == 0 &&
                      runs.curriculum.gns_saturated[s] == 0;
        gns_u += runs.uniform.gns_hat[s];
        gns_u_var += runs.uniform.gns_hat_se[s] * runs.uniform.gns_hat_se[s];
        gns_c += runs.curriculum.gns_hat[s];
        gns_c_var += runs.curriculum.gns_hat_se[s] * runs.curriculum.gns_hat_se[s];
    }
    const double n = static_cast<double>(steps - window_begin);
    gns_u /= n;
    gns_c /= n;
    const double se_u = std::sqrt(gns_u_var) / n;
    const double se_c = std::sqrt(gns_c_var) / n;
    const bool separated = unsaturated && (gns_u - 3.0 * se_u) > (gns_c + 3.0 * se_c);
    report(5, separated && gns_u > gns_c,
           "late-window noise scale: uniform strictly above curriculum (3*SE bands)",
           "uniform=" + fmt(gns_u) + "+-3*" + fmt(se_u) + ", curriculum=" + fmt(gns_c) +
               "+-3*" + fmt(se_c));
}

// --------------------------------------------------------------------------
// 6. estimator consistency

void criterion_6() {
    // d=2 coordinates of unit variance around G with ||G||^2 = 1: the exact
    // noise scale is tr(Sigma)/||G||^2 = 2.
    std::mt19937_64 rng{424242};
    const std::vector<double> true_grad = {1.0, 0.0};
    const double sigma_sq = 1.0;
    const std::size_t n = 10000;

    auto make_batches = [&](int batch_size) {
        std::normal_distribution<double> normal(0.0, std::sqrt(sigma_sq / batch_size));
        std::vector<gns::GradientBatchStats> batches;
        batches.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> g = true_grad;
            for (double& v : g) {
                v += normal(rng);
            }
            batches.push_back(gns::GradientBatchStats::from_gradient(batch_size, std::move(g)));
        }
        return batches;
    };

    const auto small = make_batches(1);
    const auto big = make_batches(10);
    const gns::NoiseScale estimate = gns::estimate_gns(small, big);
    const double exact = gns::gns_exact(2.0, true_grad).value;
    const double rel = std::abs(estimate.value - exact) / exact;
    report(6, !estimate.negative_flagged && rel < 0.05,
           "two-batch estimate within 5% of the exact noise scale",
           "estimate=" + fmt(estimate.value) + ", exact=" + fmt(exact) +
               ", rel err=" + fmt(rel));
}

// --------------------------------------------------------------------------
// 7. HMM oracles

void criterion_7() {
    const auto start = std::chrono::steady_clock::now();

    // (a) forward/Viterbi vs enumeration, 100 seeded instances, K<=3, T<=5
    std::mt19937_64 rng{20240918};
    std::uniform_int_distribution<int> pick_k(1, 3);
    std::uniform_int_distribution<int> pick_t(1, 5);
    bool oracle_ok = true;
    for (int inst = 0; inst < 100 && oracle_ok; ++inst) {
        const hmm::HmmModel model = hmm_oracles::random_model(pick_k(rng), 2, rng);
        const Eigen::MatrixXd seq = hmm_oracles::random_sequence(pick_t(rng), 2, rng);
        oracle_ok = std::abs(hmm::forward_loglik(model, seq) -
                             hmm_oracles::enumerate_loglik(model, seq)) < 1e-10 &&
                    hmm::viterbi(model, seq) == hmm_oracles::enumerate_viterbi(model, seq);
    }

    // (b) EM monotonicity on every fit below (slack 1e-8)
    bool monotone_ok = true;
    auto check_trace = [&](const hmm::FitResult& fit) {
        for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
            if (fit.loglik_trace[i] < fit.loglik_trace[i - 1] - 1e-8) {
                monotone_ok = false;
            }
        }
    };

    // (c) planted two-state recovery within 0.05 entrywise up to relabeling
    hmm::HmmModel truth;
    truth.states = 2;
    truth.initial = Eigen::Vector2d(1.0, 0.0);
    truth.transition = Eigen::MatrixXd(2, 2);
    truth.transition << 0.9, 0.1, 0.2, 0.8;
    truth.means = Eigen::MatrixXd(2, 2);
    truth.means << -2, -2, 2, 2;
    truth.variances = Eigen::MatrixXd::Ones(2, 2) * 0.5;

    std::mt19937_64 gen_rng{555};
    std::vector<hmm::Sequence> planted(1);
    planted[0].label = "planted";
    planted[0].values = hmm_oracles::sample_from(truth, 10000, gen_rng);
    const hmm::ObservationSet obs = hmm::observation_set(std::move(planted));
    const hmm::FitResult fit = hmm::baum_welch(obs, 2, 8);
    check_trace(fit);
    const bool swapped = fit.model.means(0, 0) > fit.model.means(1, 0);
    bool recovery_ok = true;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const int ri = swapped ? 1 - i : i;
            const int rj = swapped ? 1 - j : j;
            if (std::abs(fit.model.transition(ri, rj) - truth.transition(i, j)) >= 0.05) {
                recovery_ok = false;
            }
        }
    }

    // (d) BIC selects the planted K=3 in at least 6 of 10 seeded trials
    hmm::HmmModel truth3;
    truth3.states = 3;
    truth3.initial = Eigen::Vector3d(1.0, 0.0, 0.0);
    truth3.transition = Eigen::MatrixXd(3, 3);
    truth3.transition << 0.90, 0.08, 0.02, 0.05, 0.90, 0.05, 0.02, 0.08, 0.90;
    truth3.means = Eigen::MatrixXd(3, 2);
    truth3.means << -4, 0, 0, 4, 4, -4;
    truth3.variances = Eigen::MatrixXd::Ones(3, 2) * 0.5;

    const std::vector<int> range = {1, 2, 3, 4};
    int correct = 0;
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        std::mt19937_64 trial_rng{9000 + trial};
        std::vector<hmm::Sequence> seq(1);
        seq[0].label = "r";
        seq[0].values = hmm_oracles::sample_from(truth3, 400, trial_rng);
        const hmm::ObservationSet trial_obs = hmm::observation_set(std::move(seq));
        const std::vector<std::uint64_t> seeds = {3 * trial, 3 * trial + 1, 3 * trial + 2};
        for (std::uint64_t s : seeds) {
            check_trace(hmm::baum_welch(trial_obs, 3, s));
        }
        if (hmm::bic_select(trial_obs, range, seeds).selected_states == 3) {
            ++correct;
        }
    }

    const double secs = elapsed_s(start);
    report(7, oracle_ok && monotone_ok && recovery_ok && correct >= 6 && secs < 120.0,
           "HMM forward/Viterbi oracles, EM monotonicity, planted recovery, BIC",
           "enumeration=" + std::string(oracle_ok ? "ok" : "MISMATCH") +
               ", monotone=" + (monotone_ok ? "ok" : "VIOLATED") + ", recovery=" +
               (recovery_ok ? "ok" : "OFF") + ", BIC " + std::to_string(correct) + "/10, " +
               fmt(secs) + "s");
}

// --------------------------------------------------------------------------
// 8. checkpoint metrics closed forms and archive round trip

void criterion_8() {
    spectral::MatrixArchive archive;
    archive.entries.push_back({"w", spectral::MatrixRole::weight, 2, 2, {1, 0, 0, 1}});
    archive.entries.push_back({"b", spectral::MatrixRole::bias, 2, 1, {0, 0}});

    const spectral::CheckpointMetrics m = spectral::checkpoint_metrics(archive);
    const bool metrics_ok = m.l1_avg == 2.0 && m.l2_avg == std::sqrt(2.0) &&
                            m.l1_l2_ratio == 2.0 / std::sqrt(2.0) && m.weight_mean == 0.5 &&
                            m.weight_median == 0.5 && m.weight_var == 0.25 &&
                            m.bias_mean == 0.0 && m.bias_median == 0.0 && m.bias_var == 0.0 &&
                            m.trace_avg == 2.0 && m.spectral_avg == 1.0 &&
                            m.trace_spectral_ratio == 2.0 && m.singular_mean == 1.0 &&
                            m.singular_var == 0.0;

    // round trip with awkward payloads: signed zero, denormal, NaN
    spectral::MatrixArchive tricky;
    tricky.entries.push_back({"w", spectral::MatrixRole::weight, 2, 2,
                              {0.1 + 0.2, -0.0, 5e-324,
                               std::numeric_limits<double>::quiet_NaN()}});
    const auto dir = std::filesystem::temp_directory_path() / "curricula_acceptance_archive";
    std::filesystem::remove_all(dir);
    spectral::write_archive(tricky, dir);
    const spectral::MatrixArchive loaded = spectral::read_archive(dir);
    bool roundtrip_ok = loaded.entries.size() == 1;
    for (std::size_t i = 0; roundtrip_ok && i < 4; ++i) {
        roundtrip_ok = std::memcmp(&loaded.entries[0].values[i], &tricky.entries[0].values[i],
                                   sizeof(double)) == 0;
    }

    report(8, metrics_ok && roundtrip_ok,
           "identity archive reproduces the closed-form metrics; bit-exact round trip",
           std::string("metrics=") + (metrics_ok ? "exact" : "OFF") + ", roundtrip=" +
               (roundtrip_ok ? "bit-identical" : "CHANGED"));
}

// --------------------------------------------------------------------------
// 9. packing conservation

void criterion_9() {
    std::mt19937_64 rng{20250101};
    std::uniform_int_distribution<std::size_t> length(1, 5000);
    bool ok = true;
    std::uint64_t total_samples = 0;
    for (int trial = 0; trial < 2 && ok; ++trial) {
        std::vector<corpus::Document> docs;
        std::unordered_map<std::string, std::uint64_t> doc_lengths;
        std::uint64_t total_tokens = 0;
        for (int i = 0; i < 1000; ++i) {
            const std::size_t n = length(rng);
            std::ostringstream text;
            for (std::size_t w = 0; w < n; ++w) {
                text << (w > 0 ? " " : "") << 'w' << w % 1021;
            }
            docs.push_back({"doc" + std::to_string(i), text.str()});
            doc_lengths[docs.back().id] = n;
            total_tokens += n;
        }
        corpus::WhitespaceTokenizer tok;
        const corpus::PackedStream packed = corpus::pack_stream(docs, tok, 2048);
        total_samples += packed.samples.size();

        std::uint64_t packed_tokens = 0;
        for (const corpus::TokenSample& sample : packed.samples) {
            ok = ok && sample.tokens.size() == 2048;
            std::uint64_t span_total = 0;
            for (const corpus::TokenSpan& span : sample.spans) {
                ok = ok && span.begin < span.end && span.end <= doc_lengths.at(span.doc_id);
                span_total += span.end - span.begin;
            }
            ok = ok && span_total == 2048;
            packed_tokens += sample.tokens.size();
        }
        ok = ok && packed_tokens + packed.dropped_tokens == total_tokens;
    }
    report(9, ok, "randomized 1000-document corpora conserve tokens with valid spans",
           std::to_string(total_samples) + " samples across trials");
}

// --------------------------------------------------------------------------
// 10. score-loss correlation surrogate

void criterion_10() {
    // Graded vocabulary: word g<k> gets AoA 3 + 0.1k years, frequency
    // decaying in k, and every third word is a verb. Sample difficulty is the
    // grade mix, so all three indices move with it.
    const int n_grades = 100;
    std::vector<std::pair<std::string, double>> aoa_entries;
    std::vector<std::pair<std::string, double>> zipf_entries;
    std::vector<std::pair<std::string, double>> verb_entries;
    std::vector<std::string> vocab;
    for (int k = 0; k < n_grades; ++k) {
        const std::string word = "g" + std::to_string(k);
        vocab.push_back(word);
        aoa_entries.emplace_back(word, 3.0 + 0.1 * k);
        zipf_entries.emplace_back(word, scoring::zipf_from_fpmw(5000.0 * std::exp(-0.05 * k)));
        if (k % 3 == 0) {
            verb_entries.emplace_back(word, 0.0);
        }
    }
    const auto aoa = scoring::Lexicon::from_entries(scoring::LexiconKind::aoa, aoa_entries);
    const auto zipf =
        scoring::Lexicon::from_entries(scoring::LexiconKind::zipf_frequency, zipf_entries);
    const auto verbs =
        scoring::Lexicon::from_entries(scoring::LexiconKind::verb_set, verb_entries);

    // Build a corpus whose documents drift from low to high grades, pack it,
    // and score the packed samples end to end.
    std::mt19937_64 rng{31337};
    std::vector<corpus::Document> docs;
    const int n_docs = 200;
    const int words_per_doc = 64;
    for (int i = 0; i < n_docs; ++i) {
        const double difficulty = static_cast<double>(i) / (n_docs - 1);
        std::ostringstream text;
        std::normal_distribution<double> grade(difficulty * (n_grades - 1), 6.0);
        for (int w = 0; w < words_per_doc; ++w) {
            int k = static_cast<int>(std::lround(grade(rng)));
            k = std::clamp(k, 0, n_grades - 1);
            text << (w > 0 ? " " : "") << vocab[static_cast<std::size_t>(k)];
        }
        docs.push_back({"doc" + std::to_string(i), text.str()});
    }
    corpus::WhitespaceTokenizer tok;
    const corpus::PackedStream packed = corpus::pack_stream(docs, tok, 64);

    bool ok = packed.samples.size() == static_cast<std::size_t>(n_docs);
    std::ostringstream detail;
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::vector<std::pair<scoring::IndexKind, const scoring::Lexicon*>> indices = {
        {scoring::IndexKind::aoa, &aoa},
        {scoring::IndexKind::zipf_frequency, &zipf},
        {scoring::IndexKind::verb_variation, &verbs}};
    for (const auto& [kind, lexicon] : indices) {
        std::vector<double> scores;
        for (const corpus::TokenSample& sample : packed.samples) {
            const auto words = corpus::detokenize(sample, tok);
            scores.push_back(scoring::score_words(words, kind, *lexicon));
        }
        // per-index loss: monotone in the score plus noise at 30% of spread
        double lo = scores[0];
        double hi = scores[0];
        for (double s : scores) {
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        std::vector<double> losses;
        for (double s : scores) {
            losses.push_back(s + 0.3 * (hi - lo) * noise(rng));
        }
        const double r = scoring::pearson(scores, losses);
        ok = ok && r > 0.5;
        detail << scoring::to_string(kind) << "=" << fmt(r) << " ";
    }
    report(10, ok, "synthetic surrogate: scores correlate with monotone-in-score loss",
           detail.str() +
               "| full-corpus correlations require real pretraining runs, out of scope here");
}

} // namespace

int main() {
    try {
        criterion_1();
        criterion_2();
        criterion_3();
        criteria_4_and_5();
        criterion_6();
        criterion_7();
        criterion_8();
        criterion_9();
        criterion_10();
    } catch (const std::exception& e) {
        std::cout << "[FAIL] acceptance suite aborted: " << e.what() << "\n";
        return 1;
    }
    std::cout << (g_failures == 0 ? "acceptance: all criteria passed\n"
                                  : "acceptance: " + std::to_string(g_failures) +
                                        " criterion(s) failed\n");
    return g_failures == 0 ? 0 : 1;
}
