#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "curricula/errors.hpp"
#include "curricula/hmm.hpp"
#include "curricula/util.hpp"

#include "hmm_oracles.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

using namespace curricula;
using namespace curricula::hmm;
using hmm_oracles::enumerate_loglik;
using hmm_oracles::enumerate_viterbi;
using hmm_oracles::log_gauss;
using hmm_oracles::random_model;
using hmm_oracles::random_sequence;
using hmm_oracles::sample_from;

TEST_CASE("zscore pools statistics across runs") {
    std::vector<Sequence> runs(2);
    runs[0].label = "a";
    runs[0].values = Eigen::MatrixXd(2, 1);
    runs[0].values << 0, 2;
    runs[1].label = "b";
    runs[1].values = Eigen::MatrixXd(2, 1);
    runs[1].values << 4, 6;

    const ObservationSet obs = zscore(std::move(runs));
    CHECK(obs.mean(0) == doctest::Approx(3.0));
    CHECK(obs.stddev(0) == doctest::Approx(std::sqrt(5.0)));
    CHECK(obs.sequences[0].values(0, 0) == doctest::Approx(-3.0 / std::sqrt(5.0)));
    CHECK(obs.sequences[0].values(1, 0) == doctest::Approx(-1.0 / std::sqrt(5.0)));
    CHECK(obs.sequences[1].values(0, 0) == doctest::Approx(1.0 / std::sqrt(5.0)));
    CHECK(obs.sequences[1].values(1, 0) == doctest::Approx(3.0 / std::sqrt(5.0)));
    CHECK(obs.warnings.empty());
}

TEST_CASE("zscore output has pooled mean 0 and variance 1") {
    std::mt19937_64 rng{3};
    std::vector<Sequence> runs;
    for (int r = 0; r < 3; ++r) {
        Sequence seq;
        seq.label = "run" + std::to_string(r);
        seq.values = random_sequence(20 + r, 4, rng);
        runs.push_back(std::move(seq));
    }
    const ObservationSet obs = zscore(std::move(runs));
    const double n = static_cast<double>(obs.total_rows());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(4);
    for (const Sequence& seq : obs.sequences) {
        mean += seq.values.colwise().sum().transpose();
        sq += seq.values.array().square().colwise().sum().matrix().transpose();
    }
    mean /= n;
    for (int d = 0; d < 4; ++d) {
        CHECK(mean(d) == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(sq(d) / n - mean(d) * mean(d) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("zscore maps constant dimensions to zero with a warning") {
    std::vector<Sequence> runs(1);
    runs[0].label = "a";
    runs[0].values = Eigen::MatrixXd(3, 2);
    runs[0].values << 5, 1, 5, 2, 5, 3;
    const ObservationSet obs = zscore(std::move(runs));
    CHECK(obs.sequences[0].values.col(0).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(obs.warnings.size() == 1);
    CHECK(obs.warnings[0].find("dimension 0") != std::string::npos);

    CHECK_THROWS_AS(zscore(std::vector<Sequence>{}), invalid_argument_error);
}

TEST_CASE("single-state forward log-likelihood is the sum of log densities") {
    std::mt19937_64 rng{5};
    HmmModel model = random_model(1, 3, rng);
    const Eigen::MatrixXd seq = random_sequence(7, 3, rng);
    double expected = 0.0;
    for (int t = 0; t < 7; ++t) {
        for (int d = 0; d < 3; ++d) {
            expected += log_gauss(seq(t, d), model.means(0, d), model.variances(0, d));
        }
    }
    CHECK(forward_loglik(model, seq) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("forward and viterbi match path enumeration on 100 random instances") {
    std::mt19937_64 rng{20240918};
    std::uniform_int_distribution<int> pick_k(1, 3);
    std::uniform_int_distribution<int> pick_t(1, 5);
    for (int inst = 0; inst < 100; ++inst) {
        const int K = pick_k(rng);
        const int T = pick_t(rng);
        const HmmModel model = random_model(K, 2, rng);
        const Eigen::MatrixXd seq = random_sequence(T, 2, rng);

        CHECK(forward_loglik(model, seq) ==
              doctest::Approx(enumerate_loglik(model, seq)).epsilon(1e-10));
        CHECK(viterbi(model, seq) == enumerate_viterbi(model, seq));
    }
}

TEST_CASE("small toy models match enumeration exactly") {
    std::mt19937_64 rng{20240920};
    // K=2, T=3: forward log-likelihood equals the sum over all 8 paths
    {
        const HmmModel model = random_model(2, 2, rng);
        const Eigen::MatrixXd seq = random_sequence(3, 2, rng);
        CHECK(forward_loglik(model, seq) ==
              doctest::Approx(enumerate_loglik(model, seq)).epsilon(1e-10));
    }
    // K=2, T=4: Viterbi equals the argmax over all 16 paths
    {
        const HmmModel model = random_model(2, 2, rng);
        const Eigen::MatrixXd seq = random_sequence(4, 2, rng);
        CHECK(viterbi(model, seq) == enumerate_viterbi(model, seq));
    }
}

TEST_CASE("planted staircase decodes to a chain with no backward edges") {
    HmmModel chain;
    chain.states = 3;
    chain.initial = Eigen::Vector3d(1.0, 0.0, 0.0);
    chain.transition = Eigen::MatrixXd(3, 3);
    chain.transition << 0.9, 0.1, 0.0, 0.0, 0.9, 0.1, 0.0, 0.0, 1.0;
    chain.means = Eigen::MatrixXd(3, 2);
    chain.means << -6, -6, 0, 0, 6, 6;
    chain.variances = Eigen::MatrixXd::Ones(3, 2) * 0.25;

    std::mt19937_64 rng{20240921};
    std::vector<Sequence> runs(2);
    runs[0].label = "a";
    runs[0].values = sample_from(chain, 60, rng);
    runs[1].label = "b";
    runs[1].values = sample_from(chain, 40, rng);
    const TrainingMap map = training_map(chain, observation_set(std::move(runs)));

    for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            CHECK(map.transition_counts(i, j) == 0.0);
        }
    }
}

TEST_CASE("absorbing initial state reduces to single-state likelihood") {
    std::mt19937_64 rng{8};
    HmmModel model = random_model(2, 2, rng);
    model.initial << 1.0, 0.0;
    model.transition << 1.0, 0.0, 0.0, 1.0;
    const Eigen::MatrixXd seq = random_sequence(5, 2, rng);
    double expected = 0.0;
    for (int t = 0; t < 5; ++t) {
        for (int d = 0; d < 2; ++d) {
            expected += log_gauss(seq(t, d), model.means(0, d), model.variances(0, d));
        }
    }
    CHECK(forward_loglik(model, seq) == doctest::Approx(expected).epsilon(1e-10));
    const auto path = viterbi(model, seq);
    CHECK(std::all_of(path.begin(), path.end(), [](int s) { return s == 0; }));
}

TEST_CASE("viterbi follows a deterministic staircase chain") {
    HmmModel model;
    model.states = 3;
    model.initial = Eigen::Vector3d(1.0, 0.0, 0.0);
    model.transition = Eigen::MatrixXd(3, 3);
    model.transition << 0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 1.0;
    model.means = Eigen::MatrixXd(3, 1);
    model.means << -5, 0, 5;
    model.variances = Eigen::MatrixXd::Ones(3, 1);

    Eigen::MatrixXd seq(6, 1);
    seq << -5, -5, 0, 0, 5, 5;
    CHECK(viterbi(model, seq) == std::vector<int>{0, 0, 1, 1, 2, 2});
}

TEST_CASE("permuting model states permutes paths and keeps the likelihood") {
    std::mt19937_64 rng{12};
    const HmmModel model = random_model(3, 2, rng);
    const Eigen::MatrixXd seq = random_sequence(6, 2, rng);

    const std::vector<int> perm = {2, 0, 1}; // new index of each old state
    HmmModel permuted;
    permuted.states = 3;
    permuted.initial.resize(3);
    permuted.transition.resize(3, 3);
    permuted.means.resize(3, 2);
    permuted.variances.resize(3, 2);
    for (int i = 0; i < 3; ++i) {
        permuted.initial(perm[i]) = model.initial(i);
        permuted.means.row(perm[i]) = model.means.row(i);
        permuted.variances.row(perm[i]) = model.variances.row(i);
        for (int j = 0; j < 3; ++j) {
            permuted.transition(perm[i], perm[j]) = model.transition(i, j);
        }
    }

    CHECK(forward_loglik(permuted, seq) ==
          doctest::Approx(forward_loglik(model, seq)).epsilon(1e-10));
    const auto base = viterbi(model, seq);
    const auto moved = viterbi(permuted, seq);
    for (std::size_t t = 0; t < base.size(); ++t) {
        CHECK(moved[t] == perm[static_cast<std::size_t>(base[t])]);
    }
}

TEST_CASE("EM log-likelihood is non-decreasing") {
    std::mt19937_64 rng{21};
    std::vector<Sequence> runs;
    for (int r = 0; r < 2; ++r) {
        Sequence seq;
        seq.label = "r" + std::to_string(r);
        seq.values = random_sequence(40, 3, rng);
        runs.push_back(std::move(seq));
    }
    const ObservationSet obs = observation_set(std::move(runs));
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const FitResult fit = baum_welch(obs, 3, seed);
        for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
            CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-8);
        }
    }
}

TEST_CASE("single-state EM recovers pooled mean and variance exactly") {
    std::mt19937_64 rng{31};
    Sequence seq;
    seq.label = "r";
    seq.values = random_sequence(50, 2, rng);
    const Eigen::MatrixXd values = seq.values;
    std::vector<Sequence> runs;
    runs.push_back(std::move(seq));
    const ObservationSet obs = observation_set(std::move(runs));
    const FitResult fit = baum_welch(obs, 1, 0);

    const Eigen::VectorXd mean = values.colwise().mean().transpose();
    for (int d = 0; d < 2; ++d) {
        const double var = (values.col(d).array() - mean(d)).square().mean();
        CHECK(fit.model.means(0, d) == doctest::Approx(mean(d)).epsilon(1e-12));
        CHECK(fit.model.variances(0, d) == doctest::Approx(var).epsilon(1e-12));
    }
    CHECK(fit.model.initial(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("EM keeps distributions stochastic after every iteration") {
    std::mt19937_64 rng{33};
    std::vector<Sequence> runs(1);
    runs[0].label = "r";
    runs[0].values = random_sequence(60, 2, rng);
    const ObservationSet obs = observation_set(std::move(runs));
    EmConfig config;
    for (int iters : {1, 2, 5, 17}) {
        config.max_iters = iters;
        const FitResult fit = baum_welch(obs, 3, 7, config);
        CHECK(std::abs(fit.model.initial.sum() - 1.0) < 1e-10);
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(fit.model.transition.row(i).sum() - 1.0) < 1e-10);
        }
        CHECK((fit.model.variances.array() >= 1e-6 - 1e-15).all());
    }
}

TEST_CASE("planted two-state chain is recovered within 0.05 entrywise") {
    HmmModel truth;
    truth.states = 2;
    truth.initial = Eigen::Vector2d(1.0, 0.0);
    truth.transition = Eigen::MatrixXd(2, 2);
    truth.transition << 0.9, 0.1, 0.2, 0.8;
    truth.means = Eigen::MatrixXd(2, 2);
    truth.means << -2, -2, 2, 2;
    truth.variances = Eigen::MatrixXd::Ones(2, 2) * 0.5;

    std::mt19937_64 rng{20240919};
    std::vector<Sequence> runs(1);
    runs[0].label = "r";
    runs[0].values = sample_from(truth, 10000, rng);
    const ObservationSet obs = observation_set(std::move(runs));
    const FitResult fit = baum_welch(obs, 2, 4);

    // resolve label switching by the sign of the first mean coordinate
    const bool swapped = fit.model.means(0, 0) > fit.model.means(1, 0);
    auto re = [&](int s) { return swapped ? 1 - s : s; };
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            CHECK(std::abs(fit.model.transition(re(i), re(j)) - truth.transition(i, j)) < 0.05);
        }
        for (int d = 0; d < 2; ++d) {
            CHECK(std::abs(fit.model.means(re(i), d) - truth.means(i, d)) < 0.1);
        }
    }
}

TEST_CASE("BIC selection") {
    SUBCASE("singleton range returns its element") {
        std::mt19937_64 rng{41};
        std::vector<Sequence> runs(1);
        runs[0].label = "r";
        runs[0].values = random_sequence(30, 2, rng);
        const ObservationSet obs = observation_set(std::move(runs));
        const std::vector<int> range = {1};
        const std::vector<std::uint64_t> seeds = {1, 2};
        const BicResult result = bic_select(obs, range, seeds);
        CHECK(result.selected_states == 1);
        REQUIRE(result.table.size() == 1);
        CHECK(result.table[0].param_count == 0 + 0 + 2 * 1 * 2);
    }
    SUBCASE("planted three-state data selects K=3 in most trials") {
        HmmModel truth;
        truth.states = 3;
        truth.initial = Eigen::Vector3d(1.0, 0.0, 0.0);
        truth.transition = Eigen::MatrixXd(3, 3);
        truth.transition << 0.90, 0.08, 0.02, 0.05, 0.90, 0.05, 0.02, 0.08, 0.90;
        truth.means = Eigen::MatrixXd(3, 2);
        truth.means << -4, 0, 0, 4, 4, -4;
        truth.variances = Eigen::MatrixXd::Ones(3, 2) * 0.5;

        const std::vector<int> range = {1, 2, 3, 4};
        int correct = 0;
        for (std::uint64_t trial = 0; trial < 10; ++trial) {
            std::mt19937_64 rng{1000 + trial};
            std::vector<Sequence> runs(1);
            runs[0].label = "r";
            runs[0].values = sample_from(truth, 400, rng);
            const ObservationSet obs = observation_set(std::move(runs));
            const std::vector<std::uint64_t> seeds = {3 * trial, 3 * trial + 1, 3 * trial + 2};
            if (bic_select(obs, range, seeds).selected_states == 3) {
                ++correct;
            }
        }
        CHECK(correct >= 6);
    }
}

TEST_CASE("training map relabels by first visit and keeps counts consistent") {
    HmmModel model;
    model.states = 3;
    model.initial = Eigen::Vector3d::Constant(1.0 / 3.0);
    model.transition = Eigen::MatrixXd(3, 3);
    model.transition << 0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8;
    model.means = Eigen::MatrixXd(3, 1);
    model.means << -6, 0, 6;
    model.variances = Eigen::MatrixXd::Ones(3, 1);

    std::vector<Sequence> runs(2);
    runs[0].label = "long";
    runs[0].values = Eigen::MatrixXd(6, 1);
    runs[0].values << 0, 0, 6, 6, -6, -6; // visits 1, 2, 0
    runs[1].label = "short";
    runs[1].values = Eigen::MatrixXd(3, 1);
    runs[1].values << 6, 6, 0;
    const ObservationSet obs = observation_set(std::move(runs));

    const TrainingMap map = training_map(model, obs);
    // first-visit order of the long run: 1 -> 0, 2 -> 1, 0 -> 2
    CHECK(map.relabel == std::vector<int>{2, 0, 1});
    CHECK(map.paths[0] == std::vector<int>{0, 0, 1, 1, 2, 2});
    CHECK(map.paths[1] == std::vector<int>{1, 1, 0});

    std::uint64_t total = 0;
    for (std::uint64_t c : map.dwell_counts) {
        total += c;
    }
    CHECK(total == 9);

    CHECK(map.transition_counts.sum() == doctest::Approx(5 + 2));
    CHECK(map.transition_counts(0, 1) == doctest::Approx(1.0));
    CHECK(map.transition_counts(1, 0) == doctest::Approx(1.0));
    CHECK(map.transition_counts(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("single run single state maps to one self-looping node") {
    HmmModel model;
    model.states = 1;
    model.initial = Eigen::VectorXd::Ones(1);
    model.transition = Eigen::MatrixXd::Ones(1, 1);
    model.means = Eigen::MatrixXd::Zero(1, 2);
    model.variances = Eigen::MatrixXd::Ones(1, 2);

    std::mt19937_64 rng{55};
    std::vector<Sequence> runs(1);
    runs[0].label = "r";
    runs[0].values = random_sequence(5, 2, rng);
    const TrainingMap map = training_map(model, observation_set(std::move(runs)));
    CHECK(map.dwell_counts == std::vector<std::uint64_t>{5});
    CHECK(map.transition_counts(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("identical runs decode to identical paths") {
    std::mt19937_64 rng{60};
    const HmmModel model = random_model(2, 2, rng);
    const Eigen::MatrixXd values = random_sequence(12, 2, rng);
    std::vector<Sequence> runs(2);
    runs[0].label = "a";
    runs[0].values = values;
    runs[1].label = "b";
    runs[1].values = values;
    const TrainingMap map = training_map(model, observation_set(std::move(runs)));
    CHECK(map.paths[0] == map.paths[1]);
}

TEST_CASE("model JSON round trip preserves parameters and normalization") {
    std::mt19937_64 rng{70};
    const HmmModel model = random_model(3, 4, rng);
    std::vector<Sequence> runs(1);
    runs[0].label = "r";
    runs[0].values = random_sequence(10, 4, rng);
    const ObservationSet obs = zscore(std::move(runs));

    const auto dir = std::filesystem::temp_directory_path() / "curricula_hmm";
    std::filesystem::create_directories(dir);
    write_model_json(dir / "model.json", model, obs);
    const LoadedModel loaded = read_model_json(dir / "model.json");

    CHECK(loaded.model.states == model.states);
    CHECK((loaded.model.transition - model.transition).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.model.means - model.means).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.normalization_mean - obs.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("metrics CSV sequences carry step labels and reject gaps") {
    const auto dir = std::filesystem::temp_directory_path() / "curricula_hmm";
    std::filesystem::create_directories(dir);
    util::write_text_file(dir / "runA.csv", "step,m1,m2\n0,1.5,2.5\n1000,1.25,2.25\n");
    const Sequence seq = read_metrics_csv_sequence(dir / "runA.csv");
    CHECK(seq.label == "runA");
    CHECK(seq.steps == std::vector<std::uint64_t>{0, 1000});
    CHECK(seq.values(1, 1) == 2.25);

    util::write_text_file(dir / "gap.csv", "step,m1,m2\n0,1.5,\n");
    CHECK_THROWS_AS(read_metrics_csv_sequence(dir / "gap.csv"), invalid_argument_error);
}

TEST_CASE("non-finite observations are rejected") {
    std::mt19937_64 rng{80};
    const HmmModel model = random_model(2, 2, rng);
    Eigen::MatrixXd seq = random_sequence(4, 2, rng);
    seq(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward_loglik(model, seq), invalid_argument_error);
}
