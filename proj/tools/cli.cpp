#include "cli.hpp"

#include "curricula/corpus.hpp"
#include "curricula/curriculum.hpp"
#include "curricula/errors.hpp"
#include "curricula/grad_noise.hpp"
#include "curricula/hmm.hpp"
#include "curricula/scoring.hpp"
#include "curricula/spectral.hpp"
#include "curricula/stability.hpp"
#include "curricula/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace curricula::cli {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 1234;

json load_config(const std::string& path) {
    if (path.empty()) {
        return json::object();
    }
    json cfg = json::parse(util::read_text_file(path), nullptr, false);
    if (cfg.is_discarded() || !cfg.is_object()) {
        throw corrupt_archive_error("config file " + path + " is not a JSON object");
    }
    return cfg;
}

// --config values fill in options the user did not pass explicitly.
template <typename T>
void merge_option(const CLI::App& app, const json& cfg, const std::string& flag,
                  const char* key, T& target) {
    const CLI::Option* opt = app.get_option_no_throw(flag);
    if (opt != nullptr && opt->count() > 0) {
        return;
    }
    if (cfg.contains(key)) {
        target = cfg.at(key).get<T>();
    }
}

std::uint64_t resolve_seed(const CLI::App& app, const json& cfg,
                           std::uint64_t flag_value) {
    const CLI::Option* opt = app.get_option_no_throw("--seed");
    if (opt != nullptr && opt->count() > 0) {
        return flag_value;
    }
    if (cfg.contains("seed")) {
        return cfg.at("seed").get<std::uint64_t>();
    }
    if (const char* env = std::getenv("CURRICULA_SEED")) {
        return util::parse_u64(env);
    }
    return flag_value;
}

void write_manifest(const fs::path& near, const std::string& subcommand, ordered_json config) {
    ordered_json manifest;
    manifest["subcommand"] = subcommand;
    manifest["config"] = std::move(config);
    const fs::path dir = fs::is_directory(near) ? near : near.parent_path();
    const fs::path target = (dir.empty() ? fs::path(".") : dir) / "run-manifest.json";
    util::write_text_file(target, manifest.dump(2) + "\n");
}

void ensure_parent(const fs::path& path) {
    const fs::path parent = path.parent_path();
    if (!parent.empty()) {
        fs::create_directories(parent);
    }
}

// ---------------------------------------------------------------------------
// pack

struct PackArgs {
    std::string config_path;
    std::string input;
    std::string out_dir;
    std::uint32_t sample_length = 2048;
};

int run_pack(const CLI::App& app, PackArgs& args) {
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--input", "input", args.input);
    merge_option(app, cfg, "--out", "out", args.out_dir);
    merge_option(app, cfg, "--sample-length", "sample_length", args.sample_length);
    if (args.input.empty() || args.out_dir.empty()) {
        throw invalid_argument_error("pack requires --input and --out");
    }

    const auto docs = corpus::read_jsonl(args.input);
    corpus::WhitespaceTokenizer tokenizer;
    const corpus::PackedStream packed = corpus::pack_stream(docs, tokenizer, args.sample_length);
    corpus::write_packed(packed, tokenizer, args.out_dir);

    write_manifest(args.out_dir, "pack",
                   {{"input", args.input},
                    {"out", args.out_dir},
                    {"sample_length", args.sample_length},
                    {"documents", docs.size()},
                    {"samples", packed.samples.size()},
                    {"dropped_tokens", packed.dropped_tokens}});
    std::cout << "packed " << packed.samples.size() << " samples ("
              << packed.dropped_tokens << " tokens dropped)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
    std::string config_path;
    std::string packed_dir;
    std::string index = "aoa";
    std::string lexicon_path;
    bool fpmw = false;
    double default_value = 0.0;
    bool default_value_set = false;
    std::string out;
};

int run_score(const CLI::App& app, ScoreArgs& args) {
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--packed", "packed", args.packed_dir);
    merge_option(app, cfg, "--index", "index", args.index);
    merge_option(app, cfg, "--lexicon", "lexicon", args.lexicon_path);
    merge_option(app, cfg, "--fpmw", "fpmw", args.fpmw);
    if (const CLI::Option* opt = app.get_option_no_throw("--default-value");
        opt != nullptr && opt->count() > 0) {
        args.default_value_set = true;
    } else if (cfg.contains("default_value")) {
        args.default_value = cfg.at("default_value").get<double>();
        args.default_value_set = true;
    }
    merge_option(app, cfg, "--out", "out", args.out);
    if (args.packed_dir.empty() || args.lexicon_path.empty() || args.out.empty()) {
        throw invalid_argument_error("score requires --packed, --lexicon and --out");
    }

    const scoring::IndexKind kind = scoring::index_kind_from_string(args.index);
    scoring::LexiconKind lex_kind = scoring::LexiconKind::verb_set;
    if (kind == scoring::IndexKind::aoa) {
        lex_kind = scoring::LexiconKind::aoa;
    } else if (kind == scoring::IndexKind::zipf_frequency) {
        lex_kind = scoring::LexiconKind::zipf_frequency;
    }
    std::optional<double> default_value;
    if (args.default_value_set) {
        default_value = args.default_value;
    }
    scoring::Lexicon lexicon = scoring::Lexicon::load_tsv(args.lexicon_path, lex_kind,
                                                          default_value);
    if (args.fpmw) {
        if (lex_kind != scoring::LexiconKind::zipf_frequency) {
            throw invalid_argument_error("--fpmw applies only to the zipf_frequency index");
        }
        std::unordered_map<std::string, double> converted;
        converted.reserve(lexicon.entries.size());
        for (const auto& [word, value] : lexicon.entries) {
            converted.emplace(word, scoring::zipf_from_fpmw(value));
        }
        lexicon.entries = std::move(converted);
        if (!args.default_value_set) {
            double sum = 0.0;
            for (const auto& [word, value] : lexicon.entries) {
                sum += value;
            }
            lexicon.default_value = sum / static_cast<double>(lexicon.entries.size());
        }
    }

    const corpus::LoadedStream loaded = corpus::read_packed(args.packed_dir);
    std::vector<scoring::ScoredSample> scores;
    scores.reserve(loaded.stream.samples.size());
    for (const corpus::TokenSample& sample : loaded.stream.samples) {
        const auto words = corpus::detokenize(sample, loaded.tokenizer);
        scores.push_back(scoring::score_sample(sample.index, words, kind, lexicon));
    }
    ensure_parent(args.out);
    scoring::write_scores_csv(args.out, scores);

    write_manifest(args.out, "score",
                   {{"packed", args.packed_dir},
                    {"index", scoring::to_string(kind)},
                    {"lexicon", args.lexicon_path},
                    {"fpmw", args.fpmw},
                    {"default_value", lexicon.default_value},
                    {"out", args.out},
                    {"samples", scores.size()}});
    std::cout << "scored " << scores.size() << " samples under " << scoring::to_string(kind)
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// order

struct OrderArgs {
    std::string config_path;
    std::string scores_path;
    std::string mode = "ascending";
    std::uint64_t seed = kDefaultSeed;
    std::string out;
};

int run_order(const CLI::App& app, OrderArgs& args) {
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--scores", "scores", args.scores_path);
    merge_option(app, cfg, "--mode", "mode", args.mode);
    merge_option(app, cfg, "--out", "out", args.out);
    args.seed = resolve_seed(app, cfg, args.seed);
    if (args.scores_path.empty() || args.out.empty()) {
        throw invalid_argument_error("order requires --scores and --out");
    }

    curriculum::OrderMode mode;
    if (args.mode == "ascending") {
        mode = curriculum::OrderMode::ascending;
    } else if (args.mode == "random") {
        mode = curriculum::OrderMode::random;
    } else {
        throw invalid_argument_error("unknown ordering mode '" + args.mode + "'");
    }

    const auto scores = scoring::read_scores_csv(args.scores_path);
    const curriculum::CurriculumOrder order = curriculum::order_samples(scores, mode, args.seed);
    ensure_parent(args.out);
    curriculum::write_order_csv(args.out, order, scores);

    write_manifest(args.out, "order",
                   {{"scores", args.scores_path},
                    {"mode", args.mode},
                    {"seed", args.seed},
                    {"out", args.out},
                    {"samples", order.permutation.size()}});
    std::cout << "ordered " << order.permutation.size() << " samples (" << args.mode << ")\n";
    return 0;
}

// ---------------------------------------------------------------------------
// schedule

struct ScheduleArgs {
    std::string config_path;
    std::string order_path;
    std::uint64_t steps = 0;
    std::uint64_t batch_size = 0;
    std::string out;
};

int run_schedule(const CLI::App& app, ScheduleArgs& args) {
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--order", "order", args.order_path);
    merge_option(app, cfg, "--steps", "steps", args.steps);
    merge_option(app, cfg, "--batch-size", "batch_size", args.batch_size);
    merge_option(app, cfg, "--out", "out", args.out);
    if (args.order_path.empty() || args.out.empty() || args.steps == 0 || args.batch_size == 0) {
        throw invalid_argument_error(
            "schedule requires --order, --steps, --batch-size and --out");
    }

    curriculum::CurriculumOrder order;
    for (const auto& row : util::read_csv(args.order_path)) {
        if (row.size() != 3) {
            throw corrupt_archive_error(args.order_path + ": expected 3 columns");
        }
        order.permutation.push_back(util::parse_u64(row[1]));
    }
    const curriculum::Schedule schedule =
        curriculum::emit_schedule(order, args.steps, args.batch_size);
    ensure_parent(args.out);
    curriculum::write_schedule_csv(args.out, schedule);

    write_manifest(args.out, "schedule",
                   {{"order", args.order_path},
                    {"steps", args.steps},
                    {"batch_size", args.batch_size},
                    {"out", args.out},
                    {"unused_samples", schedule.unused_samples}});
    std::cout << "emitted " << schedule.batches.size() << " batches, "
              << schedule.unused_samples << " samples unused\n";
    return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
    std::string config_path;
    std::vector<std::string> archives; // STEP:DIR
    std::string out;
    std::string head_out;
    std::uint64_t head_rank = 0;
    bool head_rank_set = false;
};

int run_diagnose(const CLI::App& app, DiagnoseArgs& args) {
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--archive", "archives", args.archives);
    merge_option(app, cfg, "--out", "out", args.out);
    merge_option(app, cfg, "--head-out", "head_out", args.head_out);
    if (const CLI::Option* opt = app.get_option_no_throw("--head-rank");
        (opt != nullptr && opt->count() > 0) || cfg.contains("head_rank")) {
        args.head_rank_set = true;
        merge_option(app, cfg, "--head-rank", "head_rank", args.head_rank);
    }
    if (args.archives.empty() || args.out.empty()) {
        throw invalid_argument_error("diagnose requires --archive STEP:DIR and --out");
    }

    std::vector<std::pair<std::uint64_t, spectral::CheckpointMetrics>> rows;
    std::ostringstream head_csv;
    head_csv << "step,singular_entropy";
    if (args.head_rank_set) {
        head_csv << ",rank_gap_r" << args.head_rank;
    }
    head_csv << '\n';

    for (const std::string& spec : args.archives) {
        const std::size_t colon = spec.find(':');
        if (colon == std::string::npos) {
            throw invalid_argument_error("--archive expects STEP:DIR, got '" + spec + "'");
        }
        const std::uint64_t step = util::parse_u64(spec.substr(0, colon));
        const fs::path dir = spec.substr(colon + 1);
        const spectral::MatrixArchive archive = spectral::read_archive(dir);
        rows.emplace_back(step, spectral::checkpoint_metrics(archive));

        if (!args.head_out.empty()) {
            const spectral::MatrixEntry* head = archive.lm_head();
            if (head == nullptr) {
                throw invalid_argument_error("archive " + dir.string() +
                                             " has no lm_head entry for --head-out");
            }
            const Eigen::MatrixXd m = head->matrix();
            head_csv << step << ',' << util::format_double(spectral::singular_entropy(m));
            if (args.head_rank_set) {
                head_csv << ',' << util::format_double(spectral::rank_gap(m, args.head_rank));
            }
            head_csv << '\n';
        }
    }

    ensure_parent(args.out);
    spectral::write_metrics_csv(args.out, rows);
    if (!args.head_out.empty()) {
        ensure_parent(args.head_out);
        util::write_text_file(args.head_out, head_csv.str());
    }

    write_manifest(args.out, "diagnose",
                   {{"archives", args.archives},
                    {"out", args.out},
                    {"head_out", args.head_out},
                    {"checkpoints", rows.size()}});
    std::cout << "diagnosed " << rows.size() << " checkpoints\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gns

struct GnsArgs {
    std::string config_path;
    std::string stats_path;
    std::string out;
};

gns::GradientBatchStats batch_from_json(const json& j) {
    gns::GradientBatchStats stats;
    stats.batch_size = j.at("batch_size").get<int>();
    if (j.contains("grad")) {
        return gns::GradientBatchStats::from_gradient(stats.batch_size,
                                                      j.at("grad").get<std::vector<double>>());
    }
    stats.squared_norm = j.at("squared_norm").get<double>();
    stats.validate();
    return stats;
}

int run_gns(const CLI::App& app, GnsArgs& args) {
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--stats", "stats", args.stats_path);
    merge_option(app, cfg, "--out", "out", args.out);
    if (args.stats_path.empty() || args.out.empty()) {
        throw invalid_argument_error("gns requires --stats and --out");
    }

    const json stats_json = json::parse(util::read_text_file(args.stats_path));
    std::vector<gns::GnsRow> rows;
    for (const json& run : stats_json.at("runs")) {
        gns::GnsRow row;
        row.step = run.value("step", static_cast<std::uint64_t>(rows.size()));
        if (run.contains("exact")) {
            const json& exact = run.at("exact");
            row.scale = gns::gns_exact(exact.at("trace_sigma").get<double>(),
                                       exact.at("grad").get<std::vector<double>>());
        } else {
            std::vector<gns::GradientBatchStats> small;
            std::vector<gns::GradientBatchStats> big;
            for (const json& b : run.at("small")) {
                small.push_back(batch_from_json(b));
            }
            for (const json& b : run.at("big")) {
                big.push_back(batch_from_json(b));
            }
            row.scale = gns::estimate_gns(small, big);
            if (row.scale.negative_flagged) {
                std::cerr << "warning: step " << row.step
                          << ": negative estimate flagged (trace="
                          << row.scale.trace_estimate << ")\n";
            }
        }
        rows.push_back(row);
    }
    ensure_parent(args.out);
    gns::write_gns_csv(args.out, rows);

    write_manifest(args.out, "gns",
                   {{"stats", args.stats_path}, {"out", args.out}, {"rows", rows.size()}});
    std::cout << "wrote " << rows.size() << " noise-scale rows\n";
    return 0;
}

// ---------------------------------------------------------------------------
// hmm-fit / hmm-map

struct HmmFitArgs {
    std::string config_path;
    std::vector<std::string> metrics;
    int states = 5;
    std::uint64_t seed = kDefaultSeed;
    int restarts = 3;
    int max_iters = 200;
    double tol = 1e-6;
    std::string select_states;
    std::string out;
    std::string paths_out;
    std::string transitions_out;
    std::string bic_out;
};

std::vector<int> parse_state_range(const std::string& text) {
    std::vector<int> states;
    const std::size_t dots = text.find("..");
    if (dots != std::string::npos) {
        const int lo = static_cast<int>(util::parse_u64(text.substr(0, dots)));
        const int hi = static_cast<int>(util::parse_u64(text.substr(dots + 2)));
        if (lo < 1 || hi < lo) {
            throw invalid_argument_error("bad state range '" + text + "'");
        }
        for (int k = lo; k <= hi; ++k) {
            states.push_back(k);
        }
        return states;
    }
    for (const std::string& field : util::split_csv_line(text)) {
        states.push_back(static_cast<int>(util::parse_u64(field)));
    }
    return states;
}

int run_hmm_fit(const CLI::App& app, HmmFitArgs& args) {
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--metrics", "metrics", args.metrics);
    merge_option(app, cfg, "--states", "states", args.states);
    merge_option(app, cfg, "--restarts", "restarts", args.restarts);
    merge_option(app, cfg, "--max-iters", "max_iters", args.max_iters);
    merge_option(app, cfg, "--tol", "tol", args.tol);
    merge_option(app, cfg, "--select-states", "select_states", args.select_states);
    merge_option(app, cfg, "--out", "out", args.out);
    merge_option(app, cfg, "--paths-out", "paths_out", args.paths_out);
    merge_option(app, cfg, "--transitions-out", "transitions_out", args.transitions_out);
    merge_option(app, cfg, "--bic-out", "bic_out", args.bic_out);
    args.seed = resolve_seed(app, cfg, args.seed);
    if (args.metrics.empty() || args.out.empty()) {
        throw invalid_argument_error("hmm-fit requires --metrics and --out");
    }
    if (args.restarts < 1) {
        throw invalid_argument_error("--restarts must be >= 1");
    }

    std::vector<hmm::Sequence> sequences;
    for (const std::string& path : args.metrics) {
        sequences.push_back(hmm::read_metrics_csv_sequence(path));
    }
    const hmm::ObservationSet obs = hmm::zscore(std::move(sequences));
    for (const std::string& warning : obs.warnings) {
        std::cerr << "warning: " << warning << "\n";
    }

    hmm::EmConfig em;
    em.max_iters = args.max_iters;
    em.tol = args.tol;

    std::vector<std::uint64_t> seeds;
    for (int r = 0; r < args.restarts; ++r) {
        seeds.push_back(util::mix_seed(args.seed, static_cast<std::uint64_t>(r)));
    }

    int states = args.states;
    if (!args.select_states.empty()) {
        const std::vector<int> range = parse_state_range(args.select_states);
        const hmm::BicResult bic = hmm::bic_select(obs, range, seeds, em);
        states = bic.selected_states;
        if (!args.bic_out.empty()) {
            std::ostringstream out;
            out << "states,loglik,param_count,bic\n";
            for (const hmm::BicEntry& entry : bic.table) {
                out << entry.states << ',' << util::format_double(entry.loglik) << ','
                    << entry.param_count << ',' << util::format_double(entry.bic) << '\n';
            }
            ensure_parent(args.bic_out);
            util::write_text_file(args.bic_out, out.str());
        }
        std::cout << "BIC selected " << states << " states\n";
    }

    // final fit: best restart by log-likelihood
    hmm::FitResult best;
    double best_loglik = -std::numeric_limits<double>::infinity();
    for (std::uint64_t seed : seeds) {
        hmm::FitResult fit = hmm::baum_welch(obs, states, seed, em);
        const double loglik = fit.loglik_trace.back();
        if (loglik > best_loglik) {
            best_loglik = loglik;
            best = std::move(fit);
        }
    }

    ensure_parent(args.out);
    hmm::write_model_json(args.out, best.model, obs);

    const fs::path out_dir = fs::path(args.out).parent_path();
    const fs::path paths_path =
        args.paths_out.empty() ? out_dir / "decoded_paths.csv" : fs::path(args.paths_out);
    const fs::path transitions_path = args.transitions_out.empty()
                                          ? out_dir / "transition_counts.csv"
                                          : fs::path(args.transitions_out);
    const hmm::TrainingMap map = hmm::training_map(best.model, obs);
    ensure_parent(paths_path);
    hmm::write_paths_csv(paths_path, map);
    ensure_parent(transitions_path);
    hmm::write_transition_counts_csv(transitions_path, map);

    write_manifest(args.out, "hmm-fit",
                   {{"metrics", args.metrics},
                    {"states", states},
                    {"seed", args.seed},
                    {"restarts", args.restarts},
                    {"max_iters", args.max_iters},
                    {"tol", args.tol},
                    {"select_states", args.select_states},
                    {"out", args.out},
                    {"paths_out", paths_path.string()},
                    {"transitions_out", transitions_path.string()},
                    {"final_loglik", best_loglik},
                    {"em_iterations", best.loglik_trace.size()}});
    std::cout << "fit " << states << "-state model over " << obs.sequences.size()
              << " runs (loglik " << best_loglik << ")\n";
    return 0;
}

struct HmmMapArgs {
    std::string config_path;
    std::string model_path;
    std::vector<std::string> metrics;
    std::string paths_out;
    std::string transitions_out;
    std::string dwell_out;
};

int run_hmm_map(const CLI::App& app, HmmMapArgs& args) {
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--model", "model", args.model_path);
    merge_option(app, cfg, "--metrics", "metrics", args.metrics);
    merge_option(app, cfg, "--paths-out", "paths_out", args.paths_out);
    merge_option(app, cfg, "--transitions-out", "transitions_out", args.transitions_out);
    merge_option(app, cfg, "--dwell-out", "dwell_out", args.dwell_out);
    if (args.model_path.empty() || args.metrics.empty() || args.paths_out.empty() ||
        args.transitions_out.empty()) {
        throw invalid_argument_error(
            "hmm-map requires --model, --metrics, --paths-out and --transitions-out");
    }

    const hmm::LoadedModel loaded = hmm::read_model_json(args.model_path);
    std::vector<hmm::Sequence> sequences;
    for (const std::string& path : args.metrics) {
        sequences.push_back(hmm::read_metrics_csv_sequence(path));
    }
    hmm::ObservationSet obs = hmm::observation_set(std::move(sequences));
    if (loaded.normalization_mean.size() > 0) {
        if (loaded.normalization_mean.size() !=
            static_cast<Eigen::Index>(obs.dimension())) {
            throw invalid_argument_error("model normalization dimension does not match metrics");
        }
        // decode under the scaling the model was fitted with
        for (hmm::Sequence& seq : obs.sequences) {
            for (Eigen::Index d = 0; d < seq.values.cols(); ++d) {
                if (loaded.normalization_stddev(d) == 0.0) {
                    seq.values.col(d).setZero();
                } else {
                    seq.values.col(d) =
                        (seq.values.col(d).array() - loaded.normalization_mean(d)) /
                        loaded.normalization_stddev(d);
                }
            }
        }
        obs.mean = loaded.normalization_mean;
        obs.stddev = loaded.normalization_stddev;
    }

    const hmm::TrainingMap map = hmm::training_map(loaded.model, obs);
    ensure_parent(args.paths_out);
    hmm::write_paths_csv(args.paths_out, map);
    ensure_parent(args.transitions_out);
    hmm::write_transition_counts_csv(args.transitions_out, map);
    if (!args.dwell_out.empty()) {
        std::ostringstream out;
        out << "state,dwell_count\n";
        for (std::size_t k = 0; k < map.dwell_counts.size(); ++k) {
            out << k << ',' << map.dwell_counts[k] << '\n';
        }
        ensure_parent(args.dwell_out);
        util::write_text_file(args.dwell_out, out.str());
    }

    write_manifest(args.paths_out, "hmm-map",
                   {{"model", args.model_path},
                    {"metrics", args.metrics},
                    {"paths_out", args.paths_out},
                    {"transitions_out", args.transitions_out},
                    {"dwell_out", args.dwell_out}});
    std::cout << "decoded " << map.paths.size() << " runs\n";
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string config_path;
    std::string out;
    std::string compare_out;
    int threads = 0;
};

stability::SamplingSpec sampling_from_json(const json& j, std::uint64_t steps) {
    stability::SamplingSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform") {
        spec.kind = stability::SamplingKind::uniform;
        spec.emergent_easy_decay = j.value("emergent_easy_decay", false);
    } else if (kind == "curriculum") {
        spec.kind = stability::SamplingKind::curriculum;
        spec.pacing = curriculum::pacing_kind_from_string(j.value("pacing", "quantile"));
    } else if (kind == "fixed_alpha") {
        spec.kind = stability::SamplingKind::fixed_alpha;
        if (j.contains("alpha_table")) {
            spec.alpha_table = j.at("alpha_table").get<std::vector<double>>();
        } else if (j.contains("alpha_linear")) {
            const json& lin = j.at("alpha_linear");
            spec.alpha_table = stability::linear_alpha_table(
                steps, lin.at("start").get<double>(), lin.at("end").get<double>(),
                lin.value("until_frac", 1.0));
        } else {
            throw invalid_argument_error(
                "fixed_alpha sampling needs alpha_table or alpha_linear");
        }
    } else {
        throw invalid_argument_error("unknown sampling kind '" + kind + "'");
    }
    return spec;
}

int run_simulate(const CLI::App& app, SimulateArgs& args) {
    if (args.config_path.empty() || args.out.empty()) {
        throw invalid_argument_error("simulate requires --config and --out");
    }
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--threads", "threads", args.threads);

    const json& problem_json = cfg.at("problem");
    stability::MixtureProblem problem = stability::make_mixture_problem(
        problem_json.value("dim", 10),
        problem_json.value("examples", static_cast<std::size_t>(1000)),
        problem_json.value("rho", 0.5), problem_json.at("sigma_easy_sq").get<double>(),
        problem_json.at("sigma_hard_sq").get<double>(), problem_json.value("mu", 1.0),
        problem_json.value("seed", kDefaultSeed));
    if (problem_json.contains("hessian_diag")) {
        const auto diag = problem_json.at("hessian_diag").get<std::vector<double>>();
        problem.hessian_diag = Eigen::Map<const Eigen::VectorXd>(
            diag.data(), static_cast<Eigen::Index>(diag.size()));
        problem.lipschitz = std::max(problem.mu, problem.hessian_diag.maxCoeff());
        problem.validate();
    }

    std::vector<std::pair<std::string, stability::SgdRunConfig>> runs;
    for (const json& run_json : cfg.at("runs")) {
        stability::SgdRunConfig config;
        config.eta = run_json.value("eta", 0.1);
        config.steps = run_json.value("steps", static_cast<std::uint64_t>(100));
        config.replicates = run_json.value("replicates", static_cast<std::uint64_t>(10000));
        config.seed = run_json.value("seed", kDefaultSeed);
        config.threads = args.threads;
        if (run_json.contains("theta0")) {
            const auto theta0 = run_json.at("theta0").get<std::vector<double>>();
            config.theta0 = Eigen::Map<const Eigen::VectorXd>(
                theta0.data(), static_cast<Eigen::Index>(theta0.size()));
        } else {
            config.theta0 =
                stability::initial_point(problem, run_json.value("theta0_sq_dist", 1.0));
        }
        config.sampling = sampling_from_json(run_json.at("sampling"), config.steps);
        runs.emplace_back(run_json.value("label", "run" + std::to_string(runs.size())),
                          config);
    }
    if (runs.empty()) {
        throw invalid_argument_error("simulate config lists no runs");
    }

    ensure_parent(args.out);
    ordered_json run_outputs = ordered_json::array();
    for (const auto& [label, config] : runs) {
        const stability::TrajectoryStats stats = stability::run_sgd(problem, config);
        fs::path out_path = args.out;
        if (runs.size() > 1) {
            out_path = out_path.parent_path() /
                       (out_path.stem().string() + "_" + label + out_path.extension().string());
        }
        stability::write_trajectory_csv(out_path, stats);
        if (stats.aborted) {
            std::cerr << "warning: run '" << label << "' aborted at step " << stats.abort_step
                      << " (mean squared distance above 1e12)\n";
        }
        run_outputs.push_back({{"label", label},
                               {"out", out_path.string()},
                               {"mode", stats.mode},
                               {"seed", config.seed},
                               {"steps", config.steps},
                               {"replicates", config.replicates},
                               {"aborted", stats.aborted}});
        std::cout << "run '" << label << "' -> " << out_path.string()
                  << " (final mean sq dist "
                  << util::format_double(stats.mean_sq_dist.back()) << ")\n";
    }

    if (!args.compare_out.empty()) {
        if (runs.size() < 2) {
            throw invalid_argument_error("--compare-out needs at least two runs");
        }
        const stability::OrderingComparison report =
            stability::compare_orderings(problem, runs);
        ensure_parent(args.compare_out);
        stability::write_comparison_csv(args.compare_out, report);
        std::cout << "comparison -> " << args.compare_out << "\n";
    }

    write_manifest(args.out, "simulate",
                   {{"config", args.config_path},
                    {"out", args.out},
                    {"compare_out", args.compare_out},
                    {"threads", args.threads},
                    {"runs", run_outputs}});
    return 0;
}

// ---------------------------------------------------------------------------
// correlate

struct CorrelateArgs {
    std::string config_path;
    std::string scores_path;
    std::string losses_path;
    std::string out;
};

int run_correlate(const CLI::App& app, CorrelateArgs& args) {
    const json cfg = load_config(args.config_path);
    merge_option(app, cfg, "--scores", "scores", args.scores_path);
    merge_option(app, cfg, "--losses", "losses", args.losses_path);
    merge_option(app, cfg, "--out", "out", args.out);
    if (args.scores_path.empty() || args.losses_path.empty() || args.out.empty()) {
        throw invalid_argument_error("correlate requires --scores, --losses and --out");
    }

    std::unordered_map<std::uint64_t, double> losses;
    for (const auto& row : util::read_csv(args.losses_path)) {
        if (row.size() != 2) {
            throw corrupt_archive_error(args.losses_path + ": expected sample_index,loss");
        }
        losses[util::parse_u64(row[0])] = util::parse_double(row[1]);
    }

    std::map<scoring::IndexKind, std::pair<std::vector<double>, std::vector<double>>> grouped;
    for (const scoring::ScoredSample& s : scoring::read_scores_csv(args.scores_path)) {
        auto it = losses.find(s.sample_index);
        if (it == losses.end()) {
            continue;
        }
        grouped[s.kind].first.push_back(s.score);
        grouped[s.kind].second.push_back(it->second);
    }
    if (grouped.empty()) {
        throw insufficient_data_error("no sample indices shared between scores and losses");
    }

    std::ostringstream out;
    out << "index_kind,pearson,n\n";
    for (const auto& [kind, xy] : grouped) {
        out << scoring::to_string(kind) << ','
            << util::format_double(scoring::pearson(xy.first, xy.second)) << ','
            << xy.first.size() << '\n';
    }
    ensure_parent(args.out);
    util::write_text_file(args.out, out.str());

    write_manifest(args.out, "correlate",
                   {{"scores", args.scores_path},
                    {"losses", args.losses_path},
                    {"out", args.out}});
    std::cout << "wrote correlations for " << grouped.size() << " index kinds\n";
    return 0;
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"curricula: curriculum orderings and training-dynamics diagnostics"};
    app.require_subcommand(1);

    PackArgs pack_args;
    CLI::App* pack = app.add_subcommand("pack", "pack a JSONL corpus into fixed-size samples");
    pack->add_option("--config", pack_args.config_path, "JSON config merged under flags");
    pack->add_option("--input", pack_args.input, "JSONL corpus, one {id,text} per line");
    pack->add_option("--out", pack_args.out_dir, "output directory");
    pack->add_option("--sample-length", pack_args.sample_length, "tokens per sample")
        ->default_val(2048);

    ScoreArgs score_args;
    CLI::App* score = app.add_subcommand("score", "score packed samples with a lexicon index");
    score->add_option("--config", score_args.config_path, "JSON config merged under flags");
    score->add_option("--packed", score_args.packed_dir, "packed sample directory");
    score->add_option("--index", score_args.index, "aoa | zipf_frequency | verb_variation")
        ->default_val("aoa");
    score->add_option("--lexicon", score_args.lexicon_path, "lexicon TSV");
    score->add_flag("--fpmw", score_args.fpmw,
                    "lexicon values are frequencies per million words; convert to Zipf");
    score->add_option("--default-value", score_args.default_value,
                      "value for out-of-lexicon words (default: lexicon mean)");
    score->add_option("--out", score_args.out, "scores CSV");

    OrderArgs order_args;
    CLI::App* order = app.add_subcommand("order", "turn scores into a curriculum ordering");
    order->add_option("--config", order_args.config_path, "JSON config merged under flags");
    order->add_option("--scores", order_args.scores_path, "scores CSV");
    order->add_option("--mode", order_args.mode, "ascending | random")->default_val("ascending");
    order->add_option("--seed", order_args.seed, "random-mode shuffle seed");
    order->add_option("--out", order_args.out, "ordering CSV");

    ScheduleArgs schedule_args;
    CLI::App* schedule = app.add_subcommand("schedule", "emit sample-index batches");
    schedule->add_option("--config", schedule_args.config_path, "JSON config merged under flags");
    schedule->add_option("--order", schedule_args.order_path, "ordering CSV");
    schedule->add_option("--steps", schedule_args.steps, "number of batches");
    schedule->add_option("--batch-size", schedule_args.batch_size, "samples per batch");
    schedule->add_option("--out", schedule_args.out, "schedule CSV");

    DiagnoseArgs diagnose_args;
    CLI::App* diagnose =
        app.add_subcommand("diagnose", "checkpoint weight metrics from matrix archives");
    diagnose->add_option("--config", diagnose_args.config_path, "JSON config merged under flags");
    diagnose->add_option("--archive", diagnose_args.archives,
                         "STEP:DIR matrix archive (repeatable)");
    diagnose->add_option("--out", diagnose_args.out, "metrics CSV");
    diagnose->add_option("--head-out", diagnose_args.head_out,
                         "singular entropy CSV for the lm_head");
    diagnose->add_option("--head-rank", diagnose_args.head_rank,
                         "also report the rank gap at this rank");

    GnsArgs gns_args;
    CLI::App* gns_cmd = app.add_subcommand("gns", "gradient noise scale from batch statistics");
    gns_cmd->add_option("--config", gns_args.config_path, "JSON config merged under flags");
    gns_cmd->add_option("--stats", gns_args.stats_path, "batch statistics JSON");
    gns_cmd->add_option("--out", gns_args.out, "noise-scale CSV");

    HmmFitArgs hmm_fit_args;
    CLI::App* hmm_fit =
        app.add_subcommand("hmm-fit", "fit a Gaussian HMM jointly across metric runs");
    hmm_fit->add_option("--config", hmm_fit_args.config_path, "JSON config merged under flags");
    hmm_fit->add_option("--metrics", hmm_fit_args.metrics, "metric CSVs, one per run");
    hmm_fit->add_option("--states", hmm_fit_args.states, "latent state count")->default_val(5);
    hmm_fit->add_option("--seed", hmm_fit_args.seed, "restart seed");
    hmm_fit->add_option("--restarts", hmm_fit_args.restarts, "seeded restarts")->default_val(3);
    hmm_fit->add_option("--max-iters", hmm_fit_args.max_iters, "EM iteration cap")
        ->default_val(200);
    hmm_fit->add_option("--tol", hmm_fit_args.tol, "EM log-likelihood tolerance")
        ->default_val(1e-6);
    hmm_fit->add_option("--select-states", hmm_fit_args.select_states,
                        "BIC selection range, e.g. 1..8 or 2,3,5");
    hmm_fit->add_option("--out", hmm_fit_args.out, "model JSON");
    hmm_fit->add_option("--paths-out", hmm_fit_args.paths_out,
                        "decoded paths CSV (default: decoded_paths.csv beside the model)");
    hmm_fit->add_option("--transitions-out", hmm_fit_args.transitions_out,
                        "transition counts CSV (default: transition_counts.csv)");
    hmm_fit->add_option("--bic-out", hmm_fit_args.bic_out, "per-K BIC table CSV");

    HmmMapArgs hmm_map_args;
    CLI::App* hmm_map =
        app.add_subcommand("hmm-map", "decode runs with a fitted model into a training map");
    hmm_map->add_option("--config", hmm_map_args.config_path, "JSON config merged under flags");
    hmm_map->add_option("--model", hmm_map_args.model_path, "model JSON from hmm-fit");
    hmm_map->add_option("--metrics", hmm_map_args.metrics, "metric CSVs, one per run");
    hmm_map->add_option("--paths-out", hmm_map_args.paths_out, "decoded paths CSV");
    hmm_map->add_option("--transitions-out", hmm_map_args.transitions_out,
                        "transition counts CSV");
    hmm_map->add_option("--dwell-out", hmm_map_args.dwell_out, "per-state dwell counts CSV");

    SimulateArgs simulate_args;
    CLI::App* simulate =
        app.add_subcommand("simulate", "curriculum vs uniform SGD on a synthetic mixture");
    simulate->add_option("--config", simulate_args.config_path, "simulation JSON")->required();
    simulate->add_option("--out", simulate_args.out, "trajectory CSV (suffixed per run label)");
    simulate->add_option("--compare-out", simulate_args.compare_out,
                         "late-window comparison report CSV");
    simulate->add_option("--threads", simulate_args.threads, "replicate worker threads (0=auto)");

    CorrelateArgs correlate_args;
    CLI::App* correlate =
        app.add_subcommand("correlate", "Pearson correlation of scores with per-sample losses");
    correlate->add_option("--config", correlate_args.config_path,
                          "JSON config merged under flags");
    correlate->add_option("--scores", correlate_args.scores_path, "scores CSV");
    correlate->add_option("--losses", correlate_args.losses_path, "losses CSV");
    correlate->add_option("--out", correlate_args.out, "correlation CSV");

    try {
        app.parse(argc, argv);
        if (pack->parsed()) {
            return run_pack(*pack, pack_args);
        }
        if (score->parsed()) {
            return run_score(*score, score_args);
        }
        if (order->parsed()) {
            return run_order(*order, order_args);
        }
        if (schedule->parsed()) {
            return run_schedule(*schedule, schedule_args);
        }
        if (diagnose->parsed()) {
            return run_diagnose(*diagnose, diagnose_args);
        }
        if (gns_cmd->parsed()) {
            return run_gns(*gns_cmd, gns_args);
        }
        if (hmm_fit->parsed()) {
            return run_hmm_fit(*hmm_fit, hmm_fit_args);
        }
        if (hmm_map->parsed()) {
            return run_hmm_map(*hmm_map, hmm_map_args);
        }
        if (simulate->parsed()) {
            return run_simulate(*simulate, simulate_args);
        }
        if (correlate->parsed()) {
            return run_correlate(*correlate, correlate_args);
        }
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const invalid_argument_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}

} // namespace curricula::cli
