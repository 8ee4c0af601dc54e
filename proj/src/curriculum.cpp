#include "curricula/curriculum.hpp"

#include "curricula/errors.hpp"
#include "curricula/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace curricula::curriculum {

namespace {

void check_scores(std::span<const scoring::ScoredSample> scores) {
    if (scores.empty()) {
        throw invalid_argument_error("score table is empty");
    }
    for (const auto& s : scores) {
        if (s.kind != scores.front().kind) {
            throw invalid_argument_error("mixed index kinds in score table");
        }
    }
}

// Positions of the ceil(t*N) lowest samples by (score, original index).
std::vector<std::size_t> ascending_positions(std::span<const scoring::ScoredSample> scores) {
    std::vector<std::size_t> positions(scores.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    std::stable_sort(positions.begin(), positions.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a].score != scores[b].score) {
            return scores[a].score < scores[b].score;
        }
        return scores[a].sample_index < scores[b].sample_index;
    });
    return positions;
}

} // namespace

const char* to_string(PacingKind kind) {
    switch (kind) {
    case PacingKind::linear:
        return "linear";
    case PacingKind::concave_sqrt:
        return "concave_sqrt";
    case PacingKind::convex_square:
        return "convex_square";
    case PacingKind::quantile:
        return "quantile";
    case PacingKind::constant_full:
        return "constant_full";
    }
    return "?";
}

PacingKind pacing_kind_from_string(const std::string& name) {
    if (name == "linear") {
        return PacingKind::linear;
    }
    if (name == "concave_sqrt" || name == "concave") {
        return PacingKind::concave_sqrt;
    }
    if (name == "convex_square" || name == "convex") {
        return PacingKind::convex_square;
    }
    if (name == "quantile") {
        return PacingKind::quantile;
    }
    if (name == "constant_full" || name == "full") {
        return PacingKind::constant_full;
    }
    throw invalid_argument_error("unknown pacing kind '" + name + "'");
}

PacingSchedule schedule_for(PacingKind kind, std::span<const scoring::ScoredSample> scores) {
    check_scores(scores);
    auto [lo, hi] = std::minmax_element(
        scores.begin(), scores.end(),
        [](const auto& a, const auto& b) { return a.score < b.score; });
    return {kind, lo->score, hi->score};
}

double pacing_value(const PacingSchedule& schedule, double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw invalid_argument_error("pacing progress t must lie in [0,1]");
    }
    if (schedule.d_min > schedule.d_max) {
        throw invalid_argument_error("pacing schedule has d_min > d_max");
    }
    const double delta = schedule.d_max - schedule.d_min;
    switch (schedule.kind) {
    case PacingKind::linear:
        return schedule.d_min + t * delta;
    case PacingKind::concave_sqrt:
        return schedule.d_min + std::sqrt(t) * delta;
    case PacingKind::convex_square:
        return schedule.d_min + t * t * delta;
    case PacingKind::constant_full:
        return schedule.d_max;
    case PacingKind::quantile:
        throw invalid_argument_error(
            "quantile pacing has no closed-form threshold; use exposed_set");
    }
    throw invalid_argument_error("unknown pacing kind");
}

CurriculumOrder order_samples(std::span<const scoring::ScoredSample> scores, OrderMode mode,
                              std::uint64_t seed) {
    check_scores(scores);
    CurriculumOrder order;
    order.kind = scores.front().kind;
    order.seed = seed;
    if (mode == OrderMode::ascending) {
        for (std::size_t pos : ascending_positions(scores)) {
            order.permutation.push_back(scores[pos].sample_index);
        }
        return order;
    }
    order.permutation.reserve(scores.size());
    for (const auto& s : scores) {
        order.permutation.push_back(s.sample_index);
    }
    auto rng = util::make_rng(seed, 0);
    std::shuffle(order.permutation.begin(), order.permutation.end(), rng);
    return order;
}

std::vector<std::uint64_t> exposed_set(std::span<const scoring::ScoredSample> scores,
                                       const PacingSchedule& schedule, double t) {
    check_scores(scores);
    std::vector<std::uint64_t> exposed;
    if (schedule.kind == PacingKind::quantile) {
        if (!(t >= 0.0 && t <= 1.0)) {
            throw invalid_argument_error("pacing progress t must lie in [0,1]");
        }
        const auto count = static_cast<std::size_t>(
            std::ceil(t * static_cast<double>(scores.size())));
        const auto positions = ascending_positions(scores);
        for (std::size_t i = 0; i < count; ++i) {
            exposed.push_back(scores[positions[i]].sample_index);
        }
    } else {
        const double threshold = pacing_value(schedule, t);
        for (const auto& s : scores) {
            if (s.score <= threshold) {
                exposed.push_back(s.sample_index);
            }
        }
    }
    std::sort(exposed.begin(), exposed.end());
    return exposed;
}

Schedule emit_schedule(const CurriculumOrder& order, std::uint64_t total_steps,
                       std::uint64_t batch_size) {
    if (batch_size == 0) {
        throw invalid_argument_error("batch_size must be positive");
    }
    if (total_steps > order.permutation.size() / batch_size) {
        throw invalid_argument_error("step budget " + std::to_string(total_steps) + "x" +
                                     std::to_string(batch_size) + " exceeds sample count " +
                                     std::to_string(order.permutation.size()));
    }
    const std::uint64_t budget = total_steps * batch_size;
    Schedule schedule;
    schedule.batches.reserve(total_steps);
    std::size_t pos = 0;
    for (std::uint64_t step = 0; step < total_steps; ++step) {
        std::vector<std::uint64_t> batch(order.permutation.begin() + static_cast<std::ptrdiff_t>(pos),
                                         order.permutation.begin() +
                                             static_cast<std::ptrdiff_t>(pos + batch_size));
        schedule.batches.push_back(std::move(batch));
        pos += batch_size;
    }
    schedule.unused_samples = order.permutation.size() - budget;
    return schedule;
}

StagedCurriculum stage_curriculum(std::span<const scoring::ScoredSample> scores, std::uint64_t k,
                                  std::uint64_t seed) {
    check_scores(scores);
    if (k == 0 || k > scores.size()) {
        throw invalid_argument_error("stage count must lie in [1, N]");
    }
    const std::size_t n = scores.size();
    StagedCurriculum staged;
    staged.seed = seed;
    staged.permutation.reserve(n);
    for (std::size_t pos : ascending_positions(scores)) {
        staged.permutation.push_back(scores[pos].sample_index);
    }
    for (std::uint64_t stage = 0; stage < k; ++stage) {
        const std::size_t begin = static_cast<std::size_t>(stage * n / k);
        const std::size_t end = static_cast<std::size_t>((stage + 1) * n / k);
        auto rng = util::make_rng(seed, stage);
        std::shuffle(staged.permutation.begin() + static_cast<std::ptrdiff_t>(begin),
                     staged.permutation.begin() + static_cast<std::ptrdiff_t>(end), rng);
        staged.stage_ends.push_back(end);
    }
    return staged;
}

void write_order_csv(const std::filesystem::path& path, const CurriculumOrder& order,
                     std::span<const scoring::ScoredSample> scores) {
    std::unordered_map<std::uint64_t, double> by_index;
    by_index.reserve(scores.size());
    for (const auto& s : scores) {
        by_index.emplace(s.sample_index, s.score);
    }
    std::ostringstream out;
    out << "position,sample_index,score\n";
    for (std::size_t pos = 0; pos < order.permutation.size(); ++pos) {
        const std::uint64_t index = order.permutation[pos];
        auto it = by_index.find(index);
        if (it == by_index.end()) {
            throw invalid_argument_error("ordering references unknown sample index " +
                                         std::to_string(index));
        }
        out << pos << ',' << index << ',' << util::format_double(it->second) << '\n';
    }
    util::write_text_file(path, out.str());
}

void write_schedule_csv(const std::filesystem::path& path, const Schedule& schedule) {
    std::ostringstream out;
    out << "step,batch_position,sample_index\n";
    for (std::size_t step = 0; step < schedule.batches.size(); ++step) {
        const auto& batch = schedule.batches[step];
        for (std::size_t i = 0; i < batch.size(); ++i) {
            out << step << ',' << i << ',' << batch[i] << '\n';
        }
    }
    util::write_text_file(path, out.str());
}

} // namespace curricula::curriculum
