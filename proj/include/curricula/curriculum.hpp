#pragma once

#include "curricula/scoring.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace curricula::curriculum {

enum class PacingKind { linear, concave_sqrt, convex_square, quantile, constant_full };

const char* to_string(PacingKind kind);
PacingKind pacing_kind_from_string(const std::string& name);

/// Maximal difficulty exposed at normalized training progress t in [0,1].
/// linear/concave_sqrt/convex_square interpolate from d_min to d_max;
/// constant_full always exposes d_max (the random-ordering degenerate case);
/// quantile has no closed-form threshold and is resolved by exposed_set.
struct PacingSchedule {
    PacingKind kind = PacingKind::linear;
    double d_min = 0.0;
    double d_max = 0.0;
};

/// Schedule whose difficulty range matches the given score table.
PacingSchedule schedule_for(PacingKind kind, std::span<const scoring::ScoredSample> scores);

double pacing_value(const PacingSchedule& schedule, double t);

/// permutation[position] = sample index.
struct CurriculumOrder {
    std::vector<std::uint64_t> permutation;
    scoring::IndexKind kind = scoring::IndexKind::aoa;
    std::uint64_t seed = 0;
};

enum class OrderMode { ascending, random };

/// ascending: stable sort by (score, original index). random: seeded uniform
/// permutation, reproducible for a fixed seed.
CurriculumOrder order_samples(std::span<const scoring::ScoredSample> scores, OrderMode mode,
                              std::uint64_t seed = 0);

/// Sample indices with score <= pacing_value(schedule, t), sorted ascending.
/// quantile: the ceil(t*N) lowest-scored samples (empty at t = 0).
std::vector<std::uint64_t> exposed_set(std::span<const scoring::ScoredSample> scores,
                                       const PacingSchedule& schedule, double t);

struct Schedule {
    std::vector<std::vector<std::uint64_t>> batches;
    std::uint64_t unused_samples = 0;
};

/// Consecutive batches walking the permutation exactly once, no repeats.
Schedule emit_schedule(const CurriculumOrder& order, std::uint64_t total_steps,
                       std::uint64_t batch_size);

/// Ascending order split into k near-equal stages, samples shuffled within
/// each stage; stage_ends[i] is the end offset of stage i in the permutation.
struct StagedCurriculum {
    std::vector<std::uint64_t> permutation;
    std::vector<std::uint64_t> stage_ends;
    std::uint64_t seed = 0;
};

StagedCurriculum stage_curriculum(std::span<const scoring::ScoredSample> scores, std::uint64_t k,
                                  std::uint64_t seed);

void write_order_csv(const std::filesystem::path& path, const CurriculumOrder& order,
                     std::span<const scoring::ScoredSample> scores);
void write_schedule_csv(const std::filesystem::path& path, const Schedule& schedule);

} // namespace curricula::curriculum
