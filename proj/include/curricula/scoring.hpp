#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace curricula::scoring {

enum class LexiconKind { aoa, zipf_frequency, verb_set };
enum class IndexKind { aoa, zipf_frequency, verb_variation };

const char* to_string(IndexKind kind);
IndexKind index_kind_from_string(const std::string& name);

/// Word -> value table with case-folded keys. For verb_set the value is
/// ignored; membership marks a verb. Out-of-lexicon words in aoa/zipf scoring
/// contribute default_value (the entry mean unless configured otherwise).
struct Lexicon {
    LexiconKind kind = LexiconKind::aoa;
    std::unordered_map<std::string, double> entries;
    double default_value = 0.0;

    /// TSV, one `word<TAB>value` per line (verb_set: one word per line).
    /// Lines starting with '#' are ignored.
    static Lexicon load_tsv(const std::filesystem::path& path, LexiconKind kind,
                            std::optional<double> default_value = std::nullopt);

    static Lexicon from_entries(LexiconKind kind,
                                std::span<const std::pair<std::string, double>> entries,
                                std::optional<double> default_value = std::nullopt);
};

struct ScoredSample {
    std::uint64_t sample_index = 0;
    IndexKind kind = IndexKind::aoa;
    double score = 0.0;
};

/// Zipf scale: log10(frequency per million words) + 3.
double zipf_from_fpmw(double fpmw);

/// aoa / zipf_frequency: arithmetic mean of per-word lexicon values over
/// words containing at least one alphabetic character. verb_variation:
/// distinct verb types / sqrt(total verb tokens), 0 when no verbs.
/// The lexicon kind must match the index (verb_set backs verb_variation).
double score_words(std::span<const std::string> words, IndexKind kind, const Lexicon& lexicon);

ScoredSample score_sample(std::uint64_t sample_index, std::span<const std::string> words,
                          IndexKind kind, const Lexicon& lexicon);

/// Sample Pearson correlation coefficient.
double pearson(std::span<const double> x, std::span<const double> y);

void write_scores_csv(const std::filesystem::path& path, std::span<const ScoredSample> scores);
std::vector<ScoredSample> read_scores_csv(const std::filesystem::path& path);

std::string fold_case(const std::string& word);

} // namespace curricula::scoring
