#include "curricula/scoring.hpp"

#include "curricula/errors.hpp"
#include "curricula/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace curricula::scoring {

namespace {

bool has_alpha(const std::string& word) {
    return std::any_of(word.begin(), word.end(),
                       [](unsigned char c) { return std::isalpha(c) != 0; });
}

void validate_entry(LexiconKind kind, const std::string& word, double value) {
    if (kind == LexiconKind::aoa && !(value > 0.0)) {
        throw invalid_argument_error("aoa value for '" + word + "' must be > 0");
    }
    if (kind == LexiconKind::zipf_frequency && !std::isfinite(value)) {
        throw invalid_argument_error("zipf value for '" + word + "' must be finite");
    }
}

double entry_mean(const std::unordered_map<std::string, double>& entries) {
    if (entries.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& [word, value] : entries) {
        sum += value;
    }
    return sum / static_cast<double>(entries.size());
}

} // namespace

const char* to_string(IndexKind kind) {
    switch (kind) {
    case IndexKind::aoa:
        return "aoa";
    case IndexKind::zipf_frequency:
        return "zipf_frequency";
    case IndexKind::verb_variation:
        return "verb_variation";
    }
    return "?";
}

IndexKind index_kind_from_string(const std::string& name) {
    if (name == "aoa") {
        return IndexKind::aoa;
    }
    if (name == "zipf_frequency" || name == "zipf") {
        return IndexKind::zipf_frequency;
    }
    if (name == "verb_variation" || name == "vv") {
        return IndexKind::verb_variation;
    }
    throw invalid_argument_error("unknown index kind '" + name + "'");
}

std::string fold_case(const std::string& word) {
    std::string out = word;
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

Lexicon Lexicon::from_entries(LexiconKind kind,
                              std::span<const std::pair<std::string, double>> entries,
                              std::optional<double> default_value) {
    Lexicon lex;
    lex.kind = kind;
    lex.entries.reserve(entries.size());
    for (const auto& [word, value] : entries) {
        validate_entry(kind, word, value);
        if (!lex.entries.emplace(fold_case(word), value).second) {
            throw invalid_argument_error("duplicate lexicon entry after case folding: '" +
                                         fold_case(word) + "'");
        }
    }
    lex.default_value = default_value.value_or(entry_mean(lex.entries));
    return lex;
}

Lexicon Lexicon::load_tsv(const std::filesystem::path& path, LexiconKind kind,
                          std::optional<double> default_value) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open lexicon " + path.string());
    }
    std::vector<std::pair<std::string, double>> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::size_t tab = line.find('\t');
        if (kind == LexiconKind::verb_set) {
            entries.emplace_back(line.substr(0, tab), 0.0);
            continue;
        }
        if (tab == std::string::npos) {
            throw corrupt_archive_error(path.string() + ":" + std::to_string(line_no) +
                                        ": expected word<TAB>value");
        }
        entries.emplace_back(line.substr(0, tab), util::parse_double(line.substr(tab + 1)));
    }
    return from_entries(kind, entries, default_value);
}

double zipf_from_fpmw(double fpmw) {
    if (!(fpmw > 0.0)) {
        throw invalid_argument_error("fpmw must be > 0");
    }
    return std::log10(fpmw) + 3.0;
}

double score_words(std::span<const std::string> words, IndexKind kind, const Lexicon& lexicon) {
    if (kind == IndexKind::verb_variation) {
        if (lexicon.kind != LexiconKind::verb_set) {
            throw invalid_argument_error("verb_variation requires a verb_set lexicon");
        }
        std::unordered_set<std::string> types;
        std::uint64_t tokens = 0;
        for (const std::string& word : words) {
            std::string folded = fold_case(word);
            if (lexicon.entries.count(folded) != 0) {
                ++tokens;
                types.insert(std::move(folded));
            }
        }
        if (tokens == 0) {
            return 0.0;
        }
        return static_cast<double>(types.size()) / std::sqrt(static_cast<double>(tokens));
    }

    const LexiconKind wanted =
        kind == IndexKind::aoa ? LexiconKind::aoa : LexiconKind::zipf_frequency;
    if (lexicon.kind != wanted) {
        throw invalid_argument_error(std::string("lexicon kind does not match index ") +
                                     to_string(kind));
    }
    double sum = 0.0;
    std::uint64_t count = 0;
    for (const std::string& word : words) {
        if (!has_alpha(word)) {
            continue;
        }
        auto it = lexicon.entries.find(fold_case(word));
        sum += it != lexicon.entries.end() ? it->second : lexicon.default_value;
        ++count;
    }
    if (count == 0) {
        throw invalid_argument_error(std::string("no scoreable words for index ") +
                                     to_string(kind));
    }
    return sum / static_cast<double>(count);
}

ScoredSample score_sample(std::uint64_t sample_index, std::span<const std::string> words,
                          IndexKind kind, const Lexicon& lexicon) {
    return {sample_index, kind, score_words(words, kind, lexicon)};
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw invalid_argument_error("pearson: length mismatch");
    }
    if (x.size() < 2) {
        throw insufficient_data_error("pearson: need at least 2 points");
    }
    const double n = static_cast<double>(x.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw undefined_correlation_error("pearson: zero variance input");
    }
    return sxy / std::sqrt(sxx * syy);
}

void write_scores_csv(const std::filesystem::path& path, std::span<const ScoredSample> scores) {
    std::ostringstream out;
    out << "sample_index,index_kind,score\n";
    for (const ScoredSample& s : scores) {
        out << s.sample_index << ',' << to_string(s.kind) << ',' << util::format_double(s.score)
            << '\n';
    }
    util::write_text_file(path, out.str());
}

std::vector<ScoredSample> read_scores_csv(const std::filesystem::path& path) {
    std::vector<ScoredSample> scores;
    for (const auto& row : util::read_csv(path)) {
        if (row.size() != 3) {
            throw corrupt_archive_error(path.string() + ": expected 3 columns");
        }
        scores.push_back({util::parse_u64(row[0]), index_kind_from_string(row[1]),
                          util::parse_double(row[2])});
    }
    return scores;
}

} // namespace curricula::scoring
