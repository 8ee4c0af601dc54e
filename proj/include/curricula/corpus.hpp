#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace curricula::corpus {

struct Document {
    std::string id;
    std::string text;
};

/// Pluggable tokenizer interface. The stock implementation splits on
/// whitespace; a subword tokenizer can be substituted as long as it keeps a
/// stable id -> token mapping.
class Tokenizer {
  public:
    virtual ~Tokenizer() = default;

    // Deterministic; unknown tokens get fresh ids appended to the vocabulary.
    virtual std::vector<std::uint32_t> tokenize(std::string_view text) = 0;

    // Throws corrupt_archive_error for ids outside the vocabulary.
    virtual std::string_view word(std::uint32_t id) const = 0;

    virtual std::size_t vocabulary_size() const = 0;
};

class WhitespaceTokenizer final : public Tokenizer {
  public:
    WhitespaceTokenizer() = default;

    static WhitespaceTokenizer from_vocabulary(std::vector<std::string> words);

    std::vector<std::uint32_t> tokenize(std::string_view text) override;
    std::string_view word(std::uint32_t id) const override;
    std::size_t vocabulary_size() const override { return words_.size(); }

    /// Vocabulary indexed by id.
    const std::vector<std::string>& words() const { return words_; }

  private:
    std::uint32_t intern(std::string_view token);

    std::vector<std::string> words_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

/// Half-open token range [begin, end) within one source document.
struct TokenSpan {
    std::string doc_id;
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
};

struct TokenSample {
    std::uint64_t index = 0;
    std::vector<std::uint32_t> tokens;
    std::vector<TokenSpan> spans;
};

struct PackedStream {
    std::uint32_t sample_length = 0;
    std::vector<TokenSample> samples;
    std::uint64_t dropped_tokens = 0;
};

/// Concatenates documents in input order into one token stream and cuts it
/// into consecutive samples of exactly sample_length tokens. The trailing
/// remainder shorter than sample_length is dropped and counted.
PackedStream pack_stream(std::span<const Document> docs, Tokenizer& tokenizer,
                         std::uint32_t sample_length);

std::vector<std::string> detokenize(const TokenSample& sample, const Tokenizer& tokenizer);

/// One JSON object per line with fields "id" and "text".
std::vector<Document> read_jsonl(const std::filesystem::path& path);

// On-disk layout: <dir>/samples.cpk holds the header (magic "CPK1",
// sample_length as u32 LE, sample count as u64 LE) followed by token ids as
// consecutive u32 LE. <dir>/sidecar.json holds vocabulary, spans and the
// dropped-token count.
void write_packed(const PackedStream& stream, const WhitespaceTokenizer& tokenizer,
                  const std::filesystem::path& dir);

struct LoadedStream {
    PackedStream stream;
    WhitespaceTokenizer tokenizer;
};

LoadedStream read_packed(const std::filesystem::path& dir);

} // namespace curricula::corpus
