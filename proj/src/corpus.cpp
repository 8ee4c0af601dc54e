#include "curricula/corpus.hpp"

#include "curricula/errors.hpp"
#include "curricula/util.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <fstream>

namespace curricula::corpus {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'C', 'P', 'K', '1'};

void put_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

} // namespace

WhitespaceTokenizer WhitespaceTokenizer::from_vocabulary(std::vector<std::string> words) {
    WhitespaceTokenizer tok;
    tok.words_ = std::move(words);
    tok.ids_.reserve(tok.words_.size());
    for (std::uint32_t id = 0; id < tok.words_.size(); ++id) {
        auto [it, inserted] = tok.ids_.emplace(tok.words_[id], id);
        if (!inserted) {
            throw corrupt_archive_error("duplicate vocabulary entry: " + tok.words_[id]);
        }
    }
    return tok;
}

std::uint32_t WhitespaceTokenizer::intern(std::string_view token) {
    auto it = ids_.find(std::string(token));
    if (it != ids_.end()) {
        return it->second;
    }
    auto id = static_cast<std::uint32_t>(words_.size());
    words_.emplace_back(token);
    ids_.emplace(words_.back(), id);
    return id;
}

std::vector<std::uint32_t> WhitespaceTokenizer::tokenize(std::string_view text) {
    std::vector<std::uint32_t> ids;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (i > start) {
            ids.push_back(intern(text.substr(start, i - start)));
        }
    }
    return ids;
}

std::string_view WhitespaceTokenizer::word(std::uint32_t id) const {
    if (id >= words_.size()) {
        throw corrupt_archive_error("token id " + std::to_string(id) +
                                    " outside vocabulary of size " + std::to_string(words_.size()));
    }
    return words_[id];
}

PackedStream pack_stream(std::span<const Document> docs, Tokenizer& tokenizer,
                         std::uint32_t sample_length) {
    if (sample_length == 0) {
        throw invalid_argument_error("sample_length must be positive");
    }
    PackedStream out;
    out.sample_length = sample_length;

    TokenSample current;
    current.index = 0;
    current.tokens.reserve(sample_length);

    for (const Document& doc : docs) {
        const std::vector<std::uint32_t> ids = tokenizer.tokenize(doc.text);
        std::uint64_t offset = 0;
        while (offset < ids.size()) {
            const std::uint64_t room = sample_length - current.tokens.size();
            const std::uint64_t take = std::min<std::uint64_t>(room, ids.size() - offset);
            current.tokens.insert(current.tokens.end(), ids.begin() + static_cast<std::ptrdiff_t>(offset),
                                  ids.begin() + static_cast<std::ptrdiff_t>(offset + take));
            current.spans.push_back({doc.id, offset, offset + take});
            offset += take;
            if (current.tokens.size() == sample_length) {
                out.samples.push_back(std::move(current));
                current = TokenSample{};
                current.index = out.samples.size();
                current.tokens.reserve(sample_length);
            }
        }
    }
    out.dropped_tokens = current.tokens.size();
    return out;
}

std::vector<std::string> detokenize(const TokenSample& sample, const Tokenizer& tokenizer) {
    std::vector<std::string> words;
    words.reserve(sample.tokens.size());
    for (std::uint32_t id : sample.tokens) {
        words.emplace_back(tokenizer.word(id));
    }
    return words;
}

std::vector<Document> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open " + path.string());
    }
    std::vector<Document> docs;
    std::unordered_map<std::string, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        json record = json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object() || !record.contains("id") ||
            !record.contains("text")) {
            throw corrupt_archive_error(path.string() + ":" + std::to_string(line_no) +
                                        ": expected {\"id\", \"text\"} object");
        }
        Document doc{record["id"].get<std::string>(), record["text"].get<std::string>()};
        if (!seen.emplace(doc.id, line_no).second) {
            throw invalid_argument_error("duplicate document id '" + doc.id + "' at " +
                                         path.string() + ":" + std::to_string(line_no));
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

void write_packed(const PackedStream& stream, const WhitespaceTokenizer& tokenizer,
                  const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    std::string binary;
    binary.reserve(16 + stream.samples.size() * stream.sample_length * 4);
    binary.append(kMagic, 4);
    put_u32_le(binary, stream.sample_length);
    put_u64_le(binary, stream.samples.size());
    for (const TokenSample& sample : stream.samples) {
        for (std::uint32_t id : sample.tokens) {
            put_u32_le(binary, id);
        }
    }
    util::write_text_file(dir / "samples.cpk", binary);

    ordered_json sidecar;
    sidecar["sample_length"] = stream.sample_length;
    sidecar["sample_count"] = stream.samples.size();
    sidecar["dropped_tokens"] = stream.dropped_tokens;
    sidecar["vocabulary"] = tokenizer.words();
    ordered_json samples = ordered_json::array();
    for (const TokenSample& sample : stream.samples) {
        ordered_json spans = ordered_json::array();
        for (const TokenSpan& span : sample.spans) {
            spans.push_back({{"doc", span.doc_id}, {"begin", span.begin}, {"end", span.end}});
        }
        samples.push_back({{"index", sample.index}, {"spans", std::move(spans)}});
    }
    sidecar["samples"] = std::move(samples);
    util::write_text_file(dir / "sidecar.json", sidecar.dump(2) + "\n");
}

LoadedStream read_packed(const std::filesystem::path& dir) {
    const std::string binary = util::read_text_file(dir / "samples.cpk");
    if (binary.size() < 16 || std::string_view(binary.data(), 4) != std::string_view(kMagic, 4)) {
        throw corrupt_archive_error((dir / "samples.cpk").string() + ": bad magic");
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(binary.data());
    const std::uint32_t sample_length = get_u32_le(bytes + 4);
    const std::uint64_t sample_count = get_u64_le(bytes + 8);
    const std::uint64_t expected = 16 + sample_count * static_cast<std::uint64_t>(sample_length) * 4;
    if (binary.size() != expected) {
        throw corrupt_archive_error((dir / "samples.cpk").string() + ": size " +
                                    std::to_string(binary.size()) + ", expected " +
                                    std::to_string(expected));
    }

    json sidecar = json::parse(util::read_text_file(dir / "sidecar.json"));

    LoadedStream out;
    out.stream.sample_length = sample_length;
    out.stream.dropped_tokens = sidecar.at("dropped_tokens").get<std::uint64_t>();
    out.tokenizer =
        WhitespaceTokenizer::from_vocabulary(sidecar.at("vocabulary").get<std::vector<std::string>>());

    const auto& sample_meta = sidecar.at("samples");
    if (sample_meta.size() != sample_count) {
        throw corrupt_archive_error("sidecar lists " + std::to_string(sample_meta.size()) +
                                    " samples, binary holds " + std::to_string(sample_count));
    }
    out.stream.samples.resize(sample_count);
    std::size_t pos = 16;
    for (std::uint64_t i = 0; i < sample_count; ++i) {
        TokenSample& sample = out.stream.samples[i];
        sample.index = i;
        sample.tokens.resize(sample_length);
        for (std::uint32_t j = 0; j < sample_length; ++j, pos += 4) {
            sample.tokens[j] = get_u32_le(bytes + pos);
        }
        for (const auto& span : sample_meta[i].at("spans")) {
            sample.spans.push_back({span.at("doc").get<std::string>(),
                                    span.at("begin").get<std::uint64_t>(),
                                    span.at("end").get<std::uint64_t>()});
        }
    }
    return out;
}

} // namespace curricula::corpus
