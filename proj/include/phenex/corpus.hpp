#pragma once

// Document ingestion, word/code tokenization, vocabulary filtering and
// sentence deduplication.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace phenex {

using TokenId = std::uint32_t;
using SentenceId = std::uint32_t;

enum class ParserMode { Word, Codes };

ParserMode parse_mode(std::string_view name);
const char* to_string(ParserMode mode) noexcept;

struct RawText {
    std::string text;
};
struct SentenceList {
    std::vector<std::string> sentences;
};
struct TokenLists {
    std::vector<std::vector<std::string>> sentences;
};

struct Document {
    std::string patient_id;
    std::string doc_id;
    std::variant<RawText, SentenceList, TokenLists> body;
};

/// Parses one JSONL line. Throws Error(Parse) on malformed input or a
/// violated Document invariant.
Document parse_document(std::string_view json_line);

std::vector<Document> read_documents(std::istream& in);
std::vector<Document> read_documents(const std::filesystem::path& path);

/// Splits at '.', '!' or '?' followed by whitespace or end of text. Fragments
/// are trimmed; empty ones are dropped.
std::vector<std::string> split_sentences(std::string_view raw_text);

/// Lowercases, splits on whitespace, '/', '\' and '-', strips everything that
/// is not an ASCII letter or digit, and collapses every digit run to "#".
std::vector<std::string> word_tokenize(std::string_view sentence);

struct DocumentRef {
    std::uint32_t patient;  // index into TokenizedCorpus::patients
    std::string doc_id;
};

struct RawSentence {
    std::uint32_t document;  // index into TokenizedCorpus::documents
    std::vector<std::string> tokens;
};

/// Token strings per raw sentence, before any vocabulary filtering.
struct TokenizedCorpus {
    std::vector<std::string> patients;  // first-seen order
    std::vector<DocumentRef> documents;
    std::vector<RawSentence> sentences;
};

TokenizedCorpus tokenize_documents(std::span<const Document> documents, ParserMode mode,
                                   unsigned threads = 1);

struct TokenStats {
    std::string token;
    std::uint64_t occurrences = 0;         // raw token occurrences, before dedup
    std::uint64_t sentence_frequency = 0;  // unique raw token sets containing the token
    bool stop = false;
    bool rare = false;
};

struct VocabularyOptions {
    std::size_t stop_count = 70;
    std::uint64_t rare_min = 20;
};

/// Retained tokens get dense ids in lexicographic order. n_t and N are filled
/// in by deduplicate(); until then they hold zero.
struct Vocabulary {
    std::vector<std::string> tokens;             // token_id -> token
    std::vector<std::uint64_t> sentence_counts;  // n(t) over unique filtered sentences
    std::uint64_t unique_sentences = 0;          // N
    std::vector<TokenStats> stats;               // every seen token, sorted by token

    std::size_t size() const noexcept { return tokens.size(); }
    std::optional<TokenId> find(std::string_view token) const;
};

Vocabulary build_vocabulary(const TokenizedCorpus& corpus, const VocabularyOptions& options);

struct Occurrence {
    std::uint32_t patient;
    std::uint32_t document;

    friend bool operator==(const Occurrence&, const Occurrence&) = default;
    friend auto operator<=>(const Occurrence&, const Occurrence&) = default;
};

struct TokenizedSentence {
    SentenceId id = 0;
    std::vector<TokenId> tokens;  // ascending, unique, non-empty
    std::vector<Occurrence> occurrences;
};

/// Deduplicated corpus: the sentence table every later stage consumes.
struct SentenceTable {
    ParserMode mode = ParserMode::Word;
    Vocabulary vocabulary;
    std::vector<std::string> patients;
    std::vector<DocumentRef> documents;
    std::vector<TokenizedSentence> sentences;
    std::uint64_t raw_sentences = 0;  // non-empty after filtering

    std::vector<std::vector<TokenId>> token_sets() const;
};

/// Reduces every raw sentence to its retained-token set, merges identical sets
/// (ids assigned in first-seen order) and records n(t) and N.
SentenceTable deduplicate(const TokenizedCorpus& corpus, const Vocabulary& vocabulary);

/// tokenize_documents + build_vocabulary + deduplicate. Throws EmptyCorpus when
/// the input holds no sentences.
SentenceTable build_sentence_table(std::span<const Document> documents, ParserMode mode,
                                   const VocabularyOptions& options, unsigned threads = 1);

// On-disk layout of a sentence directory: sentences.tsv, occurrences.tsv,
// vocabulary.tsv and tokenize.json.
void write_sentence_table(const SentenceTable& table, const std::filesystem::path& dir,
                          const VocabularyOptions& options);
SentenceTable read_sentence_table(const std::filesystem::path& dir);

} // namespace phenex
