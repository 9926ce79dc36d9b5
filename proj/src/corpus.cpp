#include "phenex/corpus.hpp"

#include "phenex/error.hpp"
#include "phenex/parallel.hpp"
#include "phenex/tsv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

namespace phenex {

namespace {

using json = nlohmann::json;

struct IdVectorHash {
    std::size_t operator()(const std::vector<std::uint32_t>& v) const noexcept {
        std::uint64_t h = 1469598103934665603ULL;
        for (auto x : v) {
            h ^= x;
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h ^ (h >> 32));
    }
};

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string required_string(const json& obj, const char* key, std::size_t line) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_string() || it->get<std::string>().empty())
        throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": missing or empty '" +
                                          key + "'");
    return it->get<std::string>();
}

Document parse_document_at(std::string_view line_text, std::size_t line) {
    json obj;
    try {
        obj = json::parse(line_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + e.what());
    }
    if (!obj.is_object())
        throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": expected an object");

    Document doc;
    doc.patient_id = required_string(obj, "patient_id", line);
    doc.doc_id = required_string(obj, "doc_id", line);
    const auto where = "line " + std::to_string(line) + ": ";

    if (auto it = obj.find("token_sentences"); it != obj.end()) {
        if (!it->is_array() || it->empty())
            throw Error(ErrorKind::Parse, where + "'token_sentences' must be a non-empty array");
        TokenLists lists;
        for (const auto& s : *it) {
            if (!s.is_array())
                throw Error(ErrorKind::Parse, where + "'token_sentences' entries must be arrays");
            auto& tokens = lists.sentences.emplace_back();
            for (const auto& t : s) {
                if (!t.is_string())
                    throw Error(ErrorKind::Parse, where + "tokens must be strings");
                tokens.push_back(t.get<std::string>());
            }
        }
        doc.body = std::move(lists);
    } else if (auto it = obj.find("sentences"); it != obj.end()) {
        if (!it->is_array() || it->empty())
            throw Error(ErrorKind::Parse, where + "'sentences' must be a non-empty array");
        SentenceList list;
        for (const auto& s : *it) {
            if (!s.is_string())
                throw Error(ErrorKind::Parse, where + "'sentences' entries must be strings");
            list.sentences.push_back(s.get<std::string>());
        }
        doc.body = std::move(list);
    } else if (auto it = obj.find("text"); it != obj.end()) {
        if (!it->is_string() || trim(it->get<std::string>()).empty())
            throw Error(ErrorKind::Parse, where + "'text' must be a non-empty string");
        doc.body = RawText{it->get<std::string>()};
    } else {
        throw Error(ErrorKind::Parse,
                    where + "document needs one of 'text', 'sentences', 'token_sentences'");
    }
    return doc;
}

void check_code(const std::string& code) {
    if (code.find_first_of("\t\n\r") != std::string::npos)
        throw Error(ErrorKind::Parse, "code token contains a tab or newline: '" + code + "'");
}

std::vector<std::vector<std::string>> tokenize_body(const Document& doc, ParserMode mode) {
    std::vector<std::vector<std::string>> out;
    if (mode == ParserMode::Codes) {
        const auto* lists = std::get_if<TokenLists>(&doc.body);
        if (lists == nullptr)
            throw Error(ErrorKind::Parse, "document " + doc.doc_id +
                                              ": codes mode requires 'token_sentences'");
        for (const auto& s : lists->sentences) {
            auto& tokens = out.emplace_back();
            for (const auto& t : s) {
                if (t.empty()) continue;
                check_code(t);
                tokens.push_back(t);
            }
        }
        return out;
    }
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, RawText>) {
                for (const auto& s : split_sentences(body.text)) out.push_back(word_tokenize(s));
            } else if constexpr (std::is_same_v<T, SentenceList>) {
                for (const auto& s : body.sentences) out.push_back(word_tokenize(s));
            } else {
                for (const auto& s : body.sentences) {
                    std::string joined;
                    for (const auto& t : s) {
                        joined += t;
                        joined += ' ';
                    }
                    out.push_back(word_tokenize(joined));
                }
            }
        },
        doc.body);
    return out;
}

} // namespace

ParserMode parse_mode(std::string_view name) {
    if (name == "word") return ParserMode::Word;
    if (name == "codes") return ParserMode::Codes;
    throw Error(ErrorKind::Usage, "unknown parser mode '" + std::string(name) + "'");
}

const char* to_string(ParserMode mode) noexcept {
    return mode == ParserMode::Word ? "word" : "codes";
}

Document parse_document(std::string_view json_line) { return parse_document_at(json_line, 1); }

std::vector<Document> read_documents(std::istream& in) {
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (tsv::next_line(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        docs.push_back(parse_document_at(line, lineno));
    }
    return docs;
}

std::vector<Document> read_documents(const std::filesystem::path& path) {
    auto in = tsv::open_in(path);
    return read_documents(in);
}

std::vector<std::string> split_sentences(std::string_view raw_text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < raw_text.size(); ++i) {
        const char c = raw_text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        if (i + 1 != raw_text.size() && !is_space(raw_text[i + 1])) continue;
        const auto piece = trim(raw_text.substr(start, i + 1 - start));
        if (!piece.empty()) out.emplace_back(piece);
        start = i + 1;
    }
    if (start < raw_text.size()) {
        const auto piece = trim(raw_text.substr(start));
        if (!piece.empty()) out.emplace_back(piece);
    }
    return out;
}

std::vector<std::string> word_tokenize(std::string_view sentence) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    bool in_digits = false;
    for (const char raw : sentence) {
        const auto c = static_cast<unsigned char>(raw);
        if (is_space(raw) || raw == '/' || raw == '\\' || raw == '-') {
            flush();
            in_digits = false;
            continue;
        }
        if (c < 0x80 && std::isdigit(c)) {
            if (!in_digits) current.push_back('#');
            in_digits = true;
        } else if (c < 0x80 && std::isalpha(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
            in_digits = false;
        }
        // Anything else is stripped without breaking the token, so "1,000"
        // collapses to a single "#".
    }
    flush();
    return tokens;
}

TokenizedCorpus tokenize_documents(std::span<const Document> documents, ParserMode mode,
                                   unsigned threads) {
    std::vector<std::vector<std::vector<std::string>>> per_doc(documents.size());
    parallel_for(documents.size(), threads, [&](std::size_t begin, std::size_t end, unsigned) {
        for (std::size_t i = begin; i < end; ++i) per_doc[i] = tokenize_body(documents[i], mode);
    });

    TokenizedCorpus corpus;
    std::unordered_map<std::string, std::uint32_t> patient_index;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        const auto& doc = documents[i];
        auto [it, inserted] = patient_index.try_emplace(
            doc.patient_id, static_cast<std::uint32_t>(corpus.patients.size()));
        if (inserted) corpus.patients.push_back(doc.patient_id);
        const auto doc_index = static_cast<std::uint32_t>(corpus.documents.size());
        corpus.documents.push_back({it->second, doc.doc_id});
        for (auto& tokens : per_doc[i]) corpus.sentences.push_back({doc_index, std::move(tokens)});
    }
    return corpus;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
    const auto it = std::lower_bound(tokens.begin(), tokens.end(), token);
    if (it == tokens.end() || *it != token) return std::nullopt;
    return static_cast<TokenId>(it - tokens.begin());
}

Vocabulary build_vocabulary(const TokenizedCorpus& corpus, const VocabularyOptions& options) {
    if (corpus.sentences.empty()) throw Error(ErrorKind::EmptyCorpus, "corpus has no sentences");

    std::unordered_map<std::string, std::uint32_t> interned;
    std::vector<TokenStats> stats;
    std::unordered_set<std::vector<std::uint32_t>, IdVectorHash> unique_sets;
    std::vector<std::uint32_t> ids;
    for (const auto& sentence : corpus.sentences) {
        ids.clear();
        for (const auto& token : sentence.tokens) {
            auto [it, inserted] =
                interned.try_emplace(token, static_cast<std::uint32_t>(stats.size()));
            if (inserted) stats.push_back({token, 0, 0, false, false});
            ++stats[it->second].occurrences;
            ids.push_back(it->second);
        }
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        if (ids.empty()) continue;
        if (unique_sets.insert(ids).second)
            for (auto id : ids) ++stats[id].sentence_frequency;
    }

    std::vector<std::uint32_t> order(stats.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        if (stats[a].sentence_frequency != stats[b].sentence_frequency)
            return stats[a].sentence_frequency > stats[b].sentence_frequency;
        return stats[a].token < stats[b].token;
    });
    for (std::size_t r = 0; r < order.size() && r < options.stop_count; ++r)
        stats[order[r]].stop = true;
    for (auto& s : stats) s.rare = s.occurrences < options.rare_min;

    std::sort(stats.begin(), stats.end(),
              [](const auto& a, const auto& b) { return a.token < b.token; });

    Vocabulary vocab;
    for (const auto& s : stats)
        if (!s.stop && !s.rare) vocab.tokens.push_back(s.token);
    vocab.sentence_counts.assign(vocab.tokens.size(), 0);
    vocab.stats = std::move(stats);
    return vocab;
}

std::vector<std::vector<TokenId>> SentenceTable::token_sets() const {
    std::vector<std::vector<TokenId>> sets;
    sets.reserve(sentences.size());
    for (const auto& s : sentences) sets.push_back(s.tokens);
    return sets;
}

SentenceTable deduplicate(const TokenizedCorpus& corpus, const Vocabulary& vocabulary) {
    SentenceTable table;
    table.vocabulary = vocabulary;
    table.patients = corpus.patients;
    table.documents = corpus.documents;

    std::unordered_map<std::string_view, TokenId> lookup;
    lookup.reserve(vocabulary.tokens.size());
    for (TokenId id = 0; id < vocabulary.tokens.size(); ++id) lookup.emplace(vocabulary.tokens[id], id);

    std::unordered_map<std::vector<TokenId>, SentenceId, IdVectorHash> seen;
    std::vector<TokenId> ids;
    for (const auto& raw : corpus.sentences) {
        ids.clear();
        for (const auto& token : raw.tokens)
            if (auto it = lookup.find(token); it != lookup.end()) ids.push_back(it->second);
        if (ids.empty()) continue;
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        auto [it, inserted] = seen.try_emplace(ids, static_cast<SentenceId>(table.sentences.size()));
        if (inserted) table.sentences.push_back({it->second, ids, {}});
        const Occurrence occ{corpus.documents[raw.document].patient, raw.document};
        table.sentences[it->second].occurrences.push_back(occ);
        ++table.raw_sentences;
    }

    auto& counts = table.vocabulary.sentence_counts;
    counts.assign(vocabulary.tokens.size(), 0);
    for (const auto& s : table.sentences)
        for (auto t : s.tokens) ++counts[t];
    table.vocabulary.unique_sentences = table.sentences.size();
    return table;
}

SentenceTable build_sentence_table(std::span<const Document> documents, ParserMode mode,
                                   const VocabularyOptions& options, unsigned threads) {
    const auto corpus = tokenize_documents(documents, mode, threads);
    const auto vocab = build_vocabulary(corpus, options);
    auto table = deduplicate(corpus, vocab);
    table.mode = mode;
    if (table.sentences.empty())
        throw Error(ErrorKind::EmptyCorpus, "no sentence survives vocabulary filtering");
    return table;
}

void write_sentence_table(const SentenceTable& table, const std::filesystem::path& dir,
                          const VocabularyOptions& options) {
    std::filesystem::create_directories(dir);
    {
        auto out = tsv::open_out(dir / "sentences.tsv");
        out << "sentence_id\ttokens\toccurrences\n";
        for (const auto& s : table.sentences) {
            out << s.id << '\t';
            for (std::size_t i = 0; i < s.tokens.size(); ++i) out << (i ? " " : "") << s.tokens[i];
            out << '\t' << s.occurrences.size() << '\n';
        }
    }
    {
        auto out = tsv::open_out(dir / "occurrences.tsv");
        out << "sentence_id\tdocument\tpatient_id\tdoc_id\n";
        for (const auto& s : table.sentences)
            for (const auto& o : s.occurrences)
                out << s.id << '\t' << o.document << '\t' << table.patients[o.patient] << '\t'
                    << table.documents[o.document].doc_id << '\n';
    }
    {
        auto out = tsv::open_out(dir / "documents.tsv");
        out << "document\tpatient_id\tdoc_id\n";
        for (std::size_t d = 0; d < table.documents.size(); ++d)
            out << d << '\t' << table.patients[table.documents[d].patient] << '\t'
                << table.documents[d].doc_id << '\n';
    }
    {
        auto out = tsv::open_out(dir / "vocabulary.tsv");
        out << "token\ttoken_id\tn_t\tflags\toccurrences\tsentence_frequency\n";
        const auto& vocab = table.vocabulary;
        for (const auto& s : vocab.stats) {
            out << s.token << '\t';
            if (auto id = vocab.find(s.token); id && !s.stop && !s.rare) {
                out << *id << '\t' << vocab.sentence_counts[*id] << "\tretained";
            } else {
                out << "-\t-\t";
                if (s.stop && s.rare) out << "stop,rare";
                else if (s.stop) out << "stop";
                else out << "rare";
            }
            out << '\t' << s.occurrences << '\t' << s.sentence_frequency << '\n';
        }
    }
    json meta = {
        {"mode", to_string(table.mode)},
        {"stop_count", options.stop_count},
        {"rare_min", options.rare_min},
        {"unique_sentences", table.vocabulary.unique_sentences},
        {"raw_sentences", table.raw_sentences},
        {"patients", table.patients.size()},
        {"documents", table.documents.size()},
        {"retained_tokens", table.vocabulary.size()},
    };
    auto out = tsv::open_out(dir / "tokenize.json");
    out << meta.dump(2) << '\n';
}

SentenceTable read_sentence_table(const std::filesystem::path& dir) {
    SentenceTable table;
    std::string line;
    {
        auto in = tsv::open_in(dir / "tokenize.json");
        json meta;
        try {
            meta = json::parse(in);
            table.mode = parse_mode(meta.at("mode").get<std::string>());
            table.raw_sentences = meta.at("raw_sentences").get<std::uint64_t>();
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Parse, (dir / "tokenize.json").string() + ": " + e.what());
        }
    }
    {
        auto in = tsv::open_in(dir / "vocabulary.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            const auto f = tsv::split(line);
            if (f.size() != 6) throw Error(ErrorKind::Parse, "vocabulary.tsv: expected 6 columns");
            TokenStats s;
            s.token = std::string(f[0]);
            s.stop = f[3].find("stop") != std::string_view::npos;
            s.rare = f[3].find("rare") != std::string_view::npos;
            s.occurrences = static_cast<std::uint64_t>(tsv::parse_int(f[4], "vocabulary.tsv"));
            s.sentence_frequency = static_cast<std::uint64_t>(tsv::parse_int(f[5], "vocabulary.tsv"));
            if (f[3] == "retained") {
                const auto id = tsv::parse_int(f[1], "vocabulary.tsv");
                if (id != static_cast<long long>(table.vocabulary.tokens.size()))
                    throw Error(ErrorKind::Parse, "vocabulary.tsv: token ids must be dense and ordered");
                table.vocabulary.tokens.push_back(s.token);
                table.vocabulary.sentence_counts.push_back(
                    static_cast<std::uint64_t>(tsv::parse_int(f[2], "vocabulary.tsv")));
            }
            table.vocabulary.stats.push_back(std::move(s));
        }
    }
    std::unordered_map<std::string, std::uint32_t> patient_index;
    {
        auto in = tsv::open_in(dir / "documents.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            const auto f = tsv::split(line);
            if (f.size() != 3) throw Error(ErrorKind::Parse, "documents.tsv: expected 3 columns");
            auto [it, inserted] = patient_index.try_emplace(
                std::string(f[1]), static_cast<std::uint32_t>(table.patients.size()));
            if (inserted) table.patients.emplace_back(f[1]);
            table.documents.push_back({it->second, std::string(f[2])});
        }
    }
    {
        auto in = tsv::open_in(dir / "sentences.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            const auto f = tsv::split(line);
            if (f.size() != 3) throw Error(ErrorKind::Parse, "sentences.tsv: expected 3 columns");
            TokenizedSentence s;
            s.id = static_cast<SentenceId>(tsv::parse_int(f[0], "sentences.tsv"));
            if (s.id != table.sentences.size())
                throw Error(ErrorKind::Parse, "sentences.tsv: sentence ids must be dense and ordered");
            for (auto t : tsv::split(f[1], ' '))
                s.tokens.push_back(static_cast<TokenId>(tsv::parse_int(t, "sentences.tsv")));
            table.sentences.push_back(std::move(s));
        }
    }
    {
        auto in = tsv::open_in(dir / "occurrences.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            const auto f = tsv::split(line);
            if (f.size() != 4) throw Error(ErrorKind::Parse, "occurrences.tsv: expected 4 columns");
            const auto sid = static_cast<std::size_t>(tsv::parse_int(f[0], "occurrences.tsv"));
            const auto doc = static_cast<std::size_t>(tsv::parse_int(f[1], "occurrences.tsv"));
            if (sid >= table.sentences.size() || doc >= table.documents.size())
                throw Error(ErrorKind::Parse, "occurrences.tsv: index out of range");
            table.sentences[sid].occurrences.push_back(
                {table.documents[doc].patient, static_cast<std::uint32_t>(doc)});
        }
    }
    table.vocabulary.unique_sentences = table.sentences.size();
    return table;
}

} // namespace phenex
