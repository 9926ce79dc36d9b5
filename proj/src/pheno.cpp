#include "phenex/pheno.hpp"

#include "phenex/error.hpp"
#include "phenex/tsv.hpp"

#include <json.hpp>

#include <algorithm>
#include <unordered_map>

namespace phenex {

namespace {

constexpr std::uint32_t kNotInCohort = UINT32_MAX;

std::vector<std::uint32_t> cohort_map(const SentenceTable& table,
                                      std::span<const std::string> patients) {
    std::unordered_map<std::string_view, std::uint32_t> index;
    for (std::uint32_t i = 0; i < patients.size(); ++i)
        if (!index.emplace(patients[i], i).second)
            throw Error(ErrorKind::PatientMismatch, "duplicate patient '" + patients[i] + "'");
    std::vector<std::uint32_t> map(table.patients.size(), kNotInCohort);
    for (std::size_t p = 0; p < table.patients.size(); ++p)
        if (auto it = index.find(table.patients[p]); it != index.end()) map[p] = it->second;
    return map;
}

std::vector<std::uint32_t> sentence_patients(const TokenizedSentence& s,
                                             std::span<const std::uint32_t> map) {
    std::vector<std::uint32_t> out;
    for (const auto& o : s.occurrences)
        if (map[o.patient] != kNotInCohort) out.push_back(map[o.patient]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

void normalize(std::vector<std::uint32_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Drops columns under the minimum and fills counts / rarity.
FeatureMatrix assemble(std::string family, FeatureKind kind, std::span<const std::string> patients,
                       std::vector<FeatureInfo> infos, std::vector<std::vector<std::uint32_t>> columns,
                       std::vector<std::vector<SentenceId>> sources, const FeatureOptions& options) {
    FeatureMatrix m;
    m.family = std::move(family);
    m.kind = kind;
    m.patients.assign(patients.begin(), patients.end());
    for (std::size_t j = 0; j < infos.size(); ++j) {
        normalize(columns[j]);
        const auto count = columns[j].size();
        if (count < options.min_patients || count == 0) continue;
        infos[j].count = count;
        infos[j].rare = count < options.rare_patients;
        m.features.push_back(std::move(infos[j]));
        m.columns.push_back(std::move(columns[j]));
        m.sources.push_back(std::move(sources[j]));
    }
    return m;
}

} // namespace

const char* to_string(FeatureKind kind) noexcept {
    return kind == FeatureKind::Token ? "token" : "cluster";
}

FeatureKind parse_feature_kind(std::string_view name) {
    if (name == "token") return FeatureKind::Token;
    if (name == "cluster") return FeatureKind::Cluster;
    throw Error(ErrorKind::Parse, "unknown feature kind '" + std::string(name) + "'");
}

std::string token_family(ParserMode mode) { return mode == ParserMode::Codes ? "CUI" : "WORD"; }
std::string cluster_family(ParserMode mode) { return mode == ParserMode::Codes ? "CSC" : "WSC"; }

FeatureMatrix featurize_tokens(const SentenceTable& table, std::span<const std::string> patients,
                               const FeatureOptions& options) {
    const auto map = cohort_map(table, patients);
    const auto vocab = table.vocabulary.size();
    std::vector<std::vector<std::uint32_t>> columns(vocab);
    std::vector<std::vector<SentenceId>> sources(vocab);
    for (const auto& s : table.sentences) {
        const auto who = sentence_patients(s, map);
        for (auto t : s.tokens) {
            sources[t].push_back(s.id);
            columns[t].insert(columns[t].end(), who.begin(), who.end());
        }
    }
    const auto family = token_family(table.mode);
    std::vector<FeatureInfo> infos(vocab);
    for (TokenId t = 0; t < vocab; ++t)
        infos[t] = {family + ":" + table.vocabulary.tokens[t], table.vocabulary.tokens[t], 0, false};
    return assemble(family, FeatureKind::Token, patients, std::move(infos), std::move(columns),
                    std::move(sources), options);
}

FeatureMatrix featurize_clusters(const SentenceTable& table, const Clustering& clustering,
                                 std::span<const std::string> patients,
                                 const FeatureOptions& options) {
    if (clustering.cluster_of.size() != table.sentences.size())
        throw Error(ErrorKind::Parse, "clustering does not cover the sentence table");
    const auto map = cohort_map(table, patients);
    const auto clusters = clustering.members.size();
    std::vector<std::vector<std::uint32_t>> columns(clusters);
    for (const auto& s : table.sentences) {
        const auto who = sentence_patients(s, map);
        auto& col = columns[clustering.cluster_of[s.id]];
        col.insert(col.end(), who.begin(), who.end());
    }
    const auto family = cluster_family(table.mode);
    std::vector<FeatureInfo> infos(clusters);
    for (std::size_t c = 0; c < clusters; ++c) {
        std::string label;
        for (auto t : table.sentences[clustering.medoids[c]].tokens) {
            if (!label.empty()) label += ' ';
            label += table.vocabulary.tokens[t];
        }
        infos[c] = {family + ":" + std::to_string(c), std::move(label), 0, false};
    }
    return assemble(family, FeatureKind::Cluster, patients, std::move(infos), std::move(columns),
                    clustering.members, options);
}

std::vector<FeatureSimilarity> feature_redundancy(const FeatureMatrix& a, const FeatureMatrix& b,
                                                  double threshold, RedundancyMode mode) {
    if (a.patients != b.patients)
        throw Error(ErrorKind::PatientMismatch, "feature matrices use different patient orderings");

    auto sets = [&](const FeatureMatrix& m) -> const std::vector<std::vector<std::uint32_t>>& {
        return mode == RedundancyMode::Patients ? m.columns : m.sources;
    };
    const auto& sa = sets(a);
    const auto& sb = sets(b);

    std::size_t universe = mode == RedundancyMode::Patients ? a.patients.size() : 0;
    if (mode == RedundancyMode::Sentences)
        for (const auto* group : {&sa, &sb})
            for (const auto& col : *group)
                if (!col.empty()) universe = std::max<std::size_t>(universe, col.back() + 1);

    std::vector<std::vector<std::uint32_t>> rows(universe);
    for (std::uint32_t j = 0; j < sb.size(); ++j)
        for (auto r : sb[j]) rows[r].push_back(j);

    std::vector<FeatureSimilarity> out;
    std::vector<std::size_t> overlap(sb.size(), 0);
    std::vector<std::uint32_t> touched;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        touched.clear();
        for (auto r : sa[i])
            for (auto j : rows[r]) {
                if (overlap[j]++ == 0) touched.push_back(j);
            }
        std::sort(touched.begin(), touched.end());
        for (auto j : touched) {
            const auto inter = static_cast<double>(overlap[j]);
            const auto uni = static_cast<double>(sa[i].size() + sb[j].size()) - inter;
            const double phi = inter / uni;
            out.push_back({i, j, phi, phi > threshold});
            overlap[j] = 0;
        }
    }
    return out;
}

FeatureMatrix align_patients(const FeatureMatrix& matrix, std::span<const std::string> patients) {
    std::unordered_map<std::string_view, std::uint32_t> index;
    for (std::uint32_t i = 0; i < patients.size(); ++i) index.emplace(patients[i], i);
    std::vector<std::uint32_t> map(matrix.patients.size());
    for (std::size_t p = 0; p < matrix.patients.size(); ++p) {
        const auto it = index.find(matrix.patients[p]);
        if (it == index.end())
            throw Error(ErrorKind::PatientMismatch,
                        "patient '" + matrix.patients[p] + "' is not in the cohort");
        map[p] = it->second;
    }
    FeatureMatrix out = matrix;
    out.patients.assign(patients.begin(), patients.end());
    for (auto& col : out.columns) {
        for (auto& r : col) r = map[r];
        std::sort(col.begin(), col.end());
    }
    return out;
}

void write_features(const std::filesystem::path& dir, const FeatureMatrix& matrix) {
    std::filesystem::create_directories(dir);
    {
        auto out = tsv::open_out(dir / "patients.tsv");
        out << "patient_id\n";
        for (const auto& p : matrix.patients) out << p << '\n';
    }
    {
        auto out = tsv::open_out(dir / "features.tsv");
        out << "feature_id\tclass\tcount\trare_flag\tlabel\n";
        for (const auto& f : matrix.features)
            out << f.id << '\t' << matrix.family << '\t' << f.count << '\t' << (f.rare ? 1 : 0)
                << '\t' << f.label << '\n';
    }
    {
        auto out = tsv::open_out(dir / "matrix.tsv");
        out << "patient_id\tfeature_id\tvalue\n";
        for (std::size_t j = 0; j < matrix.columns.size(); ++j)
            for (auto p : matrix.columns[j])
                out << matrix.patients[p] << '\t' << matrix.features[j].id << "\t1\n";
    }
    {
        auto out = tsv::open_out(dir / "sources.tsv");
        out << "feature_id\tsentence_ids\n";
        for (std::size_t j = 0; j < matrix.sources.size(); ++j) {
            out << matrix.features[j].id << '\t';
            for (std::size_t i = 0; i < matrix.sources[j].size(); ++i)
                out << (i ? " " : "") << matrix.sources[j][i];
            out << '\n';
        }
    }
    const nlohmann::json j = {{"family", matrix.family}, {"kind", to_string(matrix.kind)}};
    auto out = tsv::open_out(dir / "features.json");
    out << j.dump(2) << '\n';
}

FeatureMatrix read_features(const std::filesystem::path& dir) {
    FeatureMatrix m;
    std::string line;
    {
        auto in = tsv::open_in(dir / "features.json");
        try {
            const auto j = nlohmann::json::parse(in);
            m.family = j.at("family").get<std::string>();
            m.kind = parse_feature_kind(j.at("kind").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, (dir / "features.json").string() + ": " + e.what());
        }
    }
    std::unordered_map<std::string, std::uint32_t> patient_index;
    {
        auto in = tsv::open_in(dir / "patients.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            patient_index.emplace(line, static_cast<std::uint32_t>(m.patients.size()));
            m.patients.push_back(line);
        }
    }
    std::unordered_map<std::string, std::uint32_t> feature_index;
    {
        auto in = tsv::open_in(dir / "features.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            const auto f = tsv::split(line);
            if (f.size() != 5) throw Error(ErrorKind::Parse, "features.tsv: expected 5 columns");
            FeatureInfo info;
            info.id = std::string(f[0]);
            info.count = static_cast<std::size_t>(tsv::parse_int(f[2], "features.tsv"));
            info.rare = f[3] == "1";
            info.label = std::string(f[4]);
            feature_index.emplace(info.id, static_cast<std::uint32_t>(m.features.size()));
            m.features.push_back(std::move(info));
        }
    }
    m.columns.resize(m.features.size());
    m.sources.resize(m.features.size());
    {
        auto in = tsv::open_in(dir / "matrix.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            const auto f = tsv::split(line);
            if (f.size() != 3) throw Error(ErrorKind::Parse, "matrix.tsv: expected 3 columns");
            const auto p = patient_index.find(std::string(f[0]));
            const auto j = feature_index.find(std::string(f[1]));
            if (p == patient_index.end() || j == feature_index.end())
                throw Error(ErrorKind::Parse, "matrix.tsv: unknown patient or feature in '" + line + "'");
            m.columns[j->second].push_back(p->second);
        }
    }
    for (std::size_t j = 0; j < m.columns.size(); ++j) {
        normalize(m.columns[j]);
        if (m.columns[j].size() != m.features[j].count)
            throw Error(ErrorKind::Parse, "matrix.tsv: column sum differs from count for " + m.features[j].id);
    }
    {
        auto in = tsv::open_in(dir / "sources.tsv");
        tsv::next_line(in, line);
        while (tsv::next_line(in, line)) {
            const auto f = tsv::split(line);
            if (f.size() != 2) throw Error(ErrorKind::Parse, "sources.tsv: expected 2 columns");
            const auto j = feature_index.find(std::string(f[0]));
            if (j == feature_index.end()) throw Error(ErrorKind::Parse, "sources.tsv: unknown feature");
            if (!f[1].empty())
                for (auto s : tsv::split(f[1], ' '))
                    m.sources[j->second].push_back(static_cast<SentenceId>(tsv::parse_int(s, "sources.tsv")));
        }
    }
    return m;
}

} // namespace phenex
