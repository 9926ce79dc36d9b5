#include "phenex/pipeline.hpp"

#include "phenex/error.hpp"
#include "phenex/random.hpp"
#include "phenex/tsv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <set>

namespace phenex {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t i, int width) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%s%0*zu", prefix, width, i);
    return buf.data();
}

std::string gene_name(std::size_t g) { return numbered("G", g + 1, 2); }
std::string family_name(std::size_t f) { return numbered("F", f + 1, 2); }
std::string patient_name(std::size_t i) { return numbered("P", i + 1, 5); }
std::string type_name(std::size_t t) { return numbered("T", t + 1, 1); }

double logit(double p) { return std::log(p / (1.0 - p)); }

std::size_t categorical(Engine& rng, std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return weights.size() - 1;
}

std::size_t uniform_between(Engine& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(uniform_below(rng, hi - lo + 1));
}

// k distinct values from [base, base + range).
void draw_distinct(Engine& rng, std::uint32_t base, std::size_t range, std::size_t k,
                   std::vector<std::uint32_t>& out) {
    k = std::min(k, range);
    const auto start = out.size();
    while (out.size() - start < k) {
        const auto t = base + static_cast<std::uint32_t>(uniform_below(rng, range));
        if (std::find(out.begin() + static_cast<std::ptrdiff_t>(start), out.end(), t) == out.end())
            out.push_back(t);
    }
}

struct Patient {
    std::size_t type;
    std::size_t documents;
    bool lynch;
};

} // namespace

std::string synthetic_code(std::uint32_t token) { return numbered("C", token + 1, 7); }

std::string synthetic_word(std::uint32_t token) {
    static constexpr char consonants[] = "bcdfghjklmnprstvwxyz";
    static constexpr char vowels[] = "aeiou";
    std::string word;
    std::uint32_t n = token;
    do {
        const auto s = n % 100;
        word += consonants[s / 5];
        word += vowels[s % 5];
        n /= 100;
    } while (n != 0);
    return word + "n";
}

std::size_t SyntheticSpec::lexicon_size() const {
    std::size_t size = fillers + vocabulary;
    for (const auto& f : families)
        for (auto t : f.core) size = std::max<std::size_t>(size, t + 1);
    return size;
}

void SyntheticSpec::validate() const {
    auto invalid = [](const std::string& what) { throw Error(ErrorKind::SpecInvalid, what); };
    if (patients == 0) invalid("synthetic spec needs patients");
    if (type_weights.empty()) invalid("synthetic spec needs at least one cancer type");
    for (double w : type_weights)
        if (!(w > 0.0)) invalid("cancer type weights must be positive");
    if (vocabulary < 4) invalid("background vocabulary needs at least 4 tokens");
    if (background_min == 0 || background_min > background_max)
        invalid("background sentences per document need 1 <= min <= max");
    if (!(document_mean >= 0.0)) invalid("document_mean must be non-negative");
    if (!(lynch_rate >= 0.0 && lynch_rate < 1.0)) invalid("lynch_rate must lie in [0, 1)");
    if (!gene_prevalence.empty()) {
        if (gene_prevalence.size() != genes) invalid("gene_prevalence needs one value per gene");
        for (double p : gene_prevalence)
            if (!(p > 0.0 && p < 1.0)) invalid("gene prevalences must lie in (0, 1)");
    }
    for (std::size_t f = 0; f < families.size(); ++f) {
        const auto& fam = families[f];
        if (fam.core.empty()) invalid("family " + family_name(f) + " has no core tokens");
        if (std::set<std::uint32_t>(fam.core.begin(), fam.core.end()).size() != fam.core.size())
            invalid("family " + family_name(f) + " repeats a core token");
        if (!(fam.prevalence > 0.0 && fam.prevalence <= 1.0))
            invalid("family " + family_name(f) + " prevalence must lie in (0, 1]");
        if (fam.noise_min > fam.noise_max) invalid("family " + family_name(f) + " noise_min exceeds noise_max");
        if (!fam.type_effects.empty() && fam.type_effects.size() != type_weights.size())
            invalid("family " + family_name(f) + " needs one type effect per cancer type");
    }
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& p : planted) {
        if (p.gene >= genes || p.family >= families.size())
            invalid("planted effect references an undefined gene or family");
        if (!std::isfinite(p.beta)) invalid("planted effect size must be finite");
        if (families[p.family].prevalence >= 1.0)
            invalid("planted effect on family " + family_name(p.family) + " with prevalence 1");
        if (!pairs.insert({p.gene, p.family}).second) invalid("planted pair listed twice");
    }
}

SyntheticSpec default_synthetic_spec(std::uint64_t seed, std::size_t planted, double beta) {
    SyntheticSpec spec;
    spec.seed = seed;
    Engine rng(seed ^ 0x5eed5eed5eedULL);
    const std::size_t family_count = 40;
    if (planted > std::min(family_count, spec.genes))
        throw Error(ErrorKind::SpecInvalid, "more planted effects than genes or families");
    for (std::size_t g = 0; g < spec.genes; ++g)
        spec.gene_prevalence.push_back(0.08 + 0.12 * uniform01(rng));
    auto next = static_cast<std::uint32_t>(spec.fillers + spec.vocabulary);
    for (std::size_t f = 0; f < family_count; ++f) {
        SentenceFamily fam;
        for (int c = 0; c < 3; ++c) fam.core.push_back(next++);
        fam.prevalence = 0.08 + 0.17 * uniform01(rng);
        for (std::size_t t = 0; t < spec.type_weights.size(); ++t)
            fam.type_effects.push_back(0.3 * standard_normal(rng));
        fam.document_effect = 0.03;
        fam.lynch_effect = f < 2 ? 0.8 : 0.0;
        spec.families.push_back(std::move(fam));
    }
    const auto genes = random_permutation(spec.genes, rng());
    const auto fams = random_permutation(family_count, rng());
    for (std::size_t i = 0; i < planted; ++i) spec.planted.push_back({genes[i], fams[i], beta});
    return spec;
}

SyntheticFiles generate_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
    spec.validate();
    Engine rng(spec.seed);
    const auto types = spec.type_weights.size();

    std::vector<Patient> patients(spec.patients);
    for (auto& p : patients) {
        p.type = categorical(rng, spec.type_weights);
        p.documents = 1 + poisson(rng, spec.document_mean);
        p.lynch = bernoulli(rng, spec.lynch_rate);
    }

    // Genes lean on cancer type, and the first gene on Lynch status, so the
    // covariates matter.
    std::vector<double> base_prevalence = spec.gene_prevalence;
    if (base_prevalence.empty())
        for (std::size_t g = 0; g < spec.genes; ++g) base_prevalence.push_back(0.08 + 0.12 * uniform01(rng));
    std::vector<std::vector<double>> gene_type_shift(spec.genes, std::vector<double>(types));
    for (auto& row : gene_type_shift)
        for (auto& v : row) v = 0.3 * standard_normal(rng);
    std::vector<std::vector<std::uint8_t>> genotype(spec.patients, std::vector<std::uint8_t>(spec.genes));
    for (std::size_t i = 0; i < spec.patients; ++i)
        for (std::size_t g = 0; g < spec.genes; ++g) {
            double eta = logit(base_prevalence[g]) + gene_type_shift[g][patients[i].type];
            if (g == 0 && patients[i].lynch) eta += 1.5;
            genotype[i][g] = bernoulli(rng, sigmoid(eta)) ? 1 : 0;
        }

    std::vector<std::vector<std::size_t>> expressed(spec.patients);
    for (std::size_t i = 0; i < spec.patients; ++i)
        for (std::size_t f = 0; f < spec.families.size(); ++f) {
            const auto& fam = spec.families[f];
            bool on = true;
            if (fam.prevalence < 1.0) {
                double eta = logit(fam.prevalence);
                if (!fam.type_effects.empty()) eta += fam.type_effects[patients[i].type];
                eta += fam.document_effect * static_cast<double>(patients[i].documents);
                if (patients[i].lynch) eta += fam.lynch_effect;
                for (const auto& p : spec.planted)
                    if (p.family == f && genotype[i][p.gene]) eta += p.beta;
                on = bernoulli(rng, sigmoid(eta));
            }
            if (on) expressed[i].push_back(f);
        }

    fs::create_directories(out_dir);
    SyntheticFiles files;
    files.codes_corpus = out_dir / "corpus_codes.jsonl";
    files.words_corpus = out_dir / "corpus_words.jsonl";
    files.genotypes = out_dir / "genotypes.tsv";
    files.covariates = out_dir / "covariates.tsv";
    files.truth = out_dir / "truth.tsv";
    files.families = out_dir / "families.tsv";
    files.patient_families = out_dir / "patient_families.tsv";
    files.config = out_dir / "config.json";

    const auto filler_base = std::uint32_t{0};
    const auto noise_base = static_cast<std::uint32_t>(spec.fillers);
    auto add_fillers = [&](std::vector<std::uint32_t>& s) {
        if (spec.fillers > 0) draw_distinct(rng, filler_base, spec.fillers, uniform_between(rng, 2, 4), s);
    };

    auto codes = tsv::open_out(files.codes_corpus);
    auto words = tsv::open_out(files.words_corpus);
    for (std::size_t i = 0; i < spec.patients; ++i) {
        std::vector<std::vector<std::vector<std::uint32_t>>> docs(patients[i].documents);
        for (auto& doc : docs) {
            const auto n = uniform_between(rng, spec.background_min, spec.background_max);
            for (std::size_t s = 0; s < n; ++s) {
                std::vector<std::uint32_t> sentence;
                draw_distinct(rng, noise_base, spec.vocabulary, uniform_between(rng, 2, 4), sentence);
                add_fillers(sentence);
                doc.push_back(std::move(sentence));
            }
        }
        for (auto f : expressed[i]) {
            const auto& fam = spec.families[f];
            const std::size_t emitted = bernoulli(rng, 0.3) ? 2 : 1;
            for (std::size_t e = 0; e < emitted; ++e) {
                std::vector<std::uint32_t> sentence = fam.core;
                const auto noise = uniform_between(rng, fam.noise_min, fam.noise_max);
                if (noise > 0) draw_distinct(rng, noise_base, spec.vocabulary, noise, sentence);
                add_fillers(sentence);
                auto& doc = docs[uniform_below(rng, docs.size())];
                const auto at = uniform_below(rng, doc.size() + 1);
                doc.insert(doc.begin() + static_cast<std::ptrdiff_t>(at), std::move(sentence));
            }
        }
        for (std::size_t d = 0; d < docs.size(); ++d) {
            auto& doc = docs[d];
            nlohmann::json code_sentences = nlohmann::json::array();
            std::string text;
            for (auto& sentence : doc) {
                shuffle(std::span<std::uint32_t>(sentence), rng);
                nlohmann::json cs = nlohmann::json::array();
                std::string line;
                for (auto t : sentence) {
                    cs.push_back(synthetic_code(t));
                    if (!line.empty()) line += ' ';
                    line += synthetic_word(t);
                }
                code_sentences.push_back(std::move(cs));
                if (line.empty()) continue;
                line[0] = static_cast<char>(line[0] - 'a' + 'A');
                if (!text.empty()) text += ' ';
                text += line + '.';
            }
            const auto doc_id = numbered("D", d + 1, 2);
            codes << nlohmann::json{{"patient_id", patient_name(i)}, {"doc_id", doc_id},
                                    {"token_sentences", code_sentences}}
                         .dump()
                  << '\n';
            words << nlohmann::json{{"patient_id", patient_name(i)}, {"doc_id", doc_id}, {"text", text}}.dump()
                  << '\n';
        }
    }
    codes.close();
    words.close();

    {
        auto out = tsv::open_out(files.genotypes);
        out << "patient_id\tgene\n";
        for (std::size_t i = 0; i < spec.patients; ++i)
            for (std::size_t g = 0; g < spec.genes; ++g)
                if (genotype[i][g]) out << patient_name(i) << '\t' << gene_name(g) << '\n';
    }
    {
        auto out = tsv::open_out(files.covariates);
        out << "patient_id\tcancer_type\tn_documents\tlynch\n";
        for (std::size_t i = 0; i < spec.patients; ++i)
            out << patient_name(i) << '\t' << type_name(patients[i].type) << '\t' << patients[i].documents
                << '\t' << (patients[i].lynch ? 1 : 0) << '\n';
    }
    {
        auto out = tsv::open_out(files.truth);
        out << "gene\tfamily\tbeta\n";
        for (const auto& p : spec.planted)
            out << gene_name(p.gene) << '\t' << family_name(p.family) << '\t' << tsv::real(p.beta) << '\n';
    }
    {
        auto out = tsv::open_out(files.families);
        out << "family\tprevalence\tcodes\twords\n";
        for (std::size_t f = 0; f < spec.families.size(); ++f) {
            std::string c, w;
            for (auto t : spec.families[f].core) {
                if (!c.empty()) c += ' ', w += ' ';
                c += synthetic_code(t);
                w += synthetic_word(t);
            }
            out << family_name(f) << '\t' << tsv::real(spec.families[f].prevalence) << '\t' << c << '\t' << w
                << '\n';
        }
    }
    {
        auto out = tsv::open_out(files.patient_families);
        out << "patient_id\tfamily\n";
        for (std::size_t i = 0; i < spec.patients; ++i)
            for (auto f : expressed[i]) out << patient_name(i) << '\t' << family_name(f) << '\n';
    }
    {
        const nlohmann::json config = {
            {"inputs",
             {{{"name", "codes"}, {"path", "corpus_codes.jsonl"}, {"mode", "codes"}, {"token_features", true}},
              {{"name", "words"}, {"path", "corpus_words.jsonl"}, {"mode", "word"}, {"token_features", false}}}},
            {"genotypes", "genotypes.tsv"},
            {"covariates", "covariates.tsv"},
            {"out", "run"},
        };
        auto out = tsv::open_out(files.config);
        out << config.dump(2) << '\n';
    }
    return files;
}

} // namespace phenex
