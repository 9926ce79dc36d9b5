#include "phenex/error.hpp"
#include "phenex/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace phenex;
namespace fs = std::filesystem;

namespace {

struct TokenizeArgs {
    fs::path input, out;
    std::string mode = "word";
    VocabularyOptions vocab;
    unsigned threads = 0;
};

struct KnnArgs {
    fs::path sentences, out;
    std::string scheme = "logisf";
    std::size_t k = 50;
    unsigned threads = 0;
};

struct ClusterArgs {
    fs::path knn, out;
    LouvainOptions louvain;
    unsigned threads = 0;
};

struct FeaturizeArgs {
    fs::path sentences, clusters, covariates, out;
    bool tokens = true;
    FeatureOptions options;
};

struct AssociateArgs {
    std::vector<fs::path> features;
    fs::path genotypes, covariates, out;
    StudyOptions study;
    CovariateOptions cov;
    std::optional<std::uint64_t> permute_seed;
    GridSpec grid;
};

struct SynthArgs {
    std::uint64_t seed = 1;
    std::size_t patients = 2000;
    std::size_t planted = 10;
    double beta = 2.5;
    fs::path out;
};

struct RunArgs {
    fs::path config;
    std::optional<fs::path> out;
    std::optional<std::uint64_t> seed, permute_seed;
    std::optional<std::size_t> k, stop, min, rare;
    std::optional<std::uint64_t> rare_min;
    std::optional<std::string> scheme;
    std::optional<double> fdr;
    std::optional<unsigned> threads;
    bool grid = false;
};

struct ReportArgs {
    fs::path associations, out;
};

void add_study_options(CLI::App* cmd, AssociateArgs& a) {
    cmd->add_option("--features", a.features, "Feature directory (repeatable)")->required();
    cmd->add_option("--genotypes", a.genotypes, "Genotype TSV")->required();
    cmd->add_option("--covariates", a.covariates, "Covariate TSV")->required();
    cmd->add_option("--min", a.study.min_patients, "Minimum patients per gene and feature");
    cmd->add_option("--rare", a.study.rare_patients, "Rare threshold for the rare-rare skip");
    cmd->add_option("--fdr", a.study.fdr, "Benjamini-Hochberg level");
    cmd->add_option("--min-type-patients", a.cov.min_type_patients, "Pool cancer types below this size");
    cmd->add_flag("--log-documents", a.cov.log_documents, "Use log(1 + documents) as covariate");
    cmd->add_option("--threads", a.study.threads, "Worker threads (0 = all cores)");
}

AssociateRequest to_request(const AssociateArgs& a) {
    AssociateRequest r;
    r.features = a.features;
    r.genotypes = a.genotypes;
    r.covariates = a.covariates;
    r.study = a.study;
    r.covariate_options = a.cov;
    r.permute_seed = a.permute_seed;
    return r;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sentence-cluster phenotyping and genotype association toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    TokenizeArgs tok;
    auto* c_tok = app.add_subcommand("tokenize", "Split, tokenize, filter and deduplicate a JSONL corpus");
    c_tok->add_option("--input", tok.input, "Corpus JSONL")->required();
    c_tok->add_option("--mode", tok.mode, "word or codes")->check(CLI::IsMember({"word", "codes"}));
    c_tok->add_option("--stop", tok.vocab.stop_count, "Number of most frequent tokens dropped");
    c_tok->add_option("--rare-min", tok.vocab.rare_min, "Tokens with fewer occurrences are dropped");
    c_tok->add_option("--threads", tok.threads, "Worker threads (0 = all cores)");
    c_tok->add_option("--out", tok.out, "Sentence directory")->required();

    KnnArgs knn;
    auto* c_knn = app.add_subcommand("knn", "Exact top-k weighted-Jaccard neighbors");
    c_knn->add_option("--sentences", knn.sentences, "Sentence directory")->required();
    c_knn->add_option("--scheme", knn.scheme, "basic, isf or logisf")
        ->check(CLI::IsMember({"basic", "isf", "logisf"}));
    c_knn->add_option("--k", knn.k, "Neighbors per sentence")->check(CLI::PositiveNumber);
    c_knn->add_option("--threads", knn.threads, "Worker threads (0 = all cores)");
    c_knn->add_option("--out", knn.out, "Neighbor TSV")->required();

    ClusterArgs cl;
    auto* c_cl = app.add_subcommand("cluster", "Louvain clustering of the kNN graph");
    c_cl->add_option("--knn", cl.knn, "Neighbor TSV")->required();
    c_cl->add_option("--seed", cl.louvain.seed, "Louvain seed");
    c_cl->add_option("--resolution", cl.louvain.resolution, "Modularity resolution")->check(CLI::PositiveNumber);
    c_cl->add_option("--threads", cl.threads, "Worker threads (0 = all cores)");
    c_cl->add_option("--out", cl.out, "Cluster directory")->required();

    FeaturizeArgs fe;
    auto* c_fe = app.add_subcommand("featurize", "Patient x feature matrices");
    c_fe->add_option("--sentences", fe.sentences, "Sentence directory")->required();
    c_fe->add_option("--clusters", fe.clusters, "Cluster directory");
    c_fe->add_flag("--tokens,!--no-tokens", fe.tokens, "Emit token features (default on)");
    c_fe->add_option("--covariates", fe.covariates, "Covariate TSV defining the cohort");
    c_fe->add_option("--min", fe.options.min_patients, "Drop features seen in fewer patients");
    c_fe->add_option("--rare", fe.options.rare_patients, "Rare flag threshold");
    c_fe->add_option("--out", fe.out, "Output directory (one subdirectory per class)")->required();

    AssociateArgs as;
    auto* c_as = app.add_subcommand("associate", "Logistic association tests with BH control");
    add_study_options(c_as, as);
    c_as->add_option("--permute-seed", as.permute_seed, "Also run the permuted-genotype arm");
    c_as->add_option("--out", as.out, "Output directory")->required();

    AssociateArgs gr;
    std::uint64_t grid_seed = 7;
    auto* c_gr = app.add_subcommand("grid", "Significant counts over a Min x Rare x FDR grid");
    add_study_options(c_gr, gr);
    c_gr->add_option("--grid-min", gr.grid.min_patients, "Min values")->delimiter(',');
    c_gr->add_option("--grid-rare", gr.grid.rare_patients, "Rare values")->delimiter(',');
    c_gr->add_option("--grid-fdr", gr.grid.fdr, "FDR values")->delimiter(',');
    c_gr->add_option("--permute-seed", grid_seed, "Permutation seed");
    c_gr->add_option("--out", gr.out, "Grid TSV")->required();

    SynthArgs sy;
    auto* c_sy = app.add_subcommand("synth", "Seeded synthetic study with planted effects");
    c_sy->add_option("--seed", sy.seed, "Generator seed");
    c_sy->add_option("--patients", sy.patients, "Patients")->check(CLI::PositiveNumber);
    c_sy->add_option("--planted", sy.planted, "Planted gene-family effects");
    c_sy->add_option("--beta", sy.beta, "Planted effect size (log-odds)");
    c_sy->add_option("--out", sy.out, "Output directory")->required();

    RunArgs ru;
    auto* c_ru = app.add_subcommand("run", "Full pipeline from a JSON config");
    c_ru->add_option("--config", ru.config, "Config JSON")->required();
    c_ru->add_option("--out", ru.out, "Override output directory");
    c_ru->add_option("--seed", ru.seed, "Override Louvain seed");
    c_ru->add_option("--permute-seed", ru.permute_seed, "Override permutation seed");
    c_ru->add_option("--k", ru.k, "Override k");
    c_ru->add_option("--scheme", ru.scheme, "Override weighting scheme");
    c_ru->add_option("--stop", ru.stop, "Override stop count");
    c_ru->add_option("--rare-min", ru.rare_min, "Override rare-token minimum");
    c_ru->add_option("--min", ru.min, "Override Min");
    c_ru->add_option("--rare", ru.rare, "Override Rare");
    c_ru->add_option("--fdr", ru.fdr, "Override FDR");
    c_ru->add_option("--threads", ru.threads, "Override worker threads");
    c_ru->add_flag("--grid", ru.grid, "Also compute the default parameter grid");

    ReportArgs re;
    auto* c_re = app.add_subcommand("report", "QQ and volcano tables from association results");
    c_re->add_option("--associations", re.associations, "Association directory")->required();
    c_re->add_option("--out", re.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code(ErrorKind::Usage);
    }

    try {
        if (*c_tok) {
            const auto t = tokenize_stage(tok.input, parse_mode(tok.mode), tok.vocab, tok.out, tok.threads);
            std::cerr << t.sentences.size() << " unique sentences, " << t.vocabulary.size()
                      << " retained tokens\n";
        } else if (*c_knn) {
            knn_stage(knn.sentences, parse_scheme(knn.scheme), knn.k, knn.out, knn.threads);
        } else if (*c_cl) {
            const auto meta = cluster_stage(cl.knn, cl.louvain, cl.out, cl.threads);
            std::cerr << meta.clusters << " clusters, modularity " << meta.modularity << '\n';
        } else if (*c_fe) {
            FeaturizeRequest req;
            req.sentence_dir = fe.sentences;
            if (!fe.clusters.empty()) req.cluster_dir = fe.clusters;
            if (!fe.covariates.empty()) req.covariates = fe.covariates;
            req.token_features = fe.tokens;
            req.options = fe.options;
            featurize_stage(req, fe.out);
        } else if (*c_as) {
            associate_stage(to_request(as), as.out);
        } else if (*c_gr) {
            grid_stage(to_request(gr), gr.grid, grid_seed, gr.out);
        } else if (*c_sy) {
            auto spec = default_synthetic_spec(sy.seed, sy.planted, sy.beta);
            spec.patients = sy.patients;
            generate_synthetic(spec, sy.out);
        } else if (*c_ru) {
            auto config = load_config(ru.config);
            if (ru.out) config.out = *ru.out;
            if (ru.seed) config.louvain.seed = *ru.seed;
            if (ru.permute_seed) config.permute_seed = *ru.permute_seed;
            if (ru.k) config.k = *ru.k;
            if (ru.scheme) config.scheme = parse_scheme(*ru.scheme);
            if (ru.stop) config.vocabulary.stop_count = *ru.stop;
            if (ru.rare_min) config.vocabulary.rare_min = *ru.rare_min;
            if (ru.min) config.study.min_patients = *ru.min;
            if (ru.rare) config.study.rare_patients = *ru.rare;
            if (ru.fdr) config.study.fdr = *ru.fdr;
            if (ru.threads) config.threads = config.study.threads = *ru.threads;
            if (ru.grid && !config.grid) config.grid = GridSpec{};
            run_pipeline(config);
        } else if (*c_re) {
            report_stage(re.associations, re.out);
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(ErrorKind::Io);
    }
    return 0;
}
