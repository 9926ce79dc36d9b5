#include "phenex/pipeline.hpp"

#include "phenex/error.hpp"
#include "phenex/tsv.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace phenex {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string relative_to(const fs::path& target, const fs::path& base) {
    return fs::relative(target, base).generic_string();
}

std::vector<std::string> cohort_from(const fs::path& covariates) {
    std::vector<std::string> ids;
    for (auto& r : read_covariate_records(covariates)) ids.push_back(std::move(r.patient_id));
    return ids;
}

void collect_files(const fs::path& root, const fs::path& target, std::vector<std::pair<std::string, std::string>>& out) {
    std::vector<fs::path> files;
    if (fs::is_regular_file(target)) {
        files.push_back(target);
    } else if (fs::is_directory(target)) {
        for (const auto& e : fs::recursive_directory_iterator(target))
            if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.emplace_back(relative_to(f, root), tsv::sha256_file(f));
}

template <typename T>
T get(const json& j, const char* key, T fallback) {
    const auto it = j.find(key);
    return it == j.end() ? fallback : it->template get<T>();
}

} // namespace

SentenceTable tokenize_stage(const fs::path& input, ParserMode mode, const VocabularyOptions& options,
                             const fs::path& out_dir, unsigned threads) {
    const auto documents = read_documents(input);
    auto table = build_sentence_table(documents, mode, options, threads);
    write_sentence_table(table, out_dir, options);
    return table;
}

void knn_stage(const fs::path& sentence_dir, Scheme scheme, std::size_t k, const fs::path& out_file,
               unsigned threads) {
    if (k == 0) throw Error(ErrorKind::Usage, "k must be positive");
    const auto table = read_sentence_table(sentence_dir);
    const InvertedIndex index(table.token_sets(), WeightScheme(scheme, table.vocabulary));
    const auto lists = knn_all(index, k, threads);
    const auto parent = out_file.parent_path().empty() ? fs::path(".") : out_file.parent_path();
    fs::create_directories(parent);
    KnnMeta meta{scheme, k, table.sentences.size(), relative_to(sentence_dir, parent)};
    write_neighbors(out_file, lists, meta);
}

fs::path sentence_dir_of(const fs::path& knn_file, const KnnMeta& meta) {
    if (meta.sentence_dir.empty())
        throw Error(ErrorKind::Parse, knn_file.string() + ": metadata names no sentence directory");
    const fs::path dir(meta.sentence_dir);
    if (dir.is_absolute()) return dir;
    const auto parent = knn_file.parent_path().empty() ? fs::path(".") : knn_file.parent_path();
    return (parent / dir).lexically_normal();
}

ClusterMeta cluster_stage(const fs::path& knn_file, const LouvainOptions& options, const fs::path& out_dir,
                          unsigned threads) {
    KnnMeta knn;
    const auto lists = read_neighbors(knn_file, &knn);
    const auto sentence_dir = sentence_dir_of(knn_file, knn);
    const auto table = read_sentence_table(sentence_dir);
    if (table.sentences.size() != knn.sentences || lists.size() != table.sentences.size())
        throw Error(ErrorKind::Parse, knn_file.string() + ": neighbor table does not match " +
                                          sentence_dir.string());
    const InvertedIndex index(table.token_sets(), WeightScheme(knn.scheme, table.vocabulary));
    const auto graph = build_graph(lists, table.sentences.size());
    const auto result = louvain(graph, options);
    const auto clustering = make_clustering(result.first_level(), index, threads);
    const auto summaries = summarize(clustering, table);

    fs::create_directories(out_dir);
    ClusterMeta meta;
    meta.scheme = knn.scheme;
    meta.k = knn.k;
    meta.seed = options.seed;
    meta.resolution = options.resolution;
    meta.modularity = clustering.modularity;
    meta.clusters = clustering.members.size();
    meta.levels = result.levels.size();
    meta.novel = novelty_count(summaries);
    meta.sentence_dir = relative_to(sentence_dir, out_dir);
    write_clustering(out_dir, clustering, summaries, meta);
    return meta;
}

std::vector<fs::path> featurize_stage(const FeaturizeRequest& request, const fs::path& out_dir) {
    const auto table = read_sentence_table(request.sentence_dir);
    const auto patients = request.covariates ? cohort_from(*request.covariates) : table.patients;
    std::vector<FeatureMatrix> matrices;
    if (request.token_features) matrices.push_back(featurize_tokens(table, patients, request.options));
    if (request.cluster_dir) {
        const auto clustering = read_clustering(*request.cluster_dir);
        if (clustering.cluster_of.size() != table.sentences.size())
            throw Error(ErrorKind::Parse, request.cluster_dir->string() +
                                              ": cluster assignments do not match the sentence table");
        matrices.push_back(featurize_clusters(table, clustering, patients, request.options));
    }
    if (matrices.empty()) throw Error(ErrorKind::Usage, "nothing to featurize");
    std::vector<fs::path> dirs;
    for (const auto& m : matrices) {
        dirs.push_back(out_dir / m.family);
        write_features(dirs.back(), m);
    }
    return dirs;
}

std::vector<FeatureMatrix> load_feature_dirs(const std::vector<fs::path>& paths) {
    std::vector<FeatureMatrix> out;
    for (const auto& p : paths) {
        if (fs::exists(p / "features.json")) {
            out.push_back(read_features(p));
            continue;
        }
        if (!fs::is_directory(p)) throw Error(ErrorKind::Io, "no feature directory at " + p.string());
        std::vector<fs::path> subdirs;
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_directory() && fs::exists(e.path() / "features.json")) subdirs.push_back(e.path());
        if (subdirs.empty()) throw Error(ErrorKind::Io, "no feature directories under " + p.string());
        std::sort(subdirs.begin(), subdirs.end());
        std::vector<FeatureMatrix> found;
        for (const auto& d : subdirs) found.push_back(read_features(d));
        // Token classes before cluster classes, then by name.
        std::stable_sort(found.begin(), found.end(), [](const FeatureMatrix& a, const FeatureMatrix& b) {
            return a.kind == FeatureKind::Token && b.kind == FeatureKind::Cluster;
        });
        for (auto& m : found) out.push_back(std::move(m));
    }
    std::set<std::string> seen;
    for (const auto& m : out)
        if (!seen.insert(m.family).second)
            throw Error(ErrorKind::Usage, "feature class " + m.family + " given twice");
    return out;
}

StudyInputs load_study(const AssociateRequest& request) {
    StudyInputs in;
    in.covariates = build_covariates(read_covariate_records(request.covariates), request.covariate_options);
    in.genotypes = read_genotypes(request.genotypes, in.covariates.patients);
    for (auto& m : load_feature_dirs(request.features))
        in.features.push_back(align_patients(m, in.covariates.patients));
    return in;
}

void associate_stage(const AssociateRequest& request, const fs::path& out_dir) {
    const auto in = load_study(request);
    const auto records = run_study(in.features, in.genotypes, in.covariates, request.study);
    write_associations(out_dir / "associations.tsv", records);
    if (request.permute_seed) {
        const auto permuted =
            permutation_null(in.features, in.genotypes, in.covariates, *request.permute_seed, request.study);
        write_associations(out_dir / "associations_permuted.tsv", permuted);
    }
}

void grid_stage(const AssociateRequest& request, const GridSpec& grid, std::uint64_t permute_seed,
                const fs::path& out_file) {
    const auto in = load_study(request);
    const auto rows = parameter_grid(in.features, in.genotypes, in.covariates, grid, permute_seed, request.study);
    std::vector<std::string> families;
    for (const auto& m : in.features) families.push_back(m.family);
    write_grid(out_file, rows, families);
}

void report_stage(const fs::path& association_dir, const fs::path& out_dir) {
    const auto truth = read_associations(association_dir / "associations.tsv");
    std::vector<AssociationRecord> permuted;
    if (fs::exists(association_dir / "associations_permuted.tsv"))
        permuted = read_associations(association_dir / "associations_permuted.tsv");
    write_report(out_dir, report_data(truth, permuted));
}

void PipelineConfig::validate() const {
    auto invalid = [](const std::string& what) { throw Error(ErrorKind::SpecInvalid, what); };
    if (inputs.empty()) invalid("config lists no inputs");
    std::set<std::string> names;
    std::set<ParserMode> modes;
    for (const auto& in : inputs) {
        if (in.name.empty() || in.name.find_first_of("/\\") != std::string::npos)
            invalid("input names must be non-empty plain names");
        if (in.name == "features" || in.name == "associations" || in.name == "report")
            invalid("input name '" + in.name + "' is reserved");
        if (!names.insert(in.name).second) invalid("input name '" + in.name + "' used twice");
        if (!modes.insert(in.mode).second)
            invalid("two inputs share a parser mode, their feature classes would collide");
    }
    if (genotypes.empty() || covariates.empty()) invalid("config needs genotypes and covariates");
    if (out.empty()) invalid("config needs an output directory");
    if (k == 0) invalid("k must be positive");
    if (!(louvain.resolution > 0.0)) invalid("resolution must be positive");
    if (study.min_patients == 0) invalid("min must be positive");
    if (!(study.fdr > 0.0 && study.fdr < 1.0)) invalid("fdr must lie in (0, 1)");
    if (grid) {
        if (grid->min_patients.empty() || grid->rare_patients.empty() || grid->fdr.empty())
            invalid("grid axes must be non-empty");
        for (auto v : grid->min_patients)
            if (v == 0) invalid("grid Min values must be positive");
        for (auto v : grid->fdr)
            if (!(v > 0.0 && v < 1.0)) invalid("grid FDR values must lie in (0, 1)");
    }
}

PipelineConfig load_config(const fs::path& path) {
    auto in = tsv::open_in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SpecInvalid, path.string() + ": " + e.what());
    }
    static const std::set<std::string> known{
        "inputs", "genotypes", "covariates", "stop", "rare_min", "scheme", "k", "seed",
        "resolution", "min", "rare", "fdr", "permute_seed", "min_type_patients",
        "log_documents", "grid", "out", "threads"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw Error(ErrorKind::SpecInvalid, path.string() + ": unknown key '" + key + "'");

    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    PipelineConfig c;
    try {
        for (const auto& item : j.at("inputs")) {
            PipelineInput input;
            input.name = item.at("name").get<std::string>();
            input.path = resolve(item.at("path").get<std::string>());
            input.mode = parse_mode(item.value("mode", std::string("codes")));
            input.token_features = item.value("token_features", input.mode == ParserMode::Codes);
            c.inputs.push_back(std::move(input));
        }
        c.genotypes = resolve(j.at("genotypes").get<std::string>());
        c.covariates = resolve(j.at("covariates").get<std::string>());
        c.out = resolve(get<std::string>(j, "out", "run"));
        c.vocabulary.stop_count = get<std::size_t>(j, "stop", c.vocabulary.stop_count);
        c.vocabulary.rare_min = get<std::uint64_t>(j, "rare_min", c.vocabulary.rare_min);
        c.scheme = parse_scheme(get<std::string>(j, "scheme", to_string(c.scheme)));
        c.k = get<std::size_t>(j, "k", c.k);
        c.louvain.seed = get<std::uint64_t>(j, "seed", c.louvain.seed);
        c.louvain.resolution = get<double>(j, "resolution", c.louvain.resolution);
        c.study.min_patients = get<std::size_t>(j, "min", c.study.min_patients);
        c.study.rare_patients = get<std::size_t>(j, "rare", c.study.rare_patients);
        c.study.fdr = get<double>(j, "fdr", c.study.fdr);
        c.permute_seed = get<std::uint64_t>(j, "permute_seed", c.permute_seed);
        c.covariate_options.min_type_patients =
            get<std::size_t>(j, "min_type_patients", c.covariate_options.min_type_patients);
        c.covariate_options.log_documents = get<bool>(j, "log_documents", false);
        c.threads = get<unsigned>(j, "threads", 0u);
        c.study.threads = c.threads;
        if (const auto it = j.find("grid"); it != j.end()) {
            if (it->is_boolean()) {
                if (it->get<bool>()) c.grid = GridSpec{};
            } else {
                GridSpec g;
                g.min_patients = it->value("min", g.min_patients);
                g.rare_patients = it->value("rare", g.rare_patients);
                g.fdr = it->value("fdr", g.fdr);
                c.grid = g;
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SpecInvalid, path.string() + ": " + e.what());
    }
    c.validate();
    return c;
}

RunManifest run_pipeline(const PipelineConfig& config) {
    config.validate();
    const fs::path& out = config.out;
    fs::create_directories(out);
    const auto manifest_path = out / "manifest.json";
    fs::remove(manifest_path);

    json parameters = {
        {"stop", config.vocabulary.stop_count},
        {"rare_min", config.vocabulary.rare_min},
        {"scheme", to_string(config.scheme)},
        {"k", config.k},
        {"resolution", config.louvain.resolution},
        {"min", config.study.min_patients},
        {"rare", config.study.rare_patients},
        {"fdr", config.study.fdr},
        {"min_type_patients", config.covariate_options.min_type_patients},
        {"log_documents", config.covariate_options.log_documents},
    };
    if (config.grid) {
        parameters["grid"] = {{"min", config.grid->min_patients},
                              {"rare", config.grid->rare_patients},
                              {"fdr", config.grid->fdr}};
    }
    json manifest = {
        {"version", kVersion},
        {"parameters", parameters},
        {"seeds", {{"louvain", config.louvain.seed}, {"permutation", config.permute_seed}}},
    };

    RunManifest result;
    json stages = json::array();
    std::string current;
    auto record_stage = [&](const std::string& name, const std::vector<fs::path>& outputs) {
        std::vector<std::pair<std::string, std::string>> files;
        for (const auto& o : outputs) collect_files(out, o, files);
        json artifacts = json::array();
        for (const auto& [p, sum] : files) {
            artifacts.push_back({{"path", p}, {"sha256", sum}});
            result.artifacts.emplace_back(p, sum);
        }
        stages.push_back({{"stage", name}, {"artifacts", artifacts}});
    };
    auto write_manifest = [&] {
        manifest["status"] = result.status;
        if (!result.failed_stage.empty()) {
            manifest["failed_stage"] = result.failed_stage;
            manifest["error"] = result.error;
        }
        manifest["stages"] = stages;
        auto f = tsv::open_out(manifest_path);
        f << manifest.dump(2) << '\n';
    };

    try {
        current = "inputs";
        json inputs = json::array();
        for (const auto& in : config.inputs)
            inputs.push_back({{"name", in.name},
                              {"mode", to_string(in.mode)},
                              {"token_features", in.token_features},
                              {"sha256", tsv::sha256_file(in.path)}});
        manifest["inputs"] = inputs;
        manifest["genotypes_sha256"] = tsv::sha256_file(config.genotypes);
        manifest["covariates_sha256"] = tsv::sha256_file(config.covariates);

        std::vector<fs::path> feature_dirs;
        for (const auto& in : config.inputs) {
            const auto dir = out / in.name;
            current = "tokenize:" + in.name;
            fs::remove_all(dir);
            tokenize_stage(in.path, in.mode, config.vocabulary, dir / "tokens", config.threads);
            record_stage(current, {dir / "tokens"});

            current = "knn:" + in.name;
            knn_stage(dir / "tokens", config.scheme, config.k, dir / "knn.tsv", config.threads);
            record_stage(current, {dir / "knn.tsv", dir / "knn.tsv.json"});

            current = "cluster:" + in.name;
            cluster_stage(dir / "knn.tsv", config.louvain, dir / "clusters", config.threads);
            record_stage(current, {dir / "clusters"});

            current = "featurize:" + in.name;
            FeaturizeRequest req;
            req.sentence_dir = dir / "tokens";
            req.cluster_dir = dir / "clusters";
            req.token_features = in.token_features;
            req.covariates = config.covariates;
            req.options = {config.study.min_patients, config.study.rare_patients};
            const auto written = featurize_stage(req, dir / "features");
            record_stage(current, {dir / "features"});
            feature_dirs.insert(feature_dirs.end(), written.begin(), written.end());
        }

        AssociateRequest assoc;
        assoc.features = feature_dirs;
        assoc.genotypes = config.genotypes;
        assoc.covariates = config.covariates;
        assoc.study = config.study;
        assoc.covariate_options = config.covariate_options;
        assoc.permute_seed = config.permute_seed;

        current = "associate";
        fs::remove_all(out / "associations");
        associate_stage(assoc, out / "associations");
        record_stage(current, {out / "associations"});

        current = "report";
        fs::remove_all(out / "report");
        report_stage(out / "associations", out / "report");
        record_stage(current, {out / "report"});

        if (config.grid) {
            current = "grid";
            grid_stage(assoc, *config.grid, config.permute_seed, out / "grid.tsv");
            record_stage(current, {out / "grid.tsv"});
        }
        result.status = "complete";
    } catch (const std::exception& e) {
        result.status = "failed";
        result.failed_stage = current;
        result.error = e.what();
        write_manifest();
        const auto* err = dynamic_cast<const Error*>(&e);
        throw Error(err ? err->kind() : ErrorKind::Io, "stage " + current + ": " + e.what());
    }
    write_manifest();
    return result;
}

} // namespace phenex
