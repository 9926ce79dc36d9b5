#pragma once

// Stage drivers shared by the CLI and the full run, run configuration and the
// seeded synthetic study generator.

#include "phenex/assoc.hpp"
#include "phenex/cluster.hpp"
#include "phenex/corpus.hpp"
#include "phenex/pheno.hpp"
#include "phenex/simknn.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace phenex {

inline constexpr const char* kVersion = "0.1.0";

// ---- stages ----------------------------------------------------------------

SentenceTable tokenize_stage(const std::filesystem::path& input, ParserMode mode,
                             const VocabularyOptions& options, const std::filesystem::path& out_dir,
                             unsigned threads);

/// The sentence directory is recorded relative to the neighbor file so a run
/// directory can be moved as a whole.
void knn_stage(const std::filesystem::path& sentence_dir, Scheme scheme, std::size_t k,
               const std::filesystem::path& out_file, unsigned threads);

std::filesystem::path sentence_dir_of(const std::filesystem::path& knn_file, const KnnMeta& meta);

/// Graph from the neighbor file, first Louvain level, medoids under the same
/// weights the neighbors were computed with.
ClusterMeta cluster_stage(const std::filesystem::path& knn_file, const LouvainOptions& options,
                          const std::filesystem::path& out_dir, unsigned threads);

struct FeaturizeRequest {
    std::filesystem::path sentence_dir;
    std::optional<std::filesystem::path> cluster_dir;
    bool token_features = true;
    std::optional<std::filesystem::path> covariates;  // defines the cohort when given
    FeatureOptions options;
};

/// Writes one feature directory per class under out_dir (out_dir/<FAMILY>).
std::vector<std::filesystem::path> featurize_stage(const FeaturizeRequest& request,
                                                   const std::filesystem::path& out_dir);

/// Accepts feature directories or parents holding them (subdirectories with
/// features.json; token classes first, then cluster classes, each in name order).
std::vector<FeatureMatrix> load_feature_dirs(const std::vector<std::filesystem::path>& paths);

struct AssociateRequest {
    std::vector<std::filesystem::path> features;
    std::filesystem::path genotypes;
    std::filesystem::path covariates;
    StudyOptions study;
    CovariateOptions covariate_options;
    std::optional<std::uint64_t> permute_seed;
};

struct StudyInputs {
    std::vector<FeatureMatrix> features;
    GenotypeMatrix genotypes;
    CovariateMatrix covariates;
};

/// Reads covariates (the cohort), genotypes and features aligned to it.
StudyInputs load_study(const AssociateRequest& request);

/// associations.tsv, plus associations_permuted.tsv when a permutation seed is set.
void associate_stage(const AssociateRequest& request, const std::filesystem::path& out_dir);

void grid_stage(const AssociateRequest& request, const GridSpec& grid, std::uint64_t permute_seed,
                const std::filesystem::path& out_file);

/// qq.tsv and volcano.tsv from an association directory.
void report_stage(const std::filesystem::path& association_dir, const std::filesystem::path& out_dir);

// ---- full run --------------------------------------------------------------

struct PipelineInput {
    std::string name;
    std::filesystem::path path;
    ParserMode mode = ParserMode::Codes;
    bool token_features = true;
};

struct PipelineConfig {
    std::vector<PipelineInput> inputs;
    std::filesystem::path genotypes;
    std::filesystem::path covariates;
    VocabularyOptions vocabulary;  // F = 70, R = 20
    Scheme scheme = Scheme::LogIsf;
    std::size_t k = 50;
    LouvainOptions louvain;
    StudyOptions study;  // Min = 10, Rare = 100, FDR = 0.05
    CovariateOptions covariate_options;
    std::uint64_t permute_seed = 7;
    std::optional<GridSpec> grid;
    std::filesystem::path out;
    unsigned threads = 0;

    /// Throws SpecInvalid for non-positive k, FDR outside (0, 1), no inputs, ...
    void validate() const;
};

/// JSON config; relative paths resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);

struct RunManifest {
    std::string status;  // "complete" or "failed"
    std::string failed_stage;
    std::string error;
    std::vector<std::pair<std::string, std::string>> artifacts;  // relative path, sha256
};

/// Runs tokenize -> knn -> cluster -> featurize -> associate (+ permuted) ->
/// report (-> grid) and writes <out>/manifest.json. A failing stage is recorded
/// in the manifest and rethrown.
RunManifest run_pipeline(const PipelineConfig& config);

// ---- synthetic data --------------------------------------------------------

struct SentenceFamily {
    std::vector<std::uint32_t> core;  // token indices into the synthetic lexicon
    double prevalence = 0.2;          // baseline expression probability
    std::size_t noise_min = 1;        // extra noise tokens per emitted sentence
    std::size_t noise_max = 2;
    std::vector<double> type_effects;  // log-odds per cancer type (empty = none)
    double document_effect = 0.0;      // log-odds per document
    double lynch_effect = 0.0;
};

struct PlantedEffect {
    std::size_t gene;
    std::size_t family;
    double beta;
};

struct SyntheticSpec {
    std::size_t patients = 2000;
    std::size_t genes = 20;
    std::size_t vocabulary = 300;  // background noise tokens
    std::size_t fillers = 70;      // very common tokens, removed by the stop filter
    std::vector<double> type_weights{0.30, 0.25, 0.20, 0.15, 0.08, 0.02};
    double document_mean = 4.0;  // documents = 1 + Poisson(mean)
    std::size_t background_min = 2;  // background sentences per document
    std::size_t background_max = 4;
    double lynch_rate = 0.02;
    std::vector<double> gene_prevalence;  // per gene; empty = drawn from [0.08, 0.2]
    std::vector<SentenceFamily> families;
    std::vector<PlantedEffect> planted;
    std::uint64_t seed = 1;

    std::size_t lexicon_size() const;
    /// Throws SpecInvalid.
    void validate() const;
};

/// 40 families with disjoint three-token cores and `planted` effects of size
/// `beta` on distinct genes and families.
SyntheticSpec default_synthetic_spec(std::uint64_t seed, std::size_t planted = 10,
                                     double beta = 2.5);

struct SyntheticFiles {
    std::filesystem::path codes_corpus;  // token_sentences, codes mode
    std::filesystem::path words_corpus;  // raw text, word mode
    std::filesystem::path genotypes;
    std::filesystem::path covariates;
    std::filesystem::path truth;            // gene, family, beta
    std::filesystem::path families;         // family, codes, words
    std::filesystem::path patient_families; // patient_id, family (expressed)
    std::filesystem::path config;           // ready-to-run config
};

/// Code string and pseudo-word for a lexicon index.
std::string synthetic_code(std::uint32_t token);
std::string synthetic_word(std::uint32_t token);

SyntheticFiles generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

} // namespace phenex
