#pragma once

// Binary patient x feature matrices built from sentence provenance.

#include "phenex/cluster.hpp"
#include "phenex/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace phenex {

enum class FeatureKind { Token, Cluster };

const char* to_string(FeatureKind kind) noexcept;
FeatureKind parse_feature_kind(std::string_view name);

struct FeatureInfo {
    std::string id;     // unique within the matrix, e.g. "CSC:17"
    std::string label;  // token string or medoid text
    std::size_t count = 0;
    bool rare = false;
};

/// Sparse binary matrix stored column-wise. One matrix holds one feature class
/// (its `family`, e.g. CUI / CSC / WSC), which is also its multiple-testing
/// family downstream.
struct FeatureMatrix {
    std::string family;
    FeatureKind kind = FeatureKind::Token;
    std::vector<std::string> patients;
    std::vector<FeatureInfo> features;
    std::vector<std::vector<std::uint32_t>> columns;  // ascending patient indices
    std::vector<std::vector<SentenceId>> sources;     // sentences expressing each feature

    std::size_t patient_count() const noexcept { return patients.size(); }
    std::size_t feature_count() const noexcept { return features.size(); }
};

struct FeatureOptions {
    std::size_t min_patients = 10;
    std::size_t rare_patients = 100;
};

/// Names used for the two feature classes derived from a parser mode:
/// codes -> CUI / CSC, word -> WORD / WSC.
std::string token_family(ParserMode mode);
std::string cluster_family(ParserMode mode);

/// Feature j is set for patient i iff some occurrence of a sentence containing
/// token j belongs to i. Patients outside `patients` are ignored; features seen
/// in fewer than min_patients patients are dropped.
FeatureMatrix featurize_tokens(const SentenceTable& table, std::span<const std::string> patients,
                               const FeatureOptions& options);

/// Feature c is set for patient i iff i has an occurrence of any sentence in
/// cluster c. Labels are the medoid token strings.
FeatureMatrix featurize_clusters(const SentenceTable& table, const Clustering& clustering,
                                 std::span<const std::string> patients,
                                 const FeatureOptions& options);

enum class RedundancyMode { Patients, Sentences };

struct FeatureSimilarity {
    std::size_t feature_a;
    std::size_t feature_b;
    double similarity;
    bool redundant;
};

/// Jaccard similarity of expressing-patient sets (or source-sentence sets)
/// for every cross pair with a non-empty intersection. Throws PatientMismatch
/// when the patient orderings differ.
std::vector<FeatureSimilarity> feature_redundancy(const FeatureMatrix& a, const FeatureMatrix& b,
                                                  double threshold = 0.2,
                                                  RedundancyMode mode = RedundancyMode::Patients);

/// Reorders the rows to `patients`. Rows absent from the matrix become empty;
/// patients in the matrix but not in `patients` throw PatientMismatch.
FeatureMatrix align_patients(const FeatureMatrix& matrix, std::span<const std::string> patients);

// Feature directory: patients.tsv, features.tsv, matrix.tsv (patient_id,
// feature_id, 1) and sources.tsv.
void write_features(const std::filesystem::path& dir, const FeatureMatrix& matrix);
FeatureMatrix read_features(const std::filesystem::path& dir);

} // namespace phenex
