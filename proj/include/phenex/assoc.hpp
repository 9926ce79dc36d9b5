#pragma once

// Covariate-adjusted logistic association tests with Benjamini-Hochberg
// control and permutation-null validation.

#include "phenex/pheno.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace phenex {

/// Binary patients x genes matrix, column-wise.
struct GenotypeMatrix {
    std::vector<std::string> patients;
    std::vector<std::string> genes;
    std::vector<std::vector<std::uint32_t>> columns;  // ascending patient indices

    std::size_t count(std::size_t gene) const { return columns[gene].size(); }
};

/// Reads `patient_id gene [0|1]` rows (a header line starting with
/// "patient_id" is skipped). Rows for patients outside the cohort are ignored.
GenotypeMatrix read_genotypes(const std::filesystem::path& path,
                              std::span<const std::string> cohort);

/// Same patient rows, carriers of every gene moved together: patient i takes
/// the genotype row of patient permutation[i].
GenotypeMatrix permute_genotypes(const GenotypeMatrix& genotypes,
                                 std::span<const std::uint32_t> permutation);

struct CovariateRecord {
    std::string patient_id;
    std::string cancer_type;
    double documents = 0.0;
    bool lynch = false;
};

std::vector<CovariateRecord> read_covariate_records(const std::filesystem::path& path);

struct CovariateOptions {
    std::size_t min_type_patients = 50;
    bool log_documents = false;
};

/// Covariate columns without the intercept: one-hot cancer types (small types
/// pooled into "other", the largest group as reference), document count and
/// the Lynch indicator. Constant or duplicated columns are dropped and listed.
struct CovariateMatrix {
    std::vector<std::string> patients;
    std::vector<std::string> names;
    Eigen::MatrixXd values;  // patients x names
    std::vector<std::string> dropped;
    std::string reference_type;
};

CovariateMatrix build_covariates(std::span<const CovariateRecord> records,
                                 const CovariateOptions& options = {});

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct FitOptions {
    int max_iterations = 100;
    double tolerance = 1e-8;  // relative deviance change
    double ridge = 1e-9;
};

struct GlmFit {
    double intercept = 0.0;
    double beta = 0.0;
    std::vector<double> gamma;
    double se = 0.0;
    double p = 1.0;
    bool converged = false;
    bool separation = false;  // outcome constant within a genotype group
    int iterations = 0;
};

/// Maximum-likelihood fit of y ~ Bernoulli(sigmoid(a + b x + Z g)) by IRLS
/// with a two-sided Wald test on b. Throws ConstantOutcome when y is constant
/// and SingularDesign when [1, x, Z] is rank deficient. Separation and
/// iteration exhaustion come back as converged == false.
GlmFit fit_logistic(const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Eigen::MatrixXd& z,
                    const FitOptions& options = {});

enum class RecordStatus { Tested, SkippedRareRare, NonConverged, ConstantOutcome, SingularDesign };

const char* to_string(RecordStatus status) noexcept;

struct AssociationRecord {
    std::string gene;
    std::string feature_id;
    std::string family;
    std::string label;
    std::size_t gene_count = 0;
    std::size_t feature_count = 0;
    RecordStatus status = RecordStatus::Tested;
    bool separation = false;
    double beta = std::numeric_limits<double>::quiet_NaN();
    double se = std::numeric_limits<double>::quiet_NaN();
    double p = std::numeric_limits<double>::quiet_NaN();
    double q = std::numeric_limits<double>::quiet_NaN();
    bool significant = false;

    bool tested() const noexcept { return status == RecordStatus::Tested; }
};

struct BhResult {
    std::vector<double> q;
    std::vector<bool> significant;  // q < fdr
};

/// Step-up q-values q_(i) = min_{j>=i} m p_(j) / j, clipped at 1, returned
/// in input order. Throws InvalidP for p outside (0, 1].
BhResult bh_correct(std::span<const double> p_values, double fdr);

struct StudyOptions {
    std::size_t min_patients = 10;
    std::size_t rare_patients = 100;
    double fdr = 0.05;
    unsigned threads = 0;
    FitOptions fit;
};

/// Tests every (gene, feature) pair with both counts >= min_patients, skipping
/// pairs where both sides are rare. Each feature matrix is its own BH family.
/// Per-pair failures become flagged records. Order: family, feature, gene.
std::vector<AssociationRecord> run_study(std::span<const FeatureMatrix> features,
                                         const GenotypeMatrix& genotypes,
                                         const CovariateMatrix& covariates,
                                         const StudyOptions& options);

/// Recomputes q-values and significance per family over the tested records.
void apply_fdr(std::span<AssociationRecord> records, double fdr);

/// run_study with genotype rows permuted by one seeded permutation.
std::vector<AssociationRecord> permutation_null(std::span<const FeatureMatrix> features,
                                                const GenotypeMatrix& genotypes,
                                                const CovariateMatrix& covariates,
                                                std::uint64_t seed, const StudyOptions& options);

struct GridSpec {
    std::vector<std::size_t> min_patients{10, 25, 50};
    std::vector<std::size_t> rare_patients{10, 50, 100, 200};
    std::vector<double> fdr{0.01, 0.05, 0.1};
};

struct GridCounts {
    std::size_t true_count = 0;
    std::size_t permuted_count = 0;
};

struct GridRow {
    std::size_t min_patients;
    std::size_t rare_patients;
    double fdr;
    std::vector<GridCounts> families;  // same order as the feature matrices
    GridCounts total;
};

/// One row per (Min, Rare, FDR), Min-major. Rare values below a Min are raised
/// to it and duplicates dropped, so Min=25 runs Rare in {25, 50, 100, 200}.
std::vector<GridRow> parameter_grid(std::span<const FeatureMatrix> features,
                                    const GenotypeMatrix& genotypes,
                                    const CovariateMatrix& covariates, const GridSpec& grid,
                                    std::uint64_t permute_seed, const StudyOptions& options);

struct QqPoint {
    std::string family;
    std::string arm;  // "true" or "permuted"
    std::size_t rank;
    double expected;
    double observed;
};

struct VolcanoPoint {
    std::string family;
    std::string arm;
    std::string feature_id;
    std::string gene;
    double beta;
    double neg_log10_p;
    bool significant;
};

struct ReportTables {
    std::vector<QqPoint> qq;
    std::vector<VolcanoPoint> volcano;
};

ReportTables report_data(std::span<const AssociationRecord> true_records,
                         std::span<const AssociationRecord> permuted_records);

void write_associations(const std::filesystem::path& path,
                        std::span<const AssociationRecord> records);
std::vector<AssociationRecord> read_associations(const std::filesystem::path& path);
void write_grid(const std::filesystem::path& path, std::span<const GridRow> rows,
                std::span<const std::string> families);
void write_report(const std::filesystem::path& dir, const ReportTables& tables);

} // namespace phenex
