#include "phenex/assoc.hpp"

#include "phenex/error.hpp"
#include "phenex/parallel.hpp"
#include "phenex/random.hpp"
#include "phenex/tsv.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <unordered_map>

namespace phenex {

namespace {

bool looks_like_header(std::string_view first_field) { return first_field == "patient_id"; }

std::string fmt(double v) {
    if (std::isnan(v)) return "NA";
    std::array<char, 64> buf{};
    const int n = std::snprintf(buf.data(), buf.size(), "%.10g", v);
    return std::string(buf.data(), static_cast<std::size_t>(n));
}

double parse_stat(std::string_view s) {
    if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
    return tsv::parse_double(s, "association table");
}

class LogisticFitter {
public:
    LogisticFitter(const Eigen::MatrixXd& z, const FitOptions& options)
        : options_(options), design_(z.rows(), z.cols() + 2), mu_(z.rows()), w_(z.rows()),
          info_(z.cols() + 2, z.cols() + 2) {
        design_.col(0).setOnes();
        design_.rightCols(z.cols()) = z;
    }

    /// Covariate-only fit (genotype coefficient pinned at 0), used as the
    /// starting point for every gene tested against the same outcome.
    Eigen::VectorXd null_start(const Eigen::VectorXd& y) {
        design_.col(1).setZero();
        Eigen::VectorXd coef = intercept_only(y);
        iterate(y, coef);
        coef(1) = 0.0;
        return coef;
    }

    GlmFit fit(const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Eigen::VectorXd* start = nullptr) {
        const auto m = design_.rows();
        const auto p = design_.cols();
        if (y.size() != m || x.size() != m)
            throw Error(ErrorKind::Parse, "outcome, genotype and covariates differ in length");
        const double ones = y.sum();
        if (ones == 0.0 || ones == static_cast<double>(m))
            throw Error(ErrorKind::ConstantOutcome, "outcome is constant");
        design_.col(1) = x;
        check_rank();

        GlmFit fit;
        // Outcome constant inside a genotype group: the likelihood keeps
        // growing as |beta| grows, so no finite maximum exists.
        const double carriers = x.sum();
        const double carrier_ones = y.dot(x);
        const double other_ones = ones - carrier_ones;
        if (carrier_ones == 0.0 || carrier_ones == carriers || other_ones == 0.0 ||
            other_ones == static_cast<double>(m) - carriers) {
            fit.separation = true;
            fit.converged = false;
            fit.beta = carrier_ones == 0.0 || other_ones == static_cast<double>(m) - carriers
                           ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
            fit.se = std::numeric_limits<double>::quiet_NaN();
            fit.p = std::numeric_limits<double>::quiet_NaN();
            return fit;
        }

        Eigen::VectorXd coef = start ? *start : intercept_only(y);
        const auto [converged, iterations] = iterate(y, coef);
        fit.converged = converged;
        fit.iterations = iterations;

        information(coef);
        Eigen::VectorXd unit = Eigen::VectorXd::Zero(p);
        unit(1) = 1.0;
        const Eigen::VectorXd column = info_.ldlt().solve(unit);
        fit.intercept = coef(0);
        fit.beta = coef(1);
        fit.gamma.assign(coef.data() + 2, coef.data() + p);
        fit.se = std::sqrt(column(1));
        const double z = fit.beta / fit.se;
        fit.p = std::erfc(std::abs(z) / std::numbers::sqrt2);
        if (fit.p <= 0.0) fit.p = std::numeric_limits<double>::min();
        if (!std::isfinite(fit.beta) || !std::isfinite(fit.se) || std::isnan(fit.p))
            fit.converged = false;
        return fit;
    }

private:
    Eigen::VectorXd intercept_only(const Eigen::VectorXd& y) const {
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(design_.cols());
        const double mean = y.mean();
        coef(0) = std::log(mean / (1.0 - mean));
        return coef;
    }

    double deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& coef) const {
        const Eigen::VectorXd eta = design_ * coef;
        double d = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double e = y(i) > 0.5 ? -eta(i) : eta(i);  // -log P(y) = softplus(e)
            d += e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        }
        return 2.0 * d;
    }

    void information(const Eigen::VectorXd& coef) {
        const Eigen::VectorXd eta = design_ * coef;
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            mu_(i) = sigmoid(eta(i));
            w_(i) = mu_(i) * (1.0 - mu_(i));
        }
        info_.noalias() = design_.transpose() * (w_.asDiagonal() * design_);
        info_.diagonal().array() += options_.ridge;
    }

    // Newton steps with step halving until the relative deviance change
    // drops below the tolerance.
    std::pair<bool, int> iterate(const Eigen::VectorXd& y, Eigen::VectorXd& coef) {
        double dev = deviance(y, coef);
        for (int it = 1; it <= options_.max_iterations; ++it) {
            information(coef);
            const Eigen::VectorXd score = design_.transpose() * (y - mu_);
            Eigen::VectorXd step = info_.ldlt().solve(score);
            if (!step.allFinite()) return {false, it};
            Eigen::VectorXd next = coef + step;
            double next_dev = deviance(y, next);
            for (int half = 0; half < 30 && !(next_dev <= dev); ++half) {
                step *= 0.5;
                next = coef + step;
                next_dev = deviance(y, next);
            }
            coef = next;
            const bool done = std::abs(next_dev - dev) / (std::abs(next_dev) + 0.1) < options_.tolerance;
            dev = next_dev;
            if (done) {
                polish(y, coef, dev);
                return {true, it};
            }
        }
        return {false, options_.max_iterations};
    }

    // One more Newton step once the deviance has settled; quadratic
    // convergence takes the coefficients to rounding level.
    void polish(const Eigen::VectorXd& y, Eigen::VectorXd& coef, double dev) {
        information(coef);
        const Eigen::VectorXd score = design_.transpose() * (y - mu_);
        const Eigen::VectorXd next = coef + info_.ldlt().solve(score);
        if (next.allFinite() && deviance(y, next) <= dev * (1.0 + 1e-12)) coef = next;
    }

    void check_rank() const {
        const Eigen::MatrixXd gram = design_.transpose() * design_;
        const auto p = gram.rows();
        Eigen::VectorXd scale(p);
        for (Eigen::Index j = 0; j < p; ++j) {
            if (gram(j, j) <= 0.0)
                throw Error(ErrorKind::SingularDesign, "design column " + std::to_string(j) + " is all zero");
            scale(j) = 1.0 / std::sqrt(gram(j, j));
        }
        const Eigen::MatrixXd normalized = scale.asDiagonal() * gram * scale.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normalized, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < 1e-10)
            throw Error(ErrorKind::SingularDesign, "design matrix is rank deficient");
    }

    FitOptions options_;
    Eigen::MatrixXd design_;
    Eigen::VectorXd mu_;
    Eigen::VectorXd w_;
    Eigen::MatrixXd info_;
};

void check_cohort(std::span<const FeatureMatrix> features, const GenotypeMatrix& genotypes,
                  const CovariateMatrix& covariates) {
    if (genotypes.patients != covariates.patients)
        throw Error(ErrorKind::PatientMismatch, "genotype and covariate patient orderings differ");
    for (const auto& f : features)
        if (f.patients != covariates.patients)
            throw Error(ErrorKind::PatientMismatch,
                        "feature class " + f.family + " uses a different patient ordering");
}

struct PairTask {
    std::uint32_t family;
    std::uint32_t feature;
    std::uint32_t gene;
};

// Fits every pair whose counts reach min_patients. With skip_rare_rare, pairs
// where both sides fall under rare_patients become skipped records instead.
std::vector<AssociationRecord> fit_pairs(std::span<const FeatureMatrix> features,
                                         const GenotypeMatrix& genotypes,
                                         const CovariateMatrix& covariates,
                                         std::size_t min_patients, std::size_t rare_patients,
                                         bool skip_rare_rare, const StudyOptions& options) {
    check_cohort(features, genotypes, covariates);
    std::vector<PairTask> tasks;
    for (std::uint32_t f = 0; f < features.size(); ++f)
        for (std::uint32_t j = 0; j < features[f].feature_count(); ++j) {
            if (features[f].columns[j].size() < min_patients) continue;
            for (std::uint32_t g = 0; g < genotypes.genes.size(); ++g)
                if (genotypes.count(g) >= min_patients) tasks.push_back({f, j, g});
        }

    std::vector<AssociationRecord> records(tasks.size());
    const auto m = static_cast<Eigen::Index>(covariates.patients.size());
    parallel_for(tasks.size(), options.threads, [&](std::size_t begin, std::size_t end, unsigned) {
        LogisticFitter fitter(covariates.values, options.fit);
        Eigen::VectorXd y(m);
        Eigen::VectorXd x(m);
        const std::vector<std::uint32_t>* loaded = nullptr;
        std::optional<Eigen::VectorXd> start;
        for (std::size_t t = begin; t < end; ++t) {
            const auto& task = tasks[t];
            const auto& matrix = features[task.family];
            const auto& column = matrix.columns[task.feature];
            auto& rec = records[t];
            rec.gene = genotypes.genes[task.gene];
            rec.feature_id = matrix.features[task.feature].id;
            rec.family = matrix.family;
            rec.label = matrix.features[task.feature].label;
            rec.gene_count = genotypes.count(task.gene);
            rec.feature_count = column.size();
            if (skip_rare_rare && rec.gene_count < rare_patients && rec.feature_count < rare_patients) {
                rec.status = RecordStatus::SkippedRareRare;
                continue;
            }
            if (loaded != &column) {
                y.setZero();
                for (auto i : column) y(i) = 1.0;
                loaded = &column;
                start.reset();
                if (!column.empty() && column.size() < static_cast<std::size_t>(m)) start = fitter.null_start(y);
            }
            x.setZero();
            for (auto i : genotypes.columns[task.gene]) x(i) = 1.0;
            try {
                const auto fit = fitter.fit(y, x, start ? &*start : nullptr);
                rec.beta = fit.beta;
                rec.separation = fit.separation;
                if (fit.converged) {
                    rec.status = RecordStatus::Tested;
                    rec.se = fit.se;
                    rec.p = fit.p;
                } else {
                    rec.status = RecordStatus::NonConverged;
                }
            } catch (const Error& e) {
                rec.status = e.kind() == ErrorKind::ConstantOutcome ? RecordStatus::ConstantOutcome
                                                                    : RecordStatus::SingularDesign;
            }
        }
    });
    return records;
}

// BH over the tested records selected by `eligible`, one family at a time.
template <typename Eligible>
std::size_t count_significant(std::span<const AssociationRecord> records, const std::string& family,
                              double fdr, Eligible&& eligible) {
    std::vector<double> p;
    for (const auto& r : records)
        if (r.family == family && r.tested() && eligible(r)) p.push_back(r.p);
    const auto bh = bh_correct(p, fdr);
    return static_cast<std::size_t>(std::count(bh.significant.begin(), bh.significant.end(), true));
}

} // namespace

GenotypeMatrix read_genotypes(const std::filesystem::path& path,
                              std::span<const std::string> cohort) {
    std::unordered_map<std::string_view, std::uint32_t> index;
    for (std::uint32_t i = 0; i < cohort.size(); ++i) index.emplace(cohort[i], i);
    std::map<std::string, std::vector<std::uint32_t>> by_gene;
    auto in = tsv::open_in(path);
    std::string line;
    std::size_t lineno = 0;
    while (tsv::next_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = tsv::split(line);
        if (lineno == 1 && looks_like_header(f[0])) continue;
        if (f.size() != 2 && f.size() != 3)
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) +
                                              ": expected patient_id, gene[, 0/1]");
        auto& carriers = by_gene[std::string(f[1])];
        if (f.size() == 3 && f[2] != "1") {
            if (f[2] != "0")
                throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) +
                                                  ": genotype must be 0 or 1");
            continue;
        }
        const auto it = index.find(f[0]);
        if (it == index.end()) continue;
        carriers.push_back(it->second);
    }
    GenotypeMatrix g;
    g.patients.assign(cohort.begin(), cohort.end());
    for (auto& [gene, carriers] : by_gene) {
        std::sort(carriers.begin(), carriers.end());
        carriers.erase(std::unique(carriers.begin(), carriers.end()), carriers.end());
        g.genes.push_back(gene);
        g.columns.push_back(std::move(carriers));
    }
    return g;
}

GenotypeMatrix permute_genotypes(const GenotypeMatrix& genotypes,
                                 std::span<const std::uint32_t> permutation) {
    const auto m = genotypes.patients.size();
    if (permutation.size() != m)
        throw Error(ErrorKind::PatientMismatch, "permutation length differs from the cohort size");
    std::vector<std::uint32_t> inverse(m);
    for (std::uint32_t i = 0; i < m; ++i) inverse[permutation[i]] = i;
    GenotypeMatrix out = genotypes;
    for (auto& col : out.columns) {
        for (auto& r : col) r = inverse[r];
        std::sort(col.begin(), col.end());
    }
    return out;
}

std::vector<CovariateRecord> read_covariate_records(const std::filesystem::path& path) {
    std::vector<CovariateRecord> out;
    auto in = tsv::open_in(path);
    std::string line;
    std::size_t lineno = 0;
    while (tsv::next_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = tsv::split(line);
        if (lineno == 1 && looks_like_header(f[0])) continue;
        const auto where = path.string() + ":" + std::to_string(lineno);
        if (f.size() != 4)
            throw Error(ErrorKind::Parse, where + ": expected patient_id, cancer_type, n_documents, lynch");
        CovariateRecord r;
        r.patient_id = std::string(f[0]);
        r.cancer_type = std::string(f[1]);
        r.documents = tsv::parse_double(f[2], where);
        if (f[3] != "0" && f[3] != "1") throw Error(ErrorKind::Parse, where + ": lynch must be 0 or 1");
        r.lynch = f[3] == "1";
        if (r.patient_id.empty()) throw Error(ErrorKind::Parse, where + ": empty patient_id");
        out.push_back(std::move(r));
    }
    return out;
}

CovariateMatrix build_covariates(std::span<const CovariateRecord> records,
                                 const CovariateOptions& options) {
    CovariateMatrix cov;
    const auto m = records.size();
    std::map<std::string, std::size_t> type_counts;
    for (const auto& r : records) {
        ++type_counts[r.cancer_type];
        cov.patients.push_back(r.patient_id);
    }
    {
        auto sorted = cov.patients;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw Error(ErrorKind::Parse, "covariate table lists a patient twice");
    }

    const std::string other = "other";
    auto group_of = [&](const std::string& type) {
        return type_counts[type] >= options.min_type_patients ? type : other;
    };
    std::map<std::string, std::size_t> groups;
    for (const auto& r : records) ++groups[group_of(r.cancer_type)];
    if (!groups.empty()) {
        cov.reference_type = groups.begin()->first;
        for (const auto& [name, n] : groups)
            if (n > groups[cov.reference_type]) cov.reference_type = name;
    }

    std::vector<std::pair<std::string, Eigen::VectorXd>> columns;
    for (const auto& [name, n] : groups) {
        if (name == cov.reference_type) continue;
        Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i)
            if (group_of(records[i].cancer_type) == name) col(static_cast<Eigen::Index>(i)) = 1.0;
        columns.emplace_back("cancer_type:" + name, std::move(col));
    }
    {
        Eigen::VectorXd docs(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i)
            docs(static_cast<Eigen::Index>(i)) =
                options.log_documents ? std::log1p(records[i].documents) : records[i].documents;
        columns.emplace_back(options.log_documents ? "log_documents" : "documents", std::move(docs));
    }
    {
        Eigen::VectorXd lynch(static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) lynch(static_cast<Eigen::Index>(i)) = records[i].lynch ? 1.0 : 0.0;
        columns.emplace_back("lynch", std::move(lynch));
    }

    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& v = columns[c].second;
        const bool constant = m == 0 || (v.array() == v(0)).all();
        bool duplicate = false;
        for (auto k : keep) duplicate = duplicate || v == columns[k].second;
        if (constant || duplicate) cov.dropped.push_back(columns[c].first);
        else keep.push_back(c);
    }
    cov.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
        cov.names.push_back(columns[keep[i]].first);
        cov.values.col(static_cast<Eigen::Index>(i)) = columns[keep[i]].second;
    }
    return cov;
}

GlmFit fit_logistic(const Eigen::VectorXd& y, const Eigen::VectorXd& x, const Eigen::MatrixXd& z,
                    const FitOptions& options) {
    LogisticFitter fitter(z, options);
    return fitter.fit(y, x);
}

const char* to_string(RecordStatus status) noexcept {
    switch (status) {
    case RecordStatus::Tested: return "ok";
    case RecordStatus::SkippedRareRare: return "skipped_rare_rare";
    case RecordStatus::NonConverged: return "nonconverged";
    case RecordStatus::ConstantOutcome: return "constant_outcome";
    case RecordStatus::SingularDesign: return "singular_design";
    }
    return "?";
}

BhResult bh_correct(std::span<const double> p_values, double fdr) {
    const auto m = p_values.size();
    for (double p : p_values)
        if (!(p > 0.0 && p <= 1.0))
            throw Error(ErrorKind::InvalidP, "p-value outside (0, 1]: " + tsv::real(p));
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return p_values[a] < p_values[b]; });
    BhResult out;
    out.q.assign(m, 1.0);
    out.significant.assign(m, false);
    double running = 1.0;
    for (std::size_t rank = m; rank >= 1; --rank) {
        const auto i = order[rank - 1];
        const double q = p_values[i] * (static_cast<double>(m) / static_cast<double>(rank));
        running = std::min(running, q);
        out.q[i] = running;
        out.significant[i] = running < fdr;
    }
    return out;
}

void apply_fdr(std::span<AssociationRecord> records, double fdr) {
    std::vector<std::string> families;
    for (const auto& r : records)
        if (std::find(families.begin(), families.end(), r.family) == families.end())
            families.push_back(r.family);
    for (const auto& family : families) {
        std::vector<std::size_t> idx;
        std::vector<double> p;
        for (std::size_t i = 0; i < records.size(); ++i) {
            auto& r = records[i];
            if (r.family != family) continue;
            r.q = std::numeric_limits<double>::quiet_NaN();
            r.significant = false;
            if (!r.tested()) continue;
            idx.push_back(i);
            p.push_back(r.p);
        }
        const auto bh = bh_correct(p, fdr);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            records[idx[k]].q = bh.q[k];
            records[idx[k]].significant = bh.significant[k];
        }
    }
}

std::vector<AssociationRecord> run_study(std::span<const FeatureMatrix> features,
                                         const GenotypeMatrix& genotypes,
                                         const CovariateMatrix& covariates,
                                         const StudyOptions& options) {
    auto records = fit_pairs(features, genotypes, covariates, options.min_patients,
                             options.rare_patients, true, options);
    apply_fdr(records, options.fdr);
    return records;
}

std::vector<AssociationRecord> permutation_null(std::span<const FeatureMatrix> features,
                                                const GenotypeMatrix& genotypes,
                                                const CovariateMatrix& covariates,
                                                std::uint64_t seed, const StudyOptions& options) {
    const auto perm = random_permutation(genotypes.patients.size(), seed);
    return run_study(features, permute_genotypes(genotypes, perm), covariates, options);
}

std::vector<GridRow> parameter_grid(std::span<const FeatureMatrix> features,
                                    const GenotypeMatrix& genotypes,
                                    const CovariateMatrix& covariates, const GridSpec& grid,
                                    std::uint64_t permute_seed, const StudyOptions& options) {
    if (grid.min_patients.empty() || grid.rare_patients.empty() || grid.fdr.empty())
        throw Error(ErrorKind::Usage, "parameter grid is empty");
    const auto floor = *std::min_element(grid.min_patients.begin(), grid.min_patients.end());
    const auto perm = random_permutation(genotypes.patients.size(), permute_seed);
    // Fits do not depend on the thresholds, so each arm is fitted once at the
    // loosest Min and every cell only re-selects pairs and reruns BH.
    const auto truth = fit_pairs(features, genotypes, covariates, floor, 0, false, options);
    const auto permuted = fit_pairs(features, permute_genotypes(genotypes, perm), covariates, floor,
                                    0, false, options);

    std::vector<GridRow> rows;
    for (auto min_n : grid.min_patients) {
        std::vector<std::size_t> rares;
        for (auto r : grid.rare_patients) {
            const auto clipped = std::max(r, min_n);
            if (std::find(rares.begin(), rares.end(), clipped) == rares.end()) rares.push_back(clipped);
        }
        for (auto rare_n : rares)
            for (double fdr : grid.fdr) {
                auto eligible = [&](const AssociationRecord& r) {
                    return r.gene_count >= min_n && r.feature_count >= min_n &&
                           !(r.gene_count < rare_n && r.feature_count < rare_n);
                };
                GridRow row{min_n, rare_n, fdr, {}, {}};
                for (const auto& f : features) {
                    GridCounts c{count_significant(truth, f.family, fdr, eligible),
                                 count_significant(permuted, f.family, fdr, eligible)};
                    row.total.true_count += c.true_count;
                    row.total.permuted_count += c.permuted_count;
                    row.families.push_back(c);
                }
                rows.push_back(std::move(row));
            }
    }
    return rows;
}

ReportTables report_data(std::span<const AssociationRecord> true_records,
                         std::span<const AssociationRecord> permuted_records) {
    ReportTables out;
    auto add_arm = [&](std::span<const AssociationRecord> records, const std::string& arm) {
        std::vector<std::string> families;
        for (const auto& r : records)
            if (std::find(families.begin(), families.end(), r.family) == families.end())
                families.push_back(r.family);
        for (const auto& family : families) {
            std::vector<double> p;
            for (const auto& r : records) {
                if (r.family != family || !r.tested()) continue;
                p.push_back(r.p);
                out.volcano.push_back(
                    {family, arm, r.feature_id, r.gene, r.beta, -std::log10(r.p), r.significant});
            }
            std::sort(p.begin(), p.end());
            const auto m = static_cast<double>(p.size());
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double expected = (static_cast<double>(i + 1) - 0.5) / m;
                out.qq.push_back({family, arm, i + 1, -std::log10(expected), -std::log10(p[i])});
            }
        }
    };
    add_arm(true_records, "true");
    add_arm(permuted_records, "permuted");
    return out;
}

void write_associations(const std::filesystem::path& path,
                        std::span<const AssociationRecord> records) {
    auto out = tsv::open_out(path);
    out << "gene\tfeature_id\tclass\tlabel\tbeta\tse\tp\tq\tsignificant\tflags\tgene_count\tfeature_count\n";
    for (const auto& r : records) {
        std::string flags = to_string(r.status);
        if (r.separation) flags += ",separation";
        const bool stats = r.status == RecordStatus::Tested || r.status == RecordStatus::NonConverged;
        out << r.gene << '\t' << r.feature_id << '\t' << r.family << '\t' << r.label << '\t'
            << (stats ? fmt(r.beta) : "NA") << '\t' << fmt(r.se) << '\t' << fmt(r.p) << '\t'
            << fmt(r.q) << '\t' << (r.significant ? 1 : 0) << '\t' << flags << '\t' << r.gene_count
            << '\t' << r.feature_count << '\n';
    }
}

std::vector<AssociationRecord> read_associations(const std::filesystem::path& path) {
    std::vector<AssociationRecord> records;
    auto in = tsv::open_in(path);
    std::string line;
    tsv::next_line(in, line);
    while (tsv::next_line(in, line)) {
        const auto f = tsv::split(line);
        if (f.size() != 12) throw Error(ErrorKind::Parse, path.string() + ": expected 12 columns");
        AssociationRecord r;
        r.gene = std::string(f[0]);
        r.feature_id = std::string(f[1]);
        r.family = std::string(f[2]);
        r.label = std::string(f[3]);
        r.beta = parse_stat(f[4]);
        r.se = parse_stat(f[5]);
        r.p = parse_stat(f[6]);
        r.q = parse_stat(f[7]);
        r.significant = f[8] == "1";
        const auto flags = tsv::split(f[9], ',');
        r.separation = std::find(flags.begin(), flags.end(), "separation") != flags.end();
        const auto status = flags.front();
        if (status == "ok") r.status = RecordStatus::Tested;
        else if (status == "skipped_rare_rare") r.status = RecordStatus::SkippedRareRare;
        else if (status == "nonconverged") r.status = RecordStatus::NonConverged;
        else if (status == "constant_outcome") r.status = RecordStatus::ConstantOutcome;
        else if (status == "singular_design") r.status = RecordStatus::SingularDesign;
        else throw Error(ErrorKind::Parse, path.string() + ": unknown status '" + std::string(status) + "'");
        r.gene_count = static_cast<std::size_t>(tsv::parse_int(f[10], "association table"));
        r.feature_count = static_cast<std::size_t>(tsv::parse_int(f[11], "association table"));
        records.push_back(std::move(r));
    }
    return records;
}

void write_grid(const std::filesystem::path& path, std::span<const GridRow> rows,
                std::span<const std::string> families) {
    auto out = tsv::open_out(path);
    out << "Min\tRare\tFDR";
    for (const auto& f : families) out << '\t' << f << "_True\t" << f << "_Pmt";
    out << "\tTotal_True\tTotal_Pmt\n";
    for (const auto& r : rows) {
        out << r.min_patients << '\t' << r.rare_patients << '\t' << fmt(r.fdr);
        for (const auto& c : r.families) out << '\t' << c.true_count << '\t' << c.permuted_count;
        out << '\t' << r.total.true_count << '\t' << r.total.permuted_count << '\n';
    }
}

void write_report(const std::filesystem::path& dir, const ReportTables& tables) {
    std::filesystem::create_directories(dir);
    {
        auto out = tsv::open_out(dir / "qq.tsv");
        out << "class\tarm\trank\texpected_neg_log10_p\tobserved_neg_log10_p\n";
        for (const auto& q : tables.qq)
            out << q.family << '\t' << q.arm << '\t' << q.rank << '\t' << fmt(q.expected) << '\t'
                << fmt(q.observed) << '\n';
    }
    auto out = tsv::open_out(dir / "volcano.tsv");
    out << "class\tarm\tfeature_id\tgene\tbeta\tneg_log10_p\tsignificant\n";
    for (const auto& v : tables.volcano)
        out << v.family << '\t' << v.arm << '\t' << v.feature_id << '\t' << v.gene << '\t'
            << fmt(v.beta) << '\t' << fmt(v.neg_log10_p) << '\t' << (v.significant ? 1 : 0) << '\n';
}

} // namespace phenex
