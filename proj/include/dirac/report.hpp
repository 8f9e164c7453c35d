#pragma once

#include "dirac/models.hpp"
#include "dirac/oracle.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dirac {

inline constexpr const char *kEngineVersion = "1.0.0";
inline constexpr int kReportSchemaVersion = 1;
/// Relative tolerance for symbolic vs lattice bracket agreement.
inline constexpr double kOracleTolerance = 1e-9;

struct OracleOptions {
    LatticeConfig config;
    int seeds = 1;
    /// Lattice size for the rank check; defaults to min(config.lattice, 3). The
    /// matrix has one row per constraint component and site, so its cost grows fast.
    std::optional<int> rank_lattice;
};

struct OracleEntry {
    std::string first;
    std::string second;
    /// Worst relative error over seeds, against the computed bracket and against
    /// its reconstruction from the projection.
    double worst = 0;
};

struct OracleResult {
    int lattice = 0;
    int rank_lattice = 0;
    int group_n = 0;
    int seeds = 0;
    DifferenceScheme scheme = DifferenceScheme::Central;
    std::vector<OracleEntry> entries;
    double worst = 0;
    bool brackets_passed = true;
    std::vector<std::string> rank_labels;
    RankVerdict rank;
    bool passed() const { return brackets_passed && rank.full_rank; }
};

/// Compares every bracket-matrix entry with the lattice and checks the second-class
/// block for full rank (one trial per seed).
OracleResult run_oracle(const ModelAnalysis &a, const OracleOptions &opts);

struct GaugeLaw {
    std::string field;
    Expression variation;
};

struct AnalysisReport {
    std::string source;
    ModelAnalysis analysis;
    std::vector<GeneratorTerm> generator;
    std::vector<GaugeLaw> gauge;
    std::optional<std::vector<Check>> checks;
    std::optional<OracleResult> oracle;
};

struct ReportOptions {
    std::optional<SignConvention> convention;
    /// Fixture to compare against; none skips the checks.
    std::optional<Fixture> fixture;
    std::optional<OracleOptions> oracle;
};

/// Generator used for the reported gauge laws: the fixture's generator when it has
/// one, otherwise every first-class constraint smeared with `e_<label>`.
std::vector<GeneratorTerm> default_generator(const ClassificationReport &r, const std::optional<Fixture> &f);

AnalysisReport build_report(const ModelDef &m, const std::string &source, const ReportOptions &opts);

/// Labels whose placeholder coefficients are nonzero.
std::vector<std::string> closes_on(const ProjectionResult &p);

std::string to_json(const AnalysisReport &r);
std::string to_text(const AnalysisReport &r);

std::string to_string(DifferenceScheme s);

} // namespace dirac
