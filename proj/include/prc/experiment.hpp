#pragma once

#include "prc/analysis.hpp"
#include "prc/common.hpp"
#include "prc/problem.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace prc {

/// Invalid configuration text or values.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct RunConfig {
    std::vector<ExampleId> examples{ExampleId::Ex1, ExampleId::Ex2};
    std::vector<Scheme> schemes{Scheme::Classical, Scheme::PartialRobust, Scheme::FullRobust, Scheme::ScottVogelius};
    std::vector<int> levels{10, 20, 40};
    std::vector<double> nu{1.0, 1e-3};
    std::vector<double> alpha{1e-1, 1e-3, 1e-4, 1e-6};
    std::vector<double> eps{0.0, 1e-4};
    int assembly_degree = 8;
    int data_degree = 12;
    int error_degree = 12;
    double tolerance = 1e-10;
    int reference_level = 160;
    double reference_tolerance = 1e-8;
    bool generate_references = true;
    std::string cache_dir = "cache";
    std::string output_dir = "results";

    bool operator==(const RunConfig&) const = default;
};

/// `key = value` lines, `#` comments, comma-separated lists. Unknown or
/// repeated keys and malformed lines throw ConfigError with the line number.
RunConfig parse_config(const std::string& text);
/// Inverse of parse_config (every key, doubles in shortest round-trip form).
std::string serialize_config(const RunConfig& cfg);
/// Checks value ranges; throws ConfigError.
void validate(const RunConfig& cfg);
/// Key reference for --help.
std::string config_help();

/// Directory of reference solutions: one `<key>.ref` file per key and a
/// `manifest.txt` listing them. Writes go through a temporary file and a
/// rename, so readers never observe partial files.
class ReferenceCache {
public:
    explicit ReferenceCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path file_for(const ReferenceKey& key) const;
    bool contains(const ReferenceKey& key) const;
    std::optional<ReferenceSolution> load(const ReferenceKey& key) const;
    void store(const ReferenceSolution& ref) const;

private:
    void update_manifest(const ReferenceSolution& ref) const;

    std::filesystem::path dir_;
};

void write_reference(std::ostream& os, const ReferenceSolution& ref);
ReferenceSolution read_reference(std::istream& is);

/// Reference for `key`, from the cache or computed and stored when
/// `generate` is set. Throws Error naming the missing file otherwise.
ReferenceSolution obtain_reference(const ReferenceCache& cache, const ReferenceKey& key, bool generate,
                                   double tolerance, Exec exec = Exec::Parallel);

/// Reference keys a configuration needs (Example 1 only; Example 2 has a
/// closed-form solution).
std::vector<ReferenceKey> required_references(const RunConfig& cfg);

struct ResultRow {
    ExampleId example = ExampleId::Ex1;
    Scheme scheme = Scheme::Classical;
    int n = 0;
    double nu = 0.0;
    double alpha = 0.0;
    double eps = 0.0;
    /// Velocity plus pressure dofs of one state/adjoint pair.
    int ndof = 0;
    ErrorReport errors;
    /// Assembly and factorization time plus the solve for this eps.
    double solve_seconds = 0.0;
};

using Progress = std::function<void(const std::string&)>;

/// Full sweep. One factorization per (example, nu, alpha, scheme, n) is
/// reused for all eps. Rows are ordered by example, nu, alpha, scheme, eps, n.
std::vector<ResultRow> run_sweep(const RunConfig& cfg, const ReferenceCache& cache, Exec exec = Exec::Parallel,
                                 const Progress& progress = {});

std::string csv_header();
void write_csv(std::ostream& os, const std::vector<ResultRow>& rows);
/// One table per (example, nu, alpha): energy, velocity and control errors.
void write_markdown(std::ostream& os, const std::vector<ResultRow>& rows);

/// run_sweep plus `results.csv` and `summary.md` in cfg.output_dir.
std::vector<ResultRow> run_example(const RunConfig& cfg, Exec exec = Exec::Parallel, const Progress& progress = {});

/// Writes `dir/name` atomically.
void write_file_atomic(const std::filesystem::path& dir, const std::string& name, const std::string& contents);

}  // namespace prc
