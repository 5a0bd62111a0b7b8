#include "prc/experiment.hpp"

#include "prc/kkt.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

namespace prc {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value)
{
    std::vector<std::string> items;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) items.push_back(trim(item));
    return items;
}

double parse_double(const std::string& s)
{
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
}

int parse_int(const std::string& s)
{
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
}

bool parse_bool(const std::string& s)
{
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument(s);
}

ExampleId parse_example(const std::string& s)
{
    const int v = parse_int(s);
    if (v != 1 && v != 2) throw std::invalid_argument(s);
    return static_cast<ExampleId>(v);
}

// Shortest text that reads back to the same double.
std::string fmt(double v)
{
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T, class F>
std::string join(const std::vector<T>& values, F&& f)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + f(values[i]);
    return out;
}

struct KeySpec {
    const char* key;
    const char* help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class T, class P>
std::vector<T> parse_list(const std::string& value, P&& parse)
{
    std::vector<T> out;
    for (const auto& item : split_list(value)) {
        if (item.empty()) throw std::invalid_argument("empty list item");
        out.push_back(parse(item));
    }
    return out;
}

const std::vector<KeySpec>& key_specs()
{
    static const std::vector<KeySpec> specs = {
        {"example", "examples to run (1, 2)",
         [](RunConfig& c, const std::string& v) { c.examples = parse_list<ExampleId>(v, parse_example); },
         [](const RunConfig& c) {
             return join(c.examples, [](ExampleId e) { return std::to_string(static_cast<int>(e)); });
         }},
        {"schemes", "Classical, PartialRobust, FullRobust, ScottVogelius",
         [](RunConfig& c, const std::string& v) {
             c.schemes = parse_list<Scheme>(v, [](const std::string& s) { return scheme_from_string(s); });
         },
         [](const RunConfig& c) { return join(c.schemes, [](Scheme s) { return to_string(s); }); }},
        {"levels", "cells per side of the computed meshes (multiples of 5 for example 2)",
         [](RunConfig& c, const std::string& v) { c.levels = parse_list<int>(v, parse_int); },
         [](const RunConfig& c) { return join(c.levels, [](int n) { return std::to_string(n); }); }},
        {"nu", "viscosities", [](RunConfig& c, const std::string& v) { c.nu = parse_list<double>(v, parse_double); },
         [](const RunConfig& c) { return join(c.nu, fmt); }},
        {"alpha", "regularization weights",
         [](RunConfig& c, const std::string& v) { c.alpha = parse_list<double>(v, parse_double); },
         [](const RunConfig& c) { return join(c.alpha, fmt); }},
        {"eps", "perturbation amplitudes",
         [](RunConfig& c, const std::string& v) { c.eps = parse_list<double>(v, parse_double); },
         [](const RunConfig& c) { return join(c.eps, fmt); }},
        {"assembly_degree", "quadrature degree of the bilinear forms",
         [](RunConfig& c, const std::string& v) { c.assembly_degree = parse_int(v); },
         [](const RunConfig& c) { return std::to_string(c.assembly_degree); }},
        {"data_degree", "quadrature degree of the load vectors",
         [](RunConfig& c, const std::string& v) { c.data_degree = parse_int(v); },
         [](const RunConfig& c) { return std::to_string(c.data_degree); }},
        {"error_degree", "quadrature degree of the error norms",
         [](RunConfig& c, const std::string& v) { c.error_degree = parse_int(v); },
         [](const RunConfig& c) { return std::to_string(c.error_degree); }},
        {"tolerance", "relative residual tolerance of the linear solves",
         [](RunConfig& c, const std::string& v) { c.tolerance = parse_double(v); },
         [](const RunConfig& c) { return fmt(c.tolerance); }},
        {"reference_level", "cells per side of the reference mesh",
         [](RunConfig& c, const std::string& v) { c.reference_level = parse_int(v); },
         [](const RunConfig& c) { return std::to_string(c.reference_level); }},
        {"reference_tolerance", "relative residual tolerance of the reference solve",
         [](RunConfig& c, const std::string& v) { c.reference_tolerance = parse_double(v); },
         [](const RunConfig& c) { return fmt(c.reference_tolerance); }},
        {"generate_references", "compute missing references (true/false)",
         [](RunConfig& c, const std::string& v) { c.generate_references = parse_bool(v); },
         [](const RunConfig& c) { return std::string(c.generate_references ? "true" : "false"); }},
        {"cache_dir", "reference cache directory",
         [](RunConfig& c, const std::string& v) { c.cache_dir = v; },
         [](const RunConfig& c) { return c.cache_dir; }},
        {"output_dir", "directory for results.csv and summary.md",
         [](RunConfig& c, const std::string& v) { c.output_dir = v; },
         [](const RunConfig& c) { return c.output_dir; }},
    };
    return specs;
}

std::string eoc_cell(const std::optional<double>& r)
{
    if (!r) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *r);
    return buf;
}

std::string sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RunConfig parse_config(const std::string& text)
{
    RunConfig cfg;
    std::set<std::string> seen;
    std::stringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const std::string where = "config line " + std::to_string(lineno) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected `key = value`, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& specs = key_specs();
        const auto it = std::find_if(specs.begin(), specs.end(), [&](const KeySpec& s) { return key == s.key; });
        if (it == specs.end()) throw ConfigError(where + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError(where + "key '" + key + "' given twice");
        if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
        try {
            it->set(cfg, value);
        } catch (const std::exception&) {
            throw ConfigError(where + "invalid value '" + value + "' for '" + key + "'");
        }
    }
    validate(cfg);
    return cfg;
}

std::string serialize_config(const RunConfig& cfg)
{
    std::string out;
    for (const auto& s : key_specs()) out += std::string(s.key) + " = " + s.get(cfg) + "\n";
    return out;
}

std::string config_help()
{
    const RunConfig defaults;
    std::string out = "Config file keys (`key = value`, `#` comments, comma-separated lists):\n";
    for (const auto& s : key_specs()) {
        out += "  " + std::string(s.key) + ": " + s.help + "\n      default: " + s.get(defaults) + "\n";
    }
    return out;
}

void validate(const RunConfig& cfg)
{
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (cfg.examples.empty() || cfg.schemes.empty() || cfg.levels.empty() || cfg.nu.empty() || cfg.alpha.empty() ||
        cfg.eps.empty())
        fail("lists must not be empty");
    const bool ex2 = std::find(cfg.examples.begin(), cfg.examples.end(), ExampleId::Ex2) != cfg.examples.end();
    for (int n : cfg.levels) {
        if (n < 1) fail("levels must be positive");
        if (ex2 && n % 5 != 0) fail("example 2 needs levels divisible by 5 (got " + std::to_string(n) + ")");
    }
    for (double v : cfg.nu)
        if (!(v > 0.0)) fail("nu must be positive");
    for (double v : cfg.alpha)
        if (!(v > 0.0)) fail("alpha must be positive");
    for (double v : cfg.eps)
        if (!std::isfinite(v)) fail("eps must be finite");
    for (int d : {cfg.assembly_degree, cfg.data_degree, cfg.error_degree})
        if (d < 1 || d > 12) fail("quadrature degrees must lie in 1..12");
    if (!(cfg.tolerance > 0.0) || !(cfg.reference_tolerance > 0.0)) fail("tolerances must be positive");
    if (cfg.reference_level < *std::max_element(cfg.levels.begin(), cfg.levels.end()))
        fail("reference_level must not be coarser than the finest level");
    if (cfg.cache_dir.empty() || cfg.output_dir.empty()) fail("directories must not be empty");
}

ReferenceCache::ReferenceCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path ReferenceCache::file_for(const ReferenceKey& key) const { return dir_ / (key.name() + ".ref"); }

bool ReferenceCache::contains(const ReferenceKey& key) const { return fs::exists(file_for(key)); }

std::optional<ReferenceSolution> ReferenceCache::load(const ReferenceKey& key) const
{
    std::ifstream in(file_for(key));
    if (!in) return std::nullopt;
    ReferenceSolution ref = read_reference(in);
    if (!(ref.key() == key)) throw Error("reference cache: " + file_for(key).string() + " holds another key");
    return ref;
}

void ReferenceCache::store(const ReferenceSolution& ref) const
{
    std::ostringstream os;
    write_reference(os, ref);
    write_file_atomic(dir_, ref.key().name() + ".ref", os.str());
    update_manifest(ref);
}

void ReferenceCache::update_manifest(const ReferenceSolution& ref) const
{
    std::map<std::string, std::string> lines;
    std::ifstream in(dir_ / "manifest.txt");
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') lines[line.substr(0, line.find(' '))] = line;
    const ReferenceKey& k = ref.key();
    std::ostringstream entry;
    entry << k.name() << ".ref example=" << static_cast<int>(k.example) << " nu=" << fmt(k.nu)
          << " alpha=" << fmt(k.alpha) << " n=" << k.n << " scheme=" << to_string(ref.scheme())
          << " dofs=" << ref.space().num_dofs() << " eps=0";
    lines[k.name() + ".ref"] = entry.str();
    std::string out = "# file example nu alpha n scheme dofs eps\n";
    for (const auto& [name, l] : lines) out += l + "\n";
    write_file_atomic(dir_, "manifest.txt", out);
}

void write_reference(std::ostream& os, const ReferenceSolution& ref)
{
    const ReferenceKey& k = ref.key();
    os << "reference " << static_cast<int>(k.example) << ' ' << fmt(k.nu) << ' ' << fmt(k.alpha) << ' ' << k.n << ' '
       << to_string(ref.scheme()) << '\n';
    write_coeffs(os, ref.space(), ref.psi_u());
    write_coeffs(os, ref.space(), ref.psi_z());
}

ReferenceSolution read_reference(std::istream& is)
{
    std::string tag, scheme;
    int example = 0;
    ReferenceKey key;
    PRC_REQUIRE(static_cast<bool>(is >> tag >> example >> key.nu >> key.alpha >> key.n >> scheme) && tag == "reference",
                "read_reference: malformed header");
    PRC_REQUIRE(example == 1 || example == 2, "read_reference: bad example id");
    PRC_REQUIRE(scheme == to_string(Scheme::ScottVogelius), "read_reference: reference must come from ScottVogelius");
    key.example = static_cast<ExampleId>(example);
    const RegionTagging tagging = key.example == ExampleId::Ex2 ? RegionTagging::ThreeStrips : RegionTagging::None;
    auto mesh = std::make_shared<const Triangulation>(build_unit_square(key.n, tagging));
    auto space = std::make_shared<const CloughTocherSpace>(mesh);
    Vector psi_u = read_coeffs(is, *space);
    Vector psi_z = read_coeffs(is, *space);
    return ReferenceSolution(key, space, std::move(psi_u), std::move(psi_z));
}

ReferenceSolution obtain_reference(const ReferenceCache& cache, const ReferenceKey& key, bool generate,
                                   double tolerance, Exec exec)
{
    if (auto ref = cache.load(key)) return std::move(*ref);
    if (!generate)
        throw Error("reference " + cache.file_for(key).string() +
                    " is missing; run the `reference` subcommand or set generate_references = true");
    try {
        ReferenceSolution ref = compute_reference(key, tolerance, exec);
        cache.store(ref);
        return ref;
    } catch (const SolverError& e) {
        throw SolverError("reference " + key.name() + ": " + e.what());
    }
}

std::vector<ReferenceKey> required_references(const RunConfig& cfg)
{
    std::vector<ReferenceKey> keys;
    if (std::find(cfg.examples.begin(), cfg.examples.end(), ExampleId::Ex1) == cfg.examples.end()) return keys;
    for (double nu : cfg.nu)
        for (double alpha : cfg.alpha) keys.push_back({ExampleId::Ex1, nu, alpha, cfg.reference_level});
    return keys;
}

std::vector<ResultRow> run_sweep(const RunConfig& cfg, const ReferenceCache& cache, Exec exec,
                                 const Progress& progress)
{
    validate(cfg);
    auto say = [&](const std::string& m) {
        if (progress) progress(m);
    };
    BuildOptions build;
    build.exec = exec;
    build.assembly_degree = cfg.assembly_degree;
    build.data_degree = cfg.data_degree;

    std::vector<ResultRow> rows;
    for (ExampleId ex : cfg.examples) {
        for (double nu : cfg.nu) {
            for (double alpha : cfg.alpha) {
                std::unique_ptr<ReferenceField> reference;
                if (ex == ExampleId::Ex1) {
                    const ReferenceKey key{ex, nu, alpha, cfg.reference_level};
                    say("reference " + key.name());
                    reference = std::make_unique<ReferenceSolution>(
                        obtain_reference(cache, key, cfg.generate_references, cfg.reference_tolerance, exec));
                } else {
                    reference = std::make_unique<AnalyticReference>(example2_solution(example_data(ex, nu, 0.0)));
                }
                const Region control = example_data(ex, nu, 0.0).control_region;
                for (Scheme scheme : cfg.schemes) {
                    // rows for this block, indexed [eps][level]
                    std::vector<std::vector<ResultRow>> block(cfg.eps.size());
                    for (int n : cfg.levels) {
                        say("example " + std::to_string(static_cast<int>(ex)) + " " + to_string(scheme) +
                            " nu=" + sci(nu) + " alpha=" + sci(alpha) + " n=" + std::to_string(n));
                        SchemeConfig sc;
                        sc.scheme = scheme;
                        sc.nu = nu;
                        sc.alpha = alpha;
                        sc.example = ex;
                        sc.tolerance = cfg.tolerance;
                        const auto t0 = std::chrono::steady_clock::now();
                        const Discretization disc = make_discretization(scheme_mesh(n, ex, scheme), scheme, exec);
                        const KktSystem sys = build_system(disc, sc, example_data(ex, nu, 0.0), build);
                        const KktFactorization fact(sys);
                        const double setup = seconds_since(t0);
                        for (std::size_t k = 0; k < cfg.eps.size(); ++k) {
                            const auto t1 = std::chrono::steady_clock::now();
                            sc.eps = cfg.eps[k];
                            SolutionFields f = fact.solve(build_rhs(sys, disc, example_data(ex, nu, sc.eps), build));
                            recover_control(f, disc, sc);
                            ResultRow row;
                            row.example = ex;
                            row.scheme = scheme;
                            row.n = n;
                            row.nu = nu;
                            row.alpha = alpha;
                            row.eps = sc.eps;
                            row.ndof = disc.velocity->num_dofs() + disc.pressure->num_dofs();
                            row.solve_seconds = setup + seconds_since(t1);
                            row.errors = compute_errors(disc, f, *reference, control, cfg.error_degree, exec);
                            block[k].push_back(row);
                        }
                    }
                    for (auto& levels : block) {
                        std::vector<ErrorReport> reports;
                        for (const auto& r : levels) reports.push_back(r.errors);
                        fill_eoc(reports);
                        for (std::size_t i = 0; i < levels.size(); ++i) {
                            levels[i].errors = reports[i];
                            rows.push_back(levels[i]);
                        }
                    }
                }
            }
        }
    }
    return rows;
}

std::string csv_header()
{
    return "example,scheme,n,h,ndof,nu,alpha,eps,err_energy,err_u_h1,err_u_l2,err_z_h1,err_q_l2,eoc_energy,eoc_u_l2,"
           "eoc_q,solve_seconds";
}

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows)
{
    os << csv_header() << '\n';
    for (const auto& r : rows) {
        const ErrorReport& e = r.errors;
        os << static_cast<int>(r.example) << ',' << to_string(r.scheme) << ',' << r.n << ',' << sci(e.h) << ','
           << r.ndof << ',' << sci(r.nu) << ',' << sci(r.alpha) << ',' << sci(r.eps) << ',' << sci(e.energy) << ','
           << sci(e.u_h1) << ',' << sci(e.u_l2) << ',' << sci(e.z_h1) << ',' << sci(e.q_l2) << ','
           << eoc_cell(e.eoc_energy) << ',' << eoc_cell(e.eoc_u_l2) << ',' << eoc_cell(e.eoc_q) << ',';
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", r.solve_seconds);
        os << buf << '\n';
    }
}

void write_markdown(std::ostream& os, const std::vector<ResultRow>& rows)
{
    std::vector<std::tuple<int, double, double>> groups;
    for (const auto& r : rows) {
        const auto g = std::make_tuple(static_cast<int>(r.example), r.nu, r.alpha);
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
    for (const auto& [ex, nu, alpha] : groups) {
        char title[128];
        std::snprintf(title, sizeof title, "## Example %d, nu = %.0e, alpha = %.0e\n\n", ex, nu, alpha);
        os << title;
        os << "| scheme | eps | n | energy error | eoc | velocity L2 error | eoc | control L2 error | eoc |\n";
        os << "|---|---|---|---|---|---|---|---|---|\n";
        for (const auto& r : rows) {
            if (static_cast<int>(r.example) != ex || r.nu != nu || r.alpha != alpha) continue;
            char eps[32];
            std::snprintf(eps, sizeof eps, "%.0e", r.eps);
            char line[320];
            std::snprintf(line, sizeof line, "| %s | %s | %d | %.3e | %s | %.3e | %s | %.3e | %s |\n",
                          to_string(r.scheme).c_str(), eps, r.n, r.errors.energy,
                          eoc_cell(r.errors.eoc_energy).c_str(), r.errors.u_l2, eoc_cell(r.errors.eoc_u_l2).c_str(),
                          r.errors.q_l2, eoc_cell(r.errors.eoc_q).c_str());
            os << line;
        }
        os << '\n';
    }
}

std::vector<ResultRow> run_example(const RunConfig& cfg, Exec exec, const Progress& progress)
{
    const ReferenceCache cache(cfg.cache_dir);
    std::vector<ResultRow> rows = run_sweep(cfg, cache, exec, progress);
    std::ostringstream csv, md;
    write_csv(csv, rows);
    write_markdown(md, rows);
    write_file_atomic(cfg.output_dir, "results.csv", csv.str());
    write_file_atomic(cfg.output_dir, "summary.md", md.str());
    return rows;
}

void write_file_atomic(const fs::path& dir, const std::string& name, const std::string& contents)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
    const fs::path tmp = dir / (name + ".tmp." + std::to_string(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, dir / name, ec);
    if (ec) throw Error("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace prc
