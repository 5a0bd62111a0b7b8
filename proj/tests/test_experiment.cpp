#include "prc/experiment.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace prc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("prc_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error(const std::string& text)
{
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

RunConfig random_config(std::mt19937& gen)
{
    std::uniform_int_distribution<int> small(1, 4);
    std::uniform_real_distribution<double> expo(-8.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    RunConfig c;
    c.examples.clear();
    if (coin(gen)) c.examples.push_back(ExampleId::Ex1);
    c.examples.push_back(ExampleId::Ex2);
    c.schemes.clear();
    for (Scheme s : {Scheme::Classical, Scheme::PartialRobust, Scheme::FullRobust, Scheme::ScottVogelius})
        if (coin(gen) || c.schemes.empty()) c.schemes.push_back(s);
    c.levels.clear();
    for (int i = 0, k = small(gen); i < k; ++i) c.levels.push_back(5 * small(gen));
    auto list = [&](bool allow_zero) {
        std::vector<double> v;
        for (int i = 0, k = small(gen); i < k; ++i) v.push_back(allow_zero && coin(gen) ? 0.0 : std::pow(10.0, expo(gen)));
        return v;
    };
    c.nu = list(false);
    c.alpha = list(false);
    c.eps = list(true);
    c.assembly_degree = small(gen) + 4;
    c.data_degree = small(gen) + 8;
    c.error_degree = small(gen) + 2;
    c.tolerance = std::pow(10.0, expo(gen) - 4.0);
    c.reference_level = 80 * small(gen);
    c.reference_tolerance = std::pow(10.0, expo(gen));
    c.generate_references = coin(gen);
    c.cache_dir = "cache_" + std::to_string(small(gen));
    c.output_dir = "out/run " + std::to_string(small(gen));
    return c;
}

RunConfig small_sweep(const fs::path& dir)
{
    RunConfig c;
    c.levels = {5, 10};
    c.nu = {1e-3};
    c.alpha = {1e-3};
    c.reference_level = 20;
    c.cache_dir = (dir / "cache").string();
    c.output_dir = (dir / "out").string();
    return c;
}

/// CSV text with the trailing solve_seconds column removed.
std::string without_timings(const std::string& csv)
{
    std::stringstream in(csv), out;
    std::string line;
    while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << '\n';
    return out.str();
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults)
{
    const RunConfig c = parse_config("");
    EXPECT_EQ(c, RunConfig{});
    EXPECT_EQ(c.nu, (std::vector<double>{1.0, 1e-3}));
    EXPECT_EQ(c.alpha, (std::vector<double>{1e-1, 1e-3, 1e-4, 1e-6}));
    EXPECT_EQ(c.levels, (std::vector<int>{10, 20, 40}));
    EXPECT_EQ(parse_config("# only a comment\n\n   \n"), RunConfig{});
}

TEST(Config, Lists)
{
    const RunConfig c = parse_config("alpha = 1e-1, 1e-3\n");
    EXPECT_EQ(c.alpha, (std::vector<double>{1e-1, 1e-3}));
    const RunConfig d = parse_config("schemes = FullRobust,Classical  # trailing comment\nexample = 1\nlevels=5, 10\n");
    EXPECT_EQ(d.schemes, (std::vector<Scheme>{Scheme::FullRobust, Scheme::Classical}));
    EXPECT_EQ(d.examples, (std::vector<ExampleId>{ExampleId::Ex1}));
    EXPECT_EQ(d.levels, (std::vector<int>{5, 10}));
}

TEST(Config, ErrorsCarryLineNumbers)
{
    EXPECT_NE(config_error("nu = 1\nfoo = 2\n").find("line 2"), std::string::npos);
    EXPECT_NE(config_error("# c\n\nlevels 10\n").find("line 3"), std::string::npos);
    EXPECT_NE(config_error("alpha = 1e-3, x\n").find("line 1"), std::string::npos);
    EXPECT_NE(config_error("nu = 1\nnu = 2\n").find("twice"), std::string::npos);
    EXPECT_NE(config_error("eps =\n").find("line 1"), std::string::npos);
    EXPECT_NE(config_error("schemes = Fast\n").find("line 1"), std::string::npos);
}

TEST(Config, Validation)
{
    RunConfig c;
    c.levels = {7};
    EXPECT_THROW(validate(c), ConfigError);
    c.examples = {ExampleId::Ex1};
    c.reference_level = 7;
    EXPECT_NO_THROW(validate(c));
    c.alpha = {0.0};
    EXPECT_THROW(validate(c), ConfigError);
    RunConfig d;
    d.reference_level = 20;
    EXPECT_THROW(validate(d), ConfigError);
    EXPECT_NO_THROW(validate(RunConfig{}));
}

TEST(Config, RoundTripProperty)
{
    std::mt19937 gen(2024);
    for (int i = 0; i < 300; ++i) {
        const RunConfig c = random_config(gen);
        const std::string text = serialize_config(c);
        const RunConfig r = parse_config(text);
        ASSERT_EQ(r, c) << text;
        ASSERT_EQ(serialize_config(r), text);
    }
}

TEST(Config, HelpListsEveryKey)
{
    const std::string help = config_help();
    for (const char* key : {"example", "schemes", "levels", "nu", "alpha", "eps", "assembly_degree", "data_degree",
                            "error_degree", "tolerance", "reference_level", "reference_tolerance",
                            "generate_references", "cache_dir", "output_dir"})
        EXPECT_NE(help.find(key), std::string::npos) << key;
}

TEST(ReferenceCache, StoreLoadAndIdempotentRegeneration)
{
    const fs::path dir = scratch_dir("cache");
    const ReferenceKey key{ExampleId::Ex1, 1e-3, 1e-3, 10};
    EXPECT_EQ(key.name(), "ex1_nu1e-03_alpha1e-03_n10");
    const ReferenceCache a(dir / "a"), b(dir / "b");
    EXPECT_FALSE(a.contains(key));
    EXPECT_FALSE(a.load(key).has_value());
    try {
        (void)obtain_reference(a, key, false, 1e-8);
        FAIL() << "missing reference accepted";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find(a.file_for(key).string()), std::string::npos) << e.what();
    }

    const ReferenceSolution r1 = obtain_reference(a, key, true, 1e-8);
    const ReferenceSolution r2 = obtain_reference(b, key, true, 1e-8);
    EXPECT_TRUE(a.contains(key));
    EXPECT_EQ(slurp(a.file_for(key)), slurp(b.file_for(key)));
    EXPECT_NE(slurp(a.dir() / "manifest.txt").find(key.name()), std::string::npos);

    const auto loaded = a.load(key);
    ASSERT_TRUE(loaded.has_value());
    EXPECT_EQ(loaded->psi_u(), r1.psi_u());
    EXPECT_EQ(loaded->psi_z(), r1.psi_z());
    EXPECT_TRUE(loaded->key() == key);

    for (const auto& entry : fs::directory_iterator(a.dir()))
        EXPECT_EQ(entry.path().filename().string().find(".tmp"), std::string::npos) << entry.path();
    fs::remove_all(dir);
}

TEST(ReferenceCache, RequiredReferencesCoverExampleOneOnly)
{
    RunConfig c;
    const auto keys = required_references(c);
    EXPECT_EQ(keys.size(), c.nu.size() * c.alpha.size());
    for (const auto& k : keys) {
        EXPECT_EQ(k.example, ExampleId::Ex1);
        EXPECT_EQ(k.n, c.reference_level);
    }
    c.examples = {ExampleId::Ex2};
    EXPECT_TRUE(required_references(c).empty());
}

TEST(Sweep, CsvHeader)
{
    EXPECT_EQ(csv_header(),
              "example,scheme,n,h,ndof,nu,alpha,eps,err_energy,err_u_h1,err_u_l2,err_z_h1,err_q_l2,eoc_energy,"
              "eoc_u_l2,eoc_q,solve_seconds");
    std::stringstream ss;
    write_csv(ss, {});
    EXPECT_EQ(ss.str(), csv_header() + "\n");
}

TEST(Sweep, MissingReferenceWithGenerationDisabled)
{
    const fs::path dir = scratch_dir("nogen");
    RunConfig c = small_sweep(dir);
    c.generate_references = false;
    c.examples = {ExampleId::Ex1};
    EXPECT_THROW(run_example(c), Error);
    fs::remove_all(dir);
}

TEST(Sweep, SmallSweepIsCompleteAndReproducible)
{
    const fs::path dir = scratch_dir("sweep");
    const RunConfig c = small_sweep(dir);
    const auto rows = run_example(c);
    ASSERT_EQ(rows.size(), 2u * 4u * 1u * 1u * 2u * 2u);
    for (const auto& r : rows) {
        for (double v : {r.errors.energy, r.errors.u_h1, r.errors.u_l2, r.errors.z_h1, r.errors.q_l2, r.solve_seconds})
            EXPECT_TRUE(std::isfinite(v));
        EXPECT_EQ(r.ndof, r.errors.velocity_dofs + r.errors.pressure_dofs);
        EXPECT_EQ(r.errors.eoc_energy.has_value(), r.n == 10);
    }
    const std::string csv1 = slurp(fs::path(c.output_dir) / "results.csv");
    const std::string md = slurp(fs::path(c.output_dir) / "summary.md");
    EXPECT_EQ(csv1.substr(0, csv_header().size()), csv_header());
    EXPECT_EQ(std::count(csv1.begin(), csv1.end(), '\n'), static_cast<long>(rows.size() + 1));
    EXPECT_NE(md.find("FullRobust"), std::string::npos);

    // warm cache: identical values apart from timings
    run_example(c);
    EXPECT_EQ(without_timings(slurp(fs::path(c.output_dir) / "results.csv")), without_timings(csv1));
    fs::remove_all(dir);
}
