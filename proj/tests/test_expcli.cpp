#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mgt/config.hpp"
#include "mgt/errors.hpp"
#include "mgt/experiment.hpp"
#include "mgt/io.hpp"
#include "mgt/parallel.hpp"

using namespace mgt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mgt_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentConfig small_dn(const fs::path& out) {
    ExperimentConfig c = default_config("dn");
    c.grid.N = 31;
    c.time.T = 1.0;
    c.time.dt = 1e-2;
    c.exterior.n_temporal = 2;
    c.output_dir = out.string();
    return parse_config(to_json(c));
}

}  // namespace

TEST_CASE("config rejects unknown keys at every level") {
    json doc = to_json(default_config("forward"));
    CHECK_NOTHROW(parse_config(doc));
    json top = doc;
    top["colour"] = 1;
    CHECK_THROWS_AS(parse_config(top), ConfigError);
    json nested = doc;
    nested["grid"]["spacing"] = 0.1;
    CHECK_THROWS_AS(parse_config(nested), ConfigError);
    json pipe = doc;
    pipe["pipeline"] = "nonsense";
    CHECK_THROWS_AS(parse_config(pipe), ConfigError);
}

TEST_CASE("config validation: seed, reversal flag and ladder") {
    json doc = to_json(default_config("invert-q"));
    doc["inversion"]["noise_level"] = 0.01;
    doc["inversion"].erase("seed");
    CHECK_THROWS_AS(parse_config(doc), ConfigError);
    doc["inversion"]["seed"] = 7;
    CHECK(parse_config(doc).seed() == 7);

    json rev = to_json(default_config("dn"));
    rev["potential"]["time_dependence"] = "linear";
    rev["potential"]["reversal_invariant"] = true;
    CHECK_THROWS_AS(parse_config(rev), ConfigError);
    rev["potential"]["reversal_invariant"] = false;
    CHECK_NOTHROW(parse_config(rev));

    json lad = to_json(default_config("regularize"));
    lad["regularize"]["ladder"] = json::array({1e-3, 1e-2});
    CHECK_THROWS_AS(parse_config(lad), ConfigError);
}

TEST_CASE("every default config survives a JSON round trip") {
    for (const auto& name : pipeline_names()) {
        const json a = to_json(default_config(name));
        const json b = to_json(parse_config(a));
        CHECK_MESSAGE(a == b, name);
    }
    CHECK_THROWS_AS(default_config("nonsense"), ConfigError);
}

TEST_CASE("config files load from disk") {
    const fs::path dir = scratch("load");
    write_text(dir / "c.json", to_json(default_config("sweep")).dump(2));
    CHECK(load_config(dir / "c.json").pipeline == "sweep");
    write_text(dir / "bad.json", "{ not json");
    CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("SHA-256 of known strings") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("binary fields round-trip and detect corruption") {
    const fs::path dir = scratch("field");
    Eigen::MatrixXd m(3, 4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = 1.0 / (1.0 + i) - 0.1 * j;
    const auto paths = write_field(dir / "u", m, json{{"quantity", "u"}});
    REQUIRE(paths.size() == 2);
    CHECK((read_field(dir / "u") - m).norm() == 0.0);
    const json meta = json::parse(slurp(dir / "u.json"));
    CHECK(meta["rows"] == 3);
    CHECK(meta["cols"] == 4);
    CHECK(meta["layout"] == "row-major");
    CHECK(meta["meta"]["quantity"] == "u");

    std::string bytes = slurp(dir / "u.bin");
    bytes[5] ^= 0x10;
    std::ofstream(dir / "u.bin", std::ios::binary) << bytes;
    CHECK_THROWS_AS(read_field(dir / "u"), IoError);
    CHECK_THROWS_AS(read_field(dir / "absent"), IoError);
}

TEST_CASE("CSV rendering keeps round-trip precision") {
    CsvTable t{{"name", "count", "value"}, {}};
    t.add({std::string("a"), 3LL, 0.1});
    t.add({std::string("b"), -1LL, 1.0 / 3.0});
    const std::string s = t.render();
    CHECK(s.rfind("name,count,value\n", 0) == 0);
    CHECK(s.find("\na,3,") != std::string::npos);
    CHECK(std::stod(format_double(0.1)) == 0.1);
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK_THROWS_AS(t.add({1.0}), ShapeMismatch);
}

TEST_CASE("checks classify values against their windows") {
    CHECK(make_check("x", 0.5, 0.0, 1.0).pass);
    CHECK_FALSE(make_check("x", 1.5, 0.0, 1.0).pass);
    CHECK_FALSE(make_check("x", std::nan(""), 0.0, 1.0).pass);
    CHECK(info_check("x", 3.0).informational());
    RunManifest m;
    m.checks = {make_check("a", 0.5, 0.0, 1.0), info_check("b", 9.0)};
    CHECK(m.passed());
    m.checks.push_back(make_check("c", 2.0, 0.0, 1.0));
    CHECK_FALSE(m.passed());
}

TEST_CASE("empty report") {
    const fs::path dir = scratch("empty");
    const auto paths = emit_report({}, dir);
    CHECK(paths.size() == 3);
    CHECK(slurp(dir / "summary.txt").empty());
    CHECK(fs::exists(dir / "checks.csv"));
}

TEST_CASE("runs are deterministic and independent of the worker count") {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    setenv("MGTLAB_THREADS", "1", 1);
    CHECK(thread_count() == 1);
    const RunManifest ma = run_experiment(small_dn(a));
    setenv("MGTLAB_THREADS", "3", 1);
    CHECK(thread_count() == 3);
    const RunManifest mb = run_experiment(small_dn(b));
    unsetenv("MGTLAB_THREADS");

    CHECK(ma.config_hash != mb.config_hash);  // output directories differ
    REQUIRE(ma.artifacts == mb.artifacts);
    REQUIRE(!ma.artifacts.empty());
    for (const auto& f : ma.artifacts) {
        CHECK(fs::exists(a / f));
        if (f.ends_with(".csv") || f.ends_with(".bin")) CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
    }
    emit_report({ma}, a);
    const json manifest = json::parse(slurp(a / "manifest.json"));
    CHECK(manifest[0]["pipeline"] == "dn");
    CHECK(manifest[0]["config_hash"] == ma.config_hash);
    CHECK(slurp(a / "summary.txt").find("dn") != std::string::npos);
}
