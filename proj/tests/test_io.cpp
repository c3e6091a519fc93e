#include "doctest.h"

#include "qglab/config.hpp"
#include "qglab/container.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace qglab;

namespace {
std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}
}  // namespace

TEST_CASE("config parses key=value with comments") {
    Config c = Config::parse_string("a = 1.5 # comment\n\n# line\nname=case0\nn = 42\n");
    CHECK(c.get_double("a") == 1.5);
    CHECK(c.get_str("name") == "case0");
    CHECK(c.get_int("n") == 42);
    CHECK(c.get_int("missing", 7) == 7);
    CHECK_THROWS(c.get_double("name"));
    CHECK_THROWS(c.get_str("missing"));
}

TEST_CASE("config hash is order-independent and content-sensitive") {
    Config a = Config::parse_string("x=1\ny=2\n");
    Config b = Config::parse_string("y=2\nx=1\n");
    Config c = Config::parse_string("x=1\ny=3\n");
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
}

TEST_CASE("tensor container round-trips byte-identically") {
    TensorContainer c;
    c.config_hash = "deadbeef00112233";
    c.add("a", {2, 3}, {1.0, 2.5, -3.0, 4.0, 5.0, 6.25});
    c.add_f32("b", {4}, {1.0f, 0.5f, -2.0f, 3.5f});
    c.add_scalar("t", 12345.0);

    const std::string p1 = tmp_path("qglab_io_1.bin");
    const std::string p2 = tmp_path("qglab_io_2.bin");
    c.save(p1);

    TensorContainer r = TensorContainer::load(p1);
    CHECK(r.config_hash == c.config_hash);
    CHECK(r.f64("a") == c.f64("a"));
    CHECK(r.get("b").f32 == c.get("b").f32);
    CHECK(r.scalar("t") == 12345.0);
    CHECK(r.get("a").shape == std::vector<uint64_t>{2, 3});

    r.save(p2);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("tensor container detects corruption") {
    TensorContainer c;
    c.add("x", {2}, {1.0, 2.0});
    const std::string p = tmp_path("qglab_io_corrupt.bin");
    c.save(p);
    {
        std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(20);
        char z = 0x5a;
        f.write(&z, 1);
    }
    CHECK_THROWS_AS(TensorContainer::load(p), IoError);
    std::remove(p.c_str());
}

TEST_CASE("manifest round-trip") {
    const std::string p = tmp_path("qglab_manifest.txt");
    std::map<std::string, std::string> kv{{"seed", "42"}, {"config_hash", "abc"}};
    write_manifest(p, kv);
    CHECK(read_manifest(p) == kv);
    std::remove(p.c_str());
}
