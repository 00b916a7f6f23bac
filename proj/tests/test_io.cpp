#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "dosres/io.hpp"
#include "dosres/spectra.hpp"
#include "test_support.hpp"

using namespace dosres;
using namespace dosres::testing;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

const std::string kData = DOSRES_DATA_DIR;

bool bit_identical(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool bit_identical(const BlockSystem& a, const BlockSystem& b) {
    if (a.state_dims != b.state_dims || a.input_dims != b.input_dims) return false;
    const int N = a.subsystems();
    for (int i = 0; i < N; ++i) {
        if (!bit_identical(a.B_blocks[i], b.B_blocks[i])) return false;
        for (int j = 0; j < N; ++j)
            if (!bit_identical(a.A_blocks[i][j], b.A_blocks[i][j]) || !bit_identical(a.K_blocks[i][j], b.K_blocks[i][j]))
                return false;
    }
    return true;
}

const char* kTwoBlock = R"({
  "name": "two",
  "subsystems": [{"n": 2, "m": 1}, {"n": 1, "m": 1}],
  "A_blocks": {"1,1": [[-1, 0], [0, -2]], "2,2": [[-3]]},
  "B_blocks": {"1": [[1], [0]], "2": [[2]]}
})";

}  // namespace

TEST_CASE("bundled motivating document", "[io]") {
    const NamedSystem doc = read_system_file(kData + "/motivating.json");
    CHECK(doc.name == "motivating");
    CHECK(bit_identical(doc.system, motivating_system()));
    CHECK(closed_loop(doc.system, RelaxedStrategy::nominal(3)) == displayed_Ac());
}

TEST_CASE("missing gain and coupling blocks default to zero", "[io]") {
    const NamedSystem doc = parse_system(kTwoBlock);
    CHECK(doc.name == "two");
    CHECK(doc.system.A_blocks[0][1].isZero(0.0));
    CHECK(doc.system.A_blocks[1][0].isZero(0.0));
    for (const auto& row : doc.system.K_blocks)
        for (const auto& K : row) CHECK(K.isZero(0.0));
    CHECK(doc.system.B_blocks[1](0, 0) == 2.0);
}

TEST_CASE("semantic errors name the block", "[io][errors]") {
    const std::string bad = R"({
      "subsystems": [{"n": 2, "m": 2}],
      "A_blocks": {"1,1": [[1, 2], [3, 4], [5, 6]]},
      "B_blocks": {"1": [[1, 0], [0, 1]]}
    })";
    CHECK_THROWS_AS(parse_system(bad), ShapeError);
    CHECK_THROWS_WITH(parse_system(bad), ContainsSubstring("A_1,1") && ContainsSubstring("expected 2x2") &&
                                             ContainsSubstring("got 3x2"));

    CHECK_THROWS_WITH(parse_system(R"({"subsystems": [{"n": 1, "m": 1}], "A_blocks": {"1,1": [[1]]}})"),
                      ContainsSubstring("B_1"));
    CHECK_THROWS_WITH(parse_system(R"({"subsystems": [{"n": 1}, {"n": 1}], "A_blocks": {"1,1": [[1]]}})"),
                      ContainsSubstring("A_2,2"));
    CHECK_THROWS_WITH(parse_system(R"({"subsystems": [{"n": 1}], "A_blocks": {"1,1": [["x"]]}})"),
                      ContainsSubstring("non-numeric"));
    CHECK_THROWS_WITH(parse_system(R"({"subsystems": [{"n": 1}], "A_blocks": {"1,1": [[1]], "1,2": [[0]]}})"),
                      ContainsSubstring("bad block key"));
}

TEST_CASE("syntax errors carry a position", "[io][errors]") {
    const std::string text = "{\n  \"subsystems\": [\n    {\"n\": 1,,}\n  ]\n}";
    CHECK_THROWS_AS(parse_system(text), DocumentError);
    CHECK_THROWS_WITH(parse_system(text), ContainsSubstring("line 3"));
}

TEST_CASE("serialization round-trips bit for bit", "[io][property]") {
    for (const char* name : {"motivating", "random:7:3", "random:11:4", "random:123456789:2"}) {
        const BlockSystem sys = builtin(name).system;
        const std::string text = serialize_system(sys, name);
        const NamedSystem back = parse_system(text);
        CHECK(back.name == name);
        CHECK(bit_identical(back.system, sys));
        CHECK(serialize_system(back.system, name) == text);
    }
}

TEST_CASE("builtin systems", "[io][builtin]") {
    CHECK(spectral_abscissa(closed_loop(motivating_system(), RelaxedStrategy(Matrix::Identity(3, 3)))) ==
          Approx(-0.5).margin(1e-9));
    Matrix a = Matrix::Ones(3, 3);
    a(1, 2) = 0.0;
    CHECK(spectral_abscissa(closed_loop(motivating_system(), RelaxedStrategy(a))) == Approx(5.1596).margin(1e-3));

    CHECK(bit_identical(builtin("random:7:3").system, builtin("random:7:3").system));
    CHECK_FALSE(bit_identical(builtin("random:7:3").system, builtin("random:8:3").system));

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const BlockSystem sys = random_system(seed, 4);
        CHECK(abscissa_oracle(closed_loop(sys, RelaxedStrategy::nominal(4))) == Approx(-0.1).margin(1e-8));
    }

    CHECK_THROWS_AS(builtin("nope"), DocumentError);
    CHECK_THROWS_AS(builtin("random:7"), DocumentError);
    CHECK_THROWS_AS(builtin("random:x:3"), DocumentError);
    CHECK_THROWS_AS(builtin("random:7:0"), DocumentError);
    CHECK(load_system("motivating").name == "motivating");
    CHECK_THROWS_AS(load_system(kData + "/does-not-exist.json"), DocumentError);
}
