#include "doctest.h"

#include "mlsolve/errors.hpp"
#include "mlsolve/io.hpp"
#include "mlsolve/kinematics.hpp"

#include <random>

using namespace mlsolve;

namespace {

std::string data_path(const char* name) { return std::string(MLSOLVE_TEST_DATA) + "/" + name; }

} // namespace

TEST_CASE("data files are read exactly")
{
    auto c = parse_data(R"({"23": 0.1, "34": 12, "35": "7/9", "36": 1e-3})");
    CHECK(c.at("23") == Rational(1, 10));
    CHECK(c.at("34") == 12);
    CHECK(c.at("35") == Rational(7, 9));
    CHECK(c.at("36") == Rational(1, 1000));
    CHECK_THROWS_AS(parse_data(R"({"23": {"x": 1}})"), FormatError);
    CHECK_THROWS_AS(parse_data(R"({"23": 1, "23": 2})"), FormatError);
    CHECK_THROWS_AS(parse_data("{\"23\": "), FormatError);
    auto d = read_data(data_path("chy6_example.json"));
    CHECK(d.size() == 9);
    CHECK(d.at("56") == 27);
}

TEST_CASE("label validation lists every problem")
{
    auto model = chy_model(6);
    try {
        order_counts(model, LabeledCounts{});
        FAIL("expected an error");
    } catch (const DataError& e) {
        std::string msg = e.what();
        for (const auto& l : model.labels)
            CHECK(msg.find(l) != std::string::npos);
    }
    auto c = read_data(data_path("chy6_example.json"));
    c["99"] = 1;
    c.erase("23");
    try {
        order_counts(model, c);
        FAIL("expected an error");
    } catch (const DataError& e) {
        std::string msg = e.what();
        CHECK(msg.find("unknown labels [99]") != std::string::npos);
        CHECK(msg.find("missing labels [23]") != std::string::npos);
    }
}

TEST_CASE("k=2 completion")
{
    auto s = complete_k2(read_data(data_path("chy6_example.json")), 6);
    CHECK(s(1, 2) == 106);
    for (int i = 1; i <= 6; ++i)
        CHECK(s.row_sum(i) == 0);

    const Rational a(3, 7), b(-5);
    auto s4 = complete_k2(std::vector<Rational>{a, b}, 4);
    CHECK(s4(1, 2) == b);
    CHECK(s4(1, 4) == a);
    CHECK(s4(1, 3) == -a - b);
    CHECK(s4(2, 4) == -a - b);

    auto z = complete_k2(std::vector<Rational>(9, Rational(0)), 6);
    for (int i = 1; i <= 6; ++i)
        for (int j = 1; j <= 6; ++j)
            CHECK(z(i, j) == 0);

    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> u(-50, 50);
    for (int m = 4; m <= 12; ++m) {
        auto model = chy_model(m);
        std::vector<Rational> c(model.num_states());
        for (auto& v : c)
            v = Rational(u(rng)) / (1 + std::abs(u(rng)));
        auto full = complete_k2(c, m);
        for (int i = 1; i <= m; ++i) {
            CHECK(full.row_sum(i) == 0);
            CHECK(full(i, i) == 0);
        }
        CHECK(restrict_k2(full) == c);
        auto again = complete_k2(restrict_k2(full), m);
        for (int i = 1; i <= m; ++i)
            for (int j = 1; j <= m; ++j)
                CHECK(again(i, j) == full(i, j));
    }
}

TEST_CASE("k=3 completion")
{
    auto model6 = cegm3_model(6);
    auto ones = complete_k3(std::vector<Rational>(model6.num_states(), Rational(1)), 6);
    for (int i = 1; i <= 6; ++i)
        CHECK(ones.slice_sum(i) == 0);

    for (auto [file, m] : {std::pair{"cegm7_example.json", 7}, std::pair{"cegm8_example.json", 8}}) {
        auto counts = read_data(data_path(file));
        auto full = complete_k3(counts, m);
        for (int i = 1; i <= m; ++i)
            CHECK(full.slice_sum(i) == 0);
        CHECK(full(1, 3, 5) == counts.at("135"));
        CHECK(full(5, 3, 1) == counts.at("135"));
        CHECK(full(2, 2, 5) == 0);
        auto model = cegm3_model(m);
        CHECK(restrict_k3(full) == order_counts(model, counts));
    }
    CHECK_THROWS_AS(complete_k3(std::vector<Rational>(3), 6), DataError);
}
