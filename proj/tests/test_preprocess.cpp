#include <doctest.h>

#include <cmath>

#include "lormika/error.hpp"
#include "lormika/preprocess.hpp"
#include "support.hpp"

using namespace lormika;

namespace {

InstanceTable numeric_table(const std::vector<double>& xs) {
    DatasetSchema schema({ColumnSpec::numeric("x"), ColumnSpec::categorical("y", {"a", "b"})}, "y");
    std::vector<Instance> rows;
    for (std::size_t i = 0; i < xs.size(); ++i) rows.push_back({{xs[i], Category{i % 2}}});
    return InstanceTable(schema, rows);
}

}  // namespace

TEST_SUITE("preprocess") {
    TEST_CASE("one to six: mean, population deviation and two rows per bin") {
        const auto t = numeric_table({1, 2, 3, 4, 5, 6});
        const auto model = fit(t);
        const auto& s = model.numeric().at(0);
        CHECK(s.mean == doctest::Approx(3.5));
        CHECK(s.stddev == doctest::Approx(std::sqrt(17.5 / 6.0)));
        const auto d = model.discretize(t);
        std::array<int, 3> counts{};
        for (const auto& r : d.rows()) ++counts[std::get<Category>(r.values[0]).index];
        CHECK(counts == std::array<int, 3>{2, 2, 2});
        CHECK(d.schema().column(0).categories == std::vector<std::string>{"bin_0", "bin_1", "bin_2"});
    }

    TEST_CASE("zero and ten put ten at plus one") {
        const auto model = fit(numeric_table({0, 10}));
        CHECK(model.encode({{10.0, Category{0}}})[0] == doctest::Approx(1.0));
        CHECK(model.encode({{0.0, Category{0}}})[0] == doctest::Approx(-1.0));
    }

    TEST_CASE("constant column encodes to zero") {
        const auto model = fit(numeric_table({4, 4, 4}));
        CHECK(model.numeric()[0].stddev == 0.0);
        CHECK(model.encode({{4.0, Category{0}}})[0] == 0.0);
        CHECK(model.encode({{9.0, Category{0}}})[0] == 0.0);
    }

    TEST_CASE("a value equal to an edge falls in the lower bin") {
        const std::array<double, 2> edges{1.0, 2.0};
        CHECK(bin_index(edges, 1.0) == 0);
        CHECK(bin_index(edges, std::nextafter(1.0, 2.0)) == 1);
        CHECK(bin_index(edges, 2.0) == 1);
        CHECK(bin_index(edges, 2.5) == 2);
    }

    TEST_CASE("quantile interpolation") {
        const std::vector<double> v{1, 2, 3, 4, 5, 6};
        CHECK(interpolated_quantile(v, 1.0 / 3.0) == doctest::Approx(2.0 + 2.0 / 3.0));
        CHECK(interpolated_quantile(v, 2.0 / 3.0) == doctest::Approx(4.0 + 1.0 / 3.0));
        CHECK(interpolated_quantile(v, 0.0) == 1.0);
        CHECK(interpolated_quantile(v, 1.0) == 6.0);
    }

    TEST_CASE("mixed encoding layout and imputation") {
        DatasetSchema schema({ColumnSpec::categorical("c", {"p", "q", "r"}), ColumnSpec::numeric("x"),
                              ColumnSpec::categorical("y", {"a", "b"})},
                             "y");
        const InstanceTable t(schema, {{{Category{1}, 1.0, Category{0}}},
                                       {{Category{1}, 3.0, Category{1}}},
                                       {{Category{2}, Missing{}, Category{0}}}});
        const auto model = fit(t);
        CHECK(model.encoded_width() == 4);
        CHECK(model.numeric()[0].impute_value == 2.0);
        CHECK(model.categorical()[0].mode_index == 1);
        const auto e = model.encode({{Missing{}, Missing{}, Category{0}}});
        CHECK(e == std::vector<double>{0.0, 0.0, 1.0, 0.0});
        const auto d = model.discretize(Instance{{Category{2}, Missing{}, Missing{}}});
        CHECK(std::holds_alternative<Category>(d.values[1]));
        CHECK(is_missing(d.values[2]));
    }

    TEST_CASE("fit errors") {
        DatasetSchema schema({ColumnSpec::numeric("x"), ColumnSpec::categorical("y", {"a"})}, "y");
        CHECK_THROWS_AS(fit(InstanceTable(schema, {})), Error);
        try {
            (void)fit(InstanceTable(schema, {{{Missing{}, Category{0}}}}));
            FAIL("expected failure");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::all_missing_column);
        }
        const auto model = fit(numeric_table({1, 2}));
        DatasetSchema other({ColumnSpec::numeric("z"), ColumnSpec::categorical("y", {"a", "b"})}, "y");
        CHECK_THROWS_AS((void)model.transform(InstanceTable(other, {})), Error);
    }

    TEST_CASE("property: encoded numeric columns have mean 0 and unit deviation") {
        Rng rng(3);
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<double> xs;
            const auto n = 2 + rng.below(100);
            const double scale = std::pow(10.0, rng.uniform(-3, 4));
            for (std::size_t i = 0; i < n; ++i) xs.push_back(rng.uniform(-1, 1) * scale);
            const auto t = numeric_table(xs);
            const auto model = fit(t);
            const auto enc = model.transform(t);
            double sum = 0.0, ss = 0.0;
            for (const auto& e : enc) sum += e[0];
            const double mean = sum / static_cast<double>(n);
            for (const auto& e : enc) ss += (e[0] - mean) * (e[0] - mean);
            CHECK(std::abs(mean) < 1e-9);
            CHECK(std::abs(std::sqrt(ss / static_cast<double>(n)) - 1.0) < 1e-9);
        }
    }

    TEST_CASE("property: bins are monotone in the raw value") {
        Rng rng(4);
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<double> xs;
            const auto n = 1 + rng.below(60);
            for (std::size_t i = 0; i < n; ++i) xs.push_back(static_cast<double>(rng.below(10)));
            const auto model = fit(numeric_table(xs));
            const auto& edges = model.numeric()[0].bin_edges;
            CHECK(edges[0] <= edges[1]);
            for (int i = 0; i < 50; ++i) {
                const double a = rng.uniform(-2, 12);
                const double b = rng.uniform(-2, 12);
                if (a <= b) {
                    CHECK(bin_index(edges, a) <= bin_index(edges, b));
                } else {
                    CHECK(bin_index(edges, a) >= bin_index(edges, b));
                }
            }
            const auto& iv = model.discretized_schema().column(0).bins;
            REQUIRE(iv.size() == 3);
            CHECK_FALSE(iv[0].lo.has_value());
            CHECK(iv[0].hi == edges[0]);
            CHECK(iv[2].lo == edges[1]);
            CHECK_FALSE(iv[2].hi.has_value());
        }
    }

    TEST_CASE("model JSON round trip") {
        const auto t = testsupport::read_table("x,c,y\n1,p,a\n5,q,b\n3,q,a\n", DatasetSchema(
            {ColumnSpec::numeric("x"), ColumnSpec::categorical("c", {"p", "q"}),
             ColumnSpec::categorical("y", {"a", "b"})},
            "y"));
        const auto model = fit(t);
        CHECK(PreprocessorModel::from_json(model.to_json(), t.schema()) == model);
    }
}
