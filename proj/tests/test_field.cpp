#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gfe/field.hpp"
#include "gfe/stats.hpp"

using namespace gfe;

namespace {

Matrix equicorr_matrix(std::size_t n, double rho) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m.at(i, j) = i == j ? 1.0 : rho;
    return m;
}

} // namespace

TEST_CASE("block field structure") {
    const GaussianField f = GaussianField::block(2, 6);
    CHECK(f.kind() == FieldKind::block);
    CHECK(f.size() == 6);
    CHECK(f.block_count() == 2);
    CHECK(f.driver_size() == 2);
    CHECK(f.block_of(0) == 0);
    CHECK(f.block_of(2) == 0);
    CHECK(f.block_of(3) == 1);
    CHECK(f.covariance(0, 1) == 1.0);
    CHECK(f.covariance(0, 3) == 0.0);
    CHECK(f.variance_of(5) == 1.0);
    CHECK(f.max_variance() == 1.0);
    CHECK(f.centered());
    CHECK_THROWS_AS(GaussianField::block(4, 6), std::invalid_argument);
    CHECK_THROWS_AS(GaussianField::block(0, 6), std::invalid_argument);
    CHECK_THROWS_AS(f.covariance(0, 6), std::invalid_argument);
}

TEST_CASE("independent is one index per block") {
    const GaussianField f = GaussianField::independent(4);
    CHECK(f.block_count() == 4);
    CHECK(f.covariance(1, 2) == 0.0);
    CHECK(f.covariance(2, 2) == 1.0);
}

TEST_CASE("shifted field covariance") {
    const GaussianField f = GaussianField::shifted(4, 1.0);
    CHECK(f.driver_size() == 5);
    CHECK(f.variance_of(0) == Catch::Approx(1.0));
    CHECK(f.covariance(0, 3) == Catch::Approx(0.5));
    CHECK(f.alpha() == 1.0);
    CHECK_THROWS_AS(GaussianField::shifted(4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(GaussianField::shifted(4, std::numbers::sqrt2), std::invalid_argument);
    CHECK_THROWS_AS(GaussianField::shifted(0, 1.0), std::invalid_argument);
}

TEST_CASE("polymer and spin wrappers expose the right sizes") {
    const GaussianField poly = GaussianField::directed_polymer(3);
    CHECK(poly.size() == 20);
    CHECK(poly.driver_size() == 24);
    CHECK(poly.max_variance() == 6.0);
    CHECK(poly.covariance(0, 0) == 6.0);

    const GaussianField spin = GaussianField::spin_glass(4);
    CHECK(spin.size() == 16);
    CHECK(spin.driver_size() == 16);
    CHECK(spin.max_variance() == 2.0);
}

TEST_CASE("normalized rescales the maximum variance to one") {
    const GaussianField poly = GaussianField::directed_polymer(3).normalized();
    CHECK(poly.max_variance() == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(poly.value_scale() == Catch::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-12));
    const GaussianField spin = GaussianField::spin_glass(4).normalized();
    CHECK(spin.max_variance() == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("explicit factor validation") {
    Matrix rows(2, 2);
    rows.at(0, 0) = 1.0;
    rows.at(1, 1) = 2.0; // norm 2 > 1
    CHECK_THROWS_WITH(GaussianField::explicit_dense(rows),
                      Catch::Matchers::ContainsSubstring("norm above 1"));
    CHECK_THROWS_AS(GaussianField::explicit_dense(Matrix(0, 0)), std::invalid_argument);
    CHECK_THROWS_AS(GaussianField::explicit_dense(Matrix(2, 2)), std::invalid_argument); // all zero
    Matrix ok(1, 1);
    ok.at(0, 0) = 1.0;
    CHECK_THROWS_AS(GaussianField::explicit_dense(ok, {0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(GaussianField::explicit_axes({3}, 2), std::invalid_argument);
    CHECK_THROWS_AS(GaussianField::explicit_axes({}, 2), std::invalid_argument);
}

TEST_CASE("explicit means shift the values") {
    Matrix rows(2, 1);
    rows.at(0, 0) = 1.0;
    rows.at(1, 0) = 0.5;
    const GaussianField f = GaussianField::explicit_dense(rows, {1.0, -2.0});
    CHECK(!f.centered());
    CHECK(f.mean_of(0) == 1.0);
    CHECK(f.mean_of(1) == -2.0);
    const FieldSample fs = with_driver(f, {0.25});
    CHECK(fs.values[0] == Catch::Approx(0.25 + 1.0));
    CHECK(fs.values[1] == Catch::Approx(0.125 - 2.0));
}

TEST_CASE("covariance matrix round trip through the factor") {
    const Matrix cov = equicorr_matrix(5, 0.3);
    double clipped = -1.0;
    const GaussianField f = GaussianField::from_covariance(cov, {}, &clipped);
    CHECK(clipped == 0.0);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            CHECK(f.covariance(i, j) == Catch::Approx(cov.at(i, j)).margin(1e-10));
}

TEST_CASE("empirical covariance of a factored field") {
    const Matrix cov = equicorr_matrix(3, -0.4);
    const GaussianField f = GaussianField::from_covariance(cov);
    Welford c01, v0;
    for (int t = 0; t < 40'000; ++t) {
        const FieldSample fs = sample(f, 321, streams::trial(t));
        c01.add(fs.values[0] * fs.values[1]);
        v0.add(fs.values[0] * fs.values[0]);
    }
    CHECK(std::abs(c01.mean() - (-0.4)) < 0.03);
    CHECK(std::abs(v0.mean() - 1.0) < 0.03);
}

TEST_CASE("sampling is a pure function of seed and stream") {
    const GaussianField f = GaussianField::shifted(8, 0.7);
    const FieldSample a = sample(f, 9, streams::trial(4));
    const FieldSample b = sample(f, 9, streams::trial(4));
    CHECK(a.driver == b.driver);
    CHECK(a.values == b.values);
    const FieldSample c = sample(f, 9, streams::trial(5));
    CHECK(a.driver != c.driver);
}

TEST_CASE("with_driver validates the driver size") {
    const GaussianField f = GaussianField::independent(3);
    CHECK_THROWS_AS(with_driver(f, {1.0}), std::invalid_argument);
    const FieldSample fs = with_driver(f, {1.0, -2.0, 0.5});
    CHECK(fs.values == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("implicit kinds compute values on demand") {
    const GaussianField poly = GaussianField::directed_polymer(2);
    const FieldSample fs = sample(poly, 11, streams::trial(0));
    CHECK(!fs.materialized());
    const auto& lat = poly.lattice();
    for (std::uint64_t r = 0; r < poly.size(); ++r)
        CHECK(fs.value_of(r) == lat.path_value(fs.driver, r));
}

TEST_CASE("block sample duplicates driver coordinates") {
    const GaussianField f = GaussianField::block(2, 4);
    const FieldSample fs = with_driver(f, {3.0, -1.0});
    CHECK(fs.values == std::vector<double>{3.0, 3.0, -1.0, -1.0});
}

TEST_CASE("describe names the kind") {
    CHECK(GaussianField::independent(4).describe() == "block N=4 K=4");
    CHECK(GaussianField::shifted(2, 1.0).describe().find("shifted N=2") == 0);
    CHECK(GaussianField::directed_polymer(2).normalized().describe().find("scale=") !=
          std::string::npos);
}
