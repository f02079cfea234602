#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "gfe/peaks.hpp"
#include "gfe/zoo.hpp"

using namespace gfe;

namespace {

PeakQuery query(double delta, double eps, double m_ref) {
    PeakQuery q;
    q.delta = delta;
    q.eps = eps;
    q.m_ref = m_ref;
    return q;
}

} // namespace

TEST_CASE("query validation") {
    CHECK_THROWS_AS(query(0.0, 0.1, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(query(1.5, 0.1, 1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(query(0.5, 0.0, 1.0).validate(), std::invalid_argument);
    PeakQuery bad_zeta = query(0.5, 0.1, 1.0);
    bad_zeta.zeta = 0.0;
    CHECK_THROWS_AS(bad_zeta.validate(), std::invalid_argument);
    CHECK_NOTHROW(query(1.0, 0.1, 1.0).validate());

    PeakQuery no_ref;
    no_ref.delta = 0.5;
    no_ref.eps = 0.1;
    CHECK_THROWS_AS(no_ref.threshold(), std::invalid_argument);
    CHECK(query(0.5, 0.1, 2.0).threshold() == Catch::Approx(1.0));
}

TEST_CASE("normalized tolerance scales with the field ceiling") {
    PeakQuery q = query(0.5, 0.25, 1.0);
    q.normalized = true;
    const GaussianField f = GaussianField::directed_polymer(3);
    CHECK(q.eps_raw(f) == Catch::Approx(0.25 * f.max_variance()));
    q.normalized = false;
    CHECK(q.eps_raw(f) == Catch::Approx(0.25));
}

TEST_CASE("orthogonal pair admits both coordinates") {
    const GaussianField f = two_orthonormal();
    const FieldSample fs = with_driver(f, {2.0, 1.0});
    const PeakSet ps = extract_peaks(fs, query(0.5, 0.1, 2.0));
    REQUIRE(ps.size() == 2);
    CHECK(ps.indices == std::vector<std::uint64_t>{0, 1}); // descending value
    CHECK(ps.values == std::vector<double>{2.0, 1.0});
    CHECK(ps.max_abs_cov == Catch::Approx(0.0).margin(1e-12));
    CHECK(verify_peak_set(fs, query(0.5, 0.1, 2.0), ps));
}

TEST_CASE("correlated duplicates are blocked with a witness") {
    // Two blocks of two: inside a block the correlation is 1, across it 0.
    const GaussianField f = GaussianField::block(2, 4);
    const FieldSample fs = with_driver(f, {1.0, 0.9});
    const PeakSet ps = extract_peaks(fs, query(0.95, 0.5, 1.0));
    REQUIRE(ps.size() == 2);
    CHECK(ps.indices == std::vector<std::uint64_t>{0, 2}); // one per block
    REQUIRE(ps.witness.size() == 2);
    CHECK(ps.witness.at(1) == 0);
    CHECK(ps.witness.at(3) == 2);
    CHECK(std::abs(f.covariance(1, ps.witness.at(1))) > 0.5);
    CHECK(verify_peak_set(fs, query(0.95, 0.5, 1.0), ps));
}

TEST_CASE("verification rejects doctored peak sets") {
    const GaussianField f = GaussianField::block(2, 4);
    const FieldSample fs = with_driver(f, {1.0, 0.9});
    const PeakQuery q = query(0.95, 0.5, 1.0);
    const PeakSet ps = extract_peaks(fs, q);
    REQUIRE(verify_peak_set(fs, q, ps));

    PeakSet wrong_value = ps;
    wrong_value.values[0] += 0.5;
    CHECK_FALSE(verify_peak_set(fs, q, wrong_value));

    PeakSet correlated = ps; // both members of the first block
    correlated.indices = {0, 1};
    correlated.values = {1.0, 1.0};
    CHECK_FALSE(verify_peak_set(fs, q, correlated));

    PeakSet not_maximal = ps; // dropping the second block leaves index 2 unblocked
    not_maximal.indices = {0};
    not_maximal.values = {1.0};
    CHECK_FALSE(verify_peak_set(fs, q, not_maximal));
}

TEST_CASE("peak counts are monotone in the tolerances") {
    const GaussianField f = equicorrelated(16, 0.4);
    for (int rep = 0; rep < 20; ++rep) {
        const FieldSample fs = sample(f, 5, streams::trial(rep));
        const double m = supremum(fs).value;
        std::size_t prev = 0;
        for (double eps : {0.1, 0.3, 0.5, 0.8}) {
            const std::size_t n = extract_peaks(fs, query(0.9, eps, m)).size();
            CHECK(n >= prev); // looser correlation tolerance admits more
            prev = n;
        }
        prev = 0;
        for (double delta : {0.05, 0.3, 0.7, 1.0}) {
            const std::size_t n = extract_peaks(fs, query(delta, 0.4, m)).size();
            CHECK(n >= prev); // lower threshold admits more
            prev = n;
        }
    }
}

TEST_CASE("peak event frequency matches the exact block law") {
    // 8 blocks of 2 duplicated values: delta = 1 puts the threshold at 0,
    // eps = 0.5 admits exactly one index per nonnegative block, so the count
    // of peaks is Binomial(8, 1/2) and P(count >= 8) = 2^-8.
    PeakQuery q;
    q.delta = 1.0;
    q.eps = 0.5;
    const GaussianField f = GaussianField::block(8, 16);
    const PeakEventStats ev = estimate_peak_event(f, q, 8, 20'000, 31, 1, 2'000);
    const double p0 = std::pow(2.0, -8.0);
    CHECK(ev.trials == 20'000);
    CHECK(std::abs(ev.freq - p0) <= 4.0 * binomial_stderr(p0, ev.trials));
    CHECK(ev.ci.contains(ev.freq));
    CHECK(ev.m_ref > 0.0);
    CHECK(ev.sigma_hat > 0.0);
    if (ev.successes > 0) CHECK(ev.min_success_size >= 8);
    CHECK_THROWS_AS(estimate_peak_event(f, q, 0, 100, 1), std::invalid_argument);
}

TEST_CASE("cardinality bound applies to tight max intervals") {
    const GaussianField f = GaussianField::independent(16);
    std::vector<FieldSample> batch;
    std::vector<double> sups;
    for (int t = 0; t < 400; ++t) {
        batch.push_back(sample(f, 404, streams::trial(t)));
        sups.push_back(supremum(batch.back()).value);
    }
    std::sort(sups.begin(), sups.end());
    const double r = sorted_quantile(sups, 0.10);
    const double s = sorted_quantile(sups, 0.90);
    // Applicability needs s - r <= eps/8; the bound exp(eps^2/(32 gap^2))
    // must stay at or below 16 for the orthogonal basis to pass, which
    // admits eps up to gap * sqrt(32 log 16) ~ 9.4 * gap.
    const double eps = 9.0 * (s - r);
    const NearOrthogonalSetReport rep = check_lemma22_bound(f, batch, eps, r, s);
    REQUIRE(rep.applicable);
    CHECK(rep.out_fraction < 0.25);
    CHECK(rep.set_size == 16); // all pairs are uncorrelated
    CHECK(rep.bound == Catch::Approx(std::exp(81.0 / 32.0)));
    CHECK(rep.pass);
}

TEST_CASE("cardinality bound reports why it does not apply") {
    const GaussianField f = GaussianField::independent(16);
    std::vector<FieldSample> batch;
    for (int t = 0; t < 200; ++t) batch.push_back(sample(f, 405, streams::trial(t)));

    // Interval far in the tail: most maxima fall outside it.
    const NearOrthogonalSetReport far = check_lemma22_bound(f, batch, 100.0, 50.0, 50.5);
    CHECK_FALSE(far.applicable);
    CHECK_THAT(far.reason, Catch::Matchers::ContainsSubstring("not below 1/4"));

    // Interval wider than an eighth of the tolerance.
    const NearOrthogonalSetReport wide = check_lemma22_bound(f, batch, 1.0, -10.0, 10.0);
    CHECK_FALSE(wide.applicable);
    CHECK_THAT(wide.reason, Catch::Matchers::ContainsSubstring("eps/8"));

    CHECK_THROWS_AS(check_lemma22_bound(f, batch, 1.0, 2.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(check_lemma22_bound(f, batch, 0.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(check_lemma22_bound(f, {}, 1.0, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("argmax stability for a single point is the exact normal tail") {
    // With N = 1 the argmax is index 0 and the first coupled copy there is
    // standard normal, so the event probability is the tail at (1-delta) m_hat.
    const ArgmaxStabilityReport rep =
        check_corollary25(GaussianField::independent(1), 0.5, 4'000, 9, 1, 2'000);
    CHECK(rep.alpha == Catch::Approx(1.0 - 0.5 / 4.0));
    const double exact = normal_tail((1.0 - 0.5) * rep.m_hat);
    CHECK(std::abs(rep.freq - exact) <= 4.0 * rep.se + 1e-9);
    CHECK(rep.ci.contains(rep.freq));
    CHECK(rep.defect == Catch::Approx(1.0 - rep.freq).margin(1e-12));
    CHECK_THROWS_AS(check_corollary25(GaussianField::independent(1), 0.0, 100, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(check_corollary25(GaussianField::independent(1), 1.5, 100, 1),
                    std::invalid_argument);
}
