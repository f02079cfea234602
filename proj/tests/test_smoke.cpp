#include <catch2/catch_amalgamated.hpp>

#include "gfe/verify.hpp"

TEST_CASE("library headers compose") {
    const gfe::SupremumStats st =
        gfe::estimate_sup_stats(gfe::GaussianField::independent(2), 2'000, 7, 1, {50, 0.95});
    CHECK(st.m_hat > 0.3);
    CHECK(st.m_hat < 0.9);
}
