#include <doctest.h>

#include <cmath>

#include "dce/ensembles.hpp"
#include "support.hpp"

using namespace dce;

TEST_CASE("uniform_bell_mixture") {
    const EnsembleSpec spec = uniform_bell_mixture();
    REQUIRE(spec.components.size() == 4);
    double total = 0.0;
    for (const auto& component : spec.components) {
        CHECK(component.weight == doctest::Approx(0.25));
        total += component.weight;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    const Basis4 bell = bell_basis();
    for (int a = 0; a < 4; ++a)
        for (int k = 0; k < 4; ++k)
            CHECK(spec.components[a].state.amps[k] == bell.rows[a].amps[k]);
    CHECK(validate(spec).empty());
}

TEST_CASE("product_mixture") {
    SUBCASE("uniform alpha at zero angles is the computational mixture") {
        const EnsembleSpec spec =
            product_mixture(AlphaTable{{0.25, 0.25, 0.25, 0.25}}, {0.0, 0.0});
        REQUIRE(spec.components.size() == 4);
        for (int k = 0; k < 4; ++k) {
            CHECK(spec.components[k].weight == doctest::Approx(0.25));
            for (int m = 0; m < 4; ++m)
                CHECK(spec.components[k].state.amps[m].real() ==
                      doctest::Approx(k == m ? 1.0 : 0.0));
        }
        CHECK(validate(spec).empty());
    }
    SUBCASE("degenerate alpha gives a single effective component") {
        const EnsembleSpec spec = product_mixture(AlphaTable{{1.0, 0.0, 0.0, 0.0}},
                                                  {0.7, 1.1});
        CHECK(spec.components[0].weight == doctest::Approx(1.0));
        const Basis4 pb = product_basis({0.7, 1.1});
        for (int m = 0; m < 4; ++m)
            CHECK(spec.components[0].state.amps[m] == pb.rows[0].amps[m]);
    }
    SUBCASE("alpha (0.5, 0.5, 0, 0): particle 1 fixed to V at zero angles") {
        const EnsembleSpec spec =
            product_mixture(AlphaTable{{0.5, 0.5, 0.0, 0.0}}, {0.0, 0.0});
        CHECK(spec.components[0].weight == doctest::Approx(0.5));
        CHECK(spec.components[1].weight == doctest::Approx(0.5));
        CHECK(spec.components[0].state.amps[0].real() == doctest::Approx(1.0));  // |VV>
        CHECK(spec.components[1].state.amps[1].real() == doctest::Approx(1.0));  // |VH>
    }
    SUBCASE("invalid alpha is rejected") {
        CHECK_THROWS_AS(product_mixture(AlphaTable{{-0.1, 0.5, 0.3, 0.3}}, {0.0, 0.0}),
                        std::invalid_argument);
        CHECK_THROWS_AS(product_mixture(AlphaTable{{0.5, 0.6, 0.0, 0.0}}, {0.0, 0.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("maximally_mixed_products") {
    const EnsembleSpec spec = maximally_mixed_products();
    REQUIRE(spec.components.size() == 4);
    CHECK(validate(spec).empty());
    for (const auto& component : spec.components)
        CHECK(component.weight == doctest::Approx(0.25));
}

TEST_CASE("validate reports named violations") {
    SUBCASE("empty ensemble") {
        CHECK(validate(EnsembleSpec{}).size() == 1);
    }
    SUBCASE("bad weight sum") {
        EnsembleSpec spec;
        PureState4 vv{{1.0, 0.0, 0.0, 0.0}};
        spec.components.push_back({0.5, vv});
        spec.components.push_back({0.6, vv});
        const auto violations = validate(spec);
        REQUIRE(violations.size() == 1);
        CHECK(violations[0].find("weights sum to 1.1") != std::string::npos);
    }
    SUBCASE("unnormalized component state") {
        EnsembleSpec spec;
        spec.components.push_back({1.0, PureState4{{0.8, 0.0, 0.0, 0.0}}});
        const auto violations = validate(spec);
        REQUIRE(violations.size() == 1);
        CHECK(violations[0].find("component 1 state norm 0.8") != std::string::npos);
    }
    SUBCASE("negative weight") {
        EnsembleSpec spec;
        PureState4 vv{{1.0, 0.0, 0.0, 0.0}};
        spec.components.push_back({-0.5, vv});
        spec.components.push_back({1.5, vv});
        const auto violations = validate(spec);
        CHECK(!violations.empty());
        CHECK(violations[0].find("negative") != std::string::npos);
    }
}

TEST_CASE("alpha validation") {
    CHECK(validate(AlphaTable{{0.25, 0.25, 0.25, 0.25}}).empty());
    CHECK(!validate(AlphaTable{{0.5, 0.7, 0.0, 0.0}}).empty());
    CHECK(!validate(AlphaTable{{-0.25, 0.5, 0.5, 0.25}}).empty());
}

TEST_CASE("constructed ensembles always validate clean") {
    RngStream rng(424242, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const EnsembleSpec spec = product_mixture(testsupport::random_alpha(rng),
                                                  testsupport::random_angles(rng));
        CHECK(validate(spec).empty());
    }
}

TEST_CASE("normalized rescales weights") {
    EnsembleSpec spec;
    PureState4 vv{{1.0, 0.0, 0.0, 0.0}};
    PureState4 hh{{0.0, 0.0, 0.0, 1.0}};
    spec.components.push_back({2.0, vv});
    spec.components.push_back({6.0, hh});
    const EnsembleSpec scaled = normalized(spec);
    CHECK(scaled.components[0].weight == doctest::Approx(0.25));
    CHECK(scaled.components[1].weight == doctest::Approx(0.75));
    CHECK_THROWS_AS(normalized(EnsembleSpec{}), std::invalid_argument);
}
