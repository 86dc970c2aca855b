#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tap/measures.hpp"
#include "tap/rng.hpp"

using namespace tap;

namespace {

AtomicMeasure random_measure(Rng& rng, int max_atoms) {
    int n = 1 + static_cast<int>(rng.uniform() * max_atoms);
    std::vector<Atom> atoms;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double w = 0.05 + rng.uniform();
        atoms.push_back({rng.uniform(), w});
        total += w;
    }
    for (Atom& a : atoms) a.w /= total;
    return AtomicMeasure(atoms);
}

AtomicMeasure random_prefix(Rng& rng) {
    PrefixSpec s;
    double u = 0.1 + 0.5 * rng.uniform();
    double q = 0.2 + 0.5 * rng.uniform();
    s.u = {u};
    s.q = {q};
    double w1 = (1.0 - u) * (0.3 + 0.7 * rng.uniform());
    s.tail = {{q, w1}};
    if (w1 < 1.0 - u - 1e-9) s.tail.push_back({q + (1.0 - q) * rng.uniform(), 1.0 - u - w1});
    return assemble_prefix(s);
}

}  // namespace

TEST_CASE("assemble_prefix examples") {
    PrefixSpec a;
    a.u = {0.3};
    a.q = {0.5};
    a.tail = {{0.5, 0.7}};
    AtomicMeasure za = assemble_prefix(a);
    REQUIRE(za.size() == 2);
    CHECK(za.atoms()[0].t == 0.0);
    CHECK(za.atoms()[0].w == doctest::Approx(0.3));
    CHECK(za.atoms()[1].t == 0.5);
    CHECK(za.atoms()[1].w == doctest::Approx(0.7));

    PrefixSpec b;
    b.u = {0.2, 0.5};
    b.q = {0.3, 0.6};
    b.tail = {{0.6, 0.5}};
    AtomicMeasure zb = assemble_prefix(b);
    REQUIRE(zb.size() == 3);
    CHECK(zb.atoms()[1].t == doctest::Approx(0.3));
    CHECK(zb.atoms()[1].w == doctest::Approx(0.3));
    CHECK(zb.cdf(0.3) == doctest::Approx(0.5));
    // jump at q_1 equals u_2 - u_1
    CHECK(zb.cdf(0.3) - zb.cdf_left(0.3) == doctest::Approx(0.3));
}

TEST_CASE("assemble_prefix rejects inconsistent tails") {
    PrefixSpec s;
    s.u = {0.3};
    s.q = {0.5};
    s.tail = {{0.5, 0.5}};  // mass 0.5 != 0.7
    CHECK_THROWS_AS(assemble_prefix(s), std::invalid_argument);
    s.tail = {{0.7, 0.7}};  // no atom at q_n
    CHECK_THROWS_AS(assemble_prefix(s), std::invalid_argument);
}

TEST_CASE("dist basics") {
    AtomicMeasure d0 = AtomicMeasure::dirac(0.0);
    AtomicMeasure d1 = AtomicMeasure::dirac(1.0);
    CHECK(dist(d0, d0) == 0.0);
    CHECK(dist(d0, d1) == doctest::Approx(1.0));
    CHECK(dist(AtomicMeasure::dirac(0.2), AtomicMeasure::dirac(0.7)) == doctest::Approx(0.5));
}

TEST_CASE("dist is a metric on random triples") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        AtomicMeasure a = random_measure(rng, 4);
        AtomicMeasure b = random_measure(rng, 4);
        AtomicMeasure c = random_measure(rng, 4);
        CHECK(dist(a, b) == doctest::Approx(dist(b, a)).epsilon(1e-15));
        CHECK(dist(a, c) <= dist(a, b) + dist(b, c) + 1e-14);
        CHECK(dist(a, a) == 0.0);
    }
}

TEST_CASE("project_at") {
    CHECK(AtomicMeasure::dirac(0.0).project_at(0.4).atoms()[0].t == doctest::Approx(0.4));
    AtomicMeasure z({{0.0, 0.3}, {0.5, 0.7}});
    AtomicMeasure p = z.project_at(0.5);
    REQUIRE(p.size() == 1);
    CHECK(p.atoms()[0].t == doctest::Approx(0.5));
    CHECK(p.atoms()[0].w == doctest::Approx(1.0));
}

TEST_CASE("project_at preserves the cdf above q and is Lipschitz in q") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        AtomicMeasure z = random_prefix(rng);
        double q = rng.uniform(), qp = rng.uniform();
        AtomicMeasure a = z.project_at(q);
        for (double t : {q, 0.5 * (q + 1.0), 1.0})
            CHECK(a.cdf(t) == doctest::Approx(z.cdf(t)).epsilon(1e-15));
        CHECK(dist(z.project_at(q), z.project_at(qp)) <= std::abs(q - qp) + 1e-12);
    }
}

TEST_CASE("cdf round trip: atoms -> cdf -> atoms") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        AtomicMeasure z = random_measure(rng, 5);
        std::vector<Atom> rebuilt;
        double prev = 0.0;
        for (const Atom& a : z.atoms()) {
            double c = z.cdf(a.t);
            rebuilt.push_back({a.t, c - prev});
            prev = c;
        }
        AtomicMeasure z2(rebuilt);
        CHECK(dist(z, z2) < 1e-14);
    }
}

TEST_CASE("integral_cdf matches breakpoint sum") {
    AtomicMeasure z({{0.0, 0.25}, {0.4, 0.25}, {0.8, 0.5}});
    // int_0^1 cdf = 0.25*0.4 + 0.5*0.4 + 1.0*0.2
    CHECK(z.integral_cdf(0.0, 1.0) == doctest::Approx(0.25 * 0.4 + 0.5 * 0.4 + 0.2));
    CHECK(z.integral_cdf(0.4, 1.0) == doctest::Approx(0.5 * 0.4 + 0.2));
    CHECK(z.integral_cdf(0.2, 0.6) == doctest::Approx(0.25 * 0.2 + 0.5 * 0.2));
}

TEST_CASE("merge and drop hygiene") {
    AtomicMeasure z({{0.3, 0.5}, {0.3 + 1e-13, 0.5}});
    CHECK(z.size() == 1);
    AtomicMeasure z2({{0.2, 1.0 - 1e-15}, {0.9, 1e-15}});
    CHECK(z2.size() == 1);
    CHECK(z2.cdf(0.5) == doctest::Approx(1.0));
}
