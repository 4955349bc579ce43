#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "safemdp/model_io.hpp"

#include <cstdio>
#include <stdexcept>

using namespace safemdp;
using namespace safemdp::fixtures;

TEST_CASE("parse_model") {
    const char* text = R"({
      "n_states": 2, "n_actions": 1, "gamma": 0.5, "r_max": 1.0,
      "reward": [[0.0], [1.0]],
      "transition": [[[0.0, 1.0]], [[0.0, 1.0]]],
      "initial_dist": [1.0, 0.0]
    })";
    ModelDocument doc = parse_model(text);
    CHECK(doc.mdp.n_states == 2);
    CHECK(doc.mdp.r(1, 0) == 1.0);
    CHECK(doc.mdp.row(0, 0)[1] == 1.0);
    CHECK_FALSE(doc.counts.has_value());
    CHECK_FALSE(doc.error.has_value());

    Policy pi = Policy::from_actions({0, 0}, 1);
    CHECK(return_of(doc.mdp, pi) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("parse_model errors") {
    CHECK_THROWS_AS(parse_model("not json"), std::invalid_argument);
    CHECK_THROWS_AS(parse_model("{}"), std::invalid_argument);
    CHECK_THROWS_AS(parse_model(R"({
      "n_states": 2, "n_actions": 1, "gamma": 0.5, "r_max": 1.0,
      "reward": [[0.0], [1.0]],
      "transition": [[[0.3, 0.3]], [[0.0, 1.0]]],
      "initial_dist": [1.0, 0.0]
    })"),
                    std::invalid_argument); // row not stochastic
    CHECK_THROWS_AS(parse_model(R"({
      "n_states": 2, "n_actions": 1, "gamma": 0.5, "r_max": 1.0,
      "reward": [[0.0]],
      "transition": [[[0.0, 1.0]], [[0.0, 1.0]]],
      "initial_dist": [1.0, 0.0]
    })"),
                    std::invalid_argument); // dimension mismatch
}

TEST_CASE("serialize round-trip is exact") {
    RandomInstance inst = random_instance(60, 4, 3);
    ModelDocument doc;
    doc.mdp = inst.set.nominal;
    doc.error = inst.set.error;
    CountTable c;
    c.n_states = 4;
    c.n_actions = 3;
    c.counts.assign(std::size_t(4) * 3 * 4, 0);
    c.counts[5] = 123456789;
    doc.counts = c;

    std::string text = serialize_model(doc);
    ModelDocument back = parse_model(text);
    CHECK(back.mdp.reward == doc.mdp.reward);
    CHECK(back.mdp.transition == doc.mdp.transition);
    CHECK(back.mdp.initial_dist == doc.mdp.initial_dist);
    CHECK(back.mdp.discount == doc.mdp.discount);
    CHECK(back.mdp.r_max == doc.mdp.r_max);
    REQUIRE(back.counts.has_value());
    CHECK(back.counts->counts == doc.counts->counts);
    REQUIRE(back.error.has_value());
    CHECK(back.error->budget == doc.error->budget);
}

TEST_CASE("file round-trip") {
    ModelDocument doc;
    doc.mdp = chain2_with_b();
    const std::string path = "test_model_io_roundtrip.json";
    save_model(doc, path);
    ModelDocument back = load_model(path);
    CHECK(back.mdp.reward == doc.mdp.reward);
    CHECK(back.mdp.transition == doc.mdp.transition);
    CHECK_THROWS_AS(load_model("does_not_exist.json"), std::invalid_argument);
    std::remove(path.c_str());
}

TEST_CASE("parse_policy") {
    Policy det = parse_policy(R"({"actions": [1, 0]})", 2, 2);
    CHECK(det.action(0) == 1);
    CHECK(det.action(1) == 0);

    Policy sto = parse_policy(R"({"action_dist": [[0.25, 0.75], [1.0, 0.0]]})", 2, 2);
    CHECK(sto.row(0)[1] == 0.75);

    CHECK_THROWS_AS(parse_policy(R"({"actions": [1]})", 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(parse_policy(R"({"nope": 1})", 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(parse_policy(R"({"actions": [1, 5]})", 2, 2), std::invalid_argument);
}
