#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ncint/flows.hpp"
#include "ncint/parse.hpp"
#include "ncint/poisson.hpp"

using namespace ncint;

namespace {

constexpr double kPi = 3.14159265358979323846;

VectorField oscillator_field() {
    PoissonStructure w({"q", "p"});
    w.set_upper(0, 1, Expr(1.0));
    return hamiltonian_vector_field(parse_expression("0.5*(q^2 + p^2)"), w);
}

} // namespace

TEST_CASE("oscillator orbit matches the closed form") {
    VectorField v = oscillator_field();
    FlowTrajectory traj = integrate_flow(v, std::vector<double>{1.0, 0.0}, 10.0);
    REQUIRE(traj.states.size() > 100);
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == Catch::Approx(10.0).margin(1e-12));
    for (size_t s = 0; s < traj.states.size(); ++s) {
        double t = traj.times[s];
        CHECK(traj.states[s][0] == Catch::Approx(std::cos(t)).margin(1e-7));
        CHECK(traj.states[s][1] == Catch::Approx(std::sin(t)).margin(1e-7));
    }
    // energy conservation along the recorded samples
    std::vector<double> drift = invariant_drift(traj, {parse_expression("0.5*(q^2 + p^2)")});
    CHECK(drift[0] < 1e-8);
}

TEST_CASE("trajectories record every accepted sample within max_dt") {
    VectorField v = oscillator_field();
    FlowTrajectory traj =
        integrate_flow(v, std::vector<double>{1.0, 0.0}, 5.0, FlowOptions{1e-10, 0.02});
    for (size_t s = 1; s < traj.times.size(); ++s) {
        double dt = traj.times[s] - traj.times[s - 1];
        CHECK(dt > 0.0);
        CHECK(dt <= 0.02 + 1e-12);
    }
    CHECK(traj.stats.accepted == static_cast<std::int64_t>(traj.times.size()) - 1);
    CHECK(traj.stats.max_error_estimate <= 1.0);
}

TEST_CASE("integration options are validated") {
    VectorField v = oscillator_field();
    CHECK_THROWS_AS(integrate_flow(v, std::vector<double>{1.0, 0.0}, 0.0), ValidationError);
    CHECK_THROWS_AS(integrate_flow(v, std::vector<double>{1.0}, 1.0), ValidationError);
}

TEST_CASE("flows that leave the chart throw with the escape time") {
    // qdot = 1, pdot = sqrt(1 - q): undefined once q exceeds 1
    VectorField v({"q", "p"}, {Expr(1.0), parse_expression("sqrt(1 - q)")});
    try {
        integrate_flow(v, std::vector<double>{0.0, 0.0}, 2.0);
        FAIL("expected FlowEscapedChart");
    } catch (const FlowEscapedChart& e) {
        CHECK(e.time > 0.5);
        CHECK(e.time <= 1.01);
    }
}

TEST_CASE("finite-time blowup underflows the step size") {
    // xdot = x^2 blows up at t = 1 from x(0) = 1
    NumericField f{1, [](std::span<const double> x, std::span<double> out) {
                       out[0] = x[0] * x[0];
                   }};
    CHECK_THROWS_AS(integrate_flow(f, std::vector<double>{1.0}, 2.0, FlowOptions{1e-10, 0.01}),
                    StepUnderflow);
}

TEST_CASE("invariant drift reports the failure time for domain exits") {
    VectorField v({"q", "p"}, {Expr(1.0), Expr(0.0)});
    FlowTrajectory traj = integrate_flow(v, std::vector<double>{0.5, 0.0}, 1.0);
    // sqrt(0.8 - q) is undefined once q > 0.8 along the trajectory
    try {
        invariant_drift(traj, {parse_expression("sqrt(0.8 - q)")});
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("at trajectory time") != std::string::npos);
    }
}

TEST_CASE("period detection refines the oscillator period") {
    VectorField v = oscillator_field();
    auto res = detect_period(v, std::vector<double>{1.0, 0.0}, 10.0, 1e-4);
    REQUIRE(res.has_value());
    CHECK(std::abs(res->period - 2 * kPi) < 1e-5);
    CHECK(res->recurrence_distance < 1e-4);
}

TEST_CASE("period detection rejects equilibria and non-recurrent flows") {
    VectorField v = oscillator_field();
    CHECK_THROWS_AS(detect_period(v, std::vector<double>{0.0, 0.0}, 10.0, 1e-4), FixedPoint);

    VectorField drift({"q", "p"}, {Expr(1.0), Expr(0.0)});
    auto res = detect_period(drift, std::vector<double>{0.0, 0.0}, 10.0, 1e-4);
    CHECK_FALSE(res.has_value());
}

TEST_CASE("angle wrapping closes orbits on the circle") {
    // thetadot = 1 on a 1-dim chart: recurrent only modulo 2 pi
    VectorField v({"theta"}, {Expr(1.0)});
    auto linear = detect_period(v, std::vector<double>{0.0}, 10.0, 1e-4);
    CHECK_FALSE(linear.has_value());
    auto wrapped = detect_period(v, std::vector<double>{0.0}, 10.0, 1e-4,
                                 RecurrenceMetric{{true}});
    REQUIRE(wrapped.has_value());
    CHECK(std::abs(wrapped->period - 2 * kPi) < 1e-5);
}

TEST_CASE("classification of basic direction sets") {
    // single periodic direction: T^1
    std::vector<NumericField> osc{numeric_field(oscillator_field())};
    TopologyReport t1 = classify_directions(osc, std::vector<double>{1.0, 0.0}, 50.0, 1e-4);
    CHECK(t1.m == 1);
    CHECK(t1.r == 1);
    CHECK(t1.classification == "T^1");
    REQUIRE(t1.directions.size() == 1);
    CHECK(t1.directions[0].periodic);

    // single drifting direction: R^1
    VectorField drift({"q", "p"}, {Expr(1.0), Expr(0.0)});
    std::vector<NumericField> lin{numeric_field(drift)};
    TopologyReport r1 = classify_directions(lin, std::vector<double>{0.0, 0.0}, 50.0, 1e-4);
    CHECK(r1.r == 0);
    CHECK(r1.classification == "R^1");
    CHECK(r1.directions[0].monotone_escape);
    CHECK(r1.note == "sampling heuristic, not a proof");
}

TEST_CASE("classification of a mixed cylinder") {
    // (q1, p1) rotation plus q2 drift on a 3-dim chart
    VectorField rot({"q1", "p1", "q2"}, {parse_expression("-p1"), Expr::var("q1"), Expr(0.0)});
    VectorField slide({"q1", "p1", "q2"}, {Expr(0.0), Expr(0.0), Expr(1.0)});
    std::vector<NumericField> fields{numeric_field(rot), numeric_field(slide)};
    TopologyReport rep =
        classify_directions(fields, std::vector<double>{1.0, 0.0, 0.0}, 50.0, 1e-4);
    CHECK(rep.m == 2);
    CHECK(rep.r == 1);
    CHECK(rep.classification == "R^1 x T^1");
    // the unit rotation direction is the periodic one
    REQUIRE(rep.directions.size() >= 2);
    CHECK(rep.directions[0].coefficients == std::vector<int>{1, 0});
    CHECK(rep.directions[0].periodic);
    CHECK_FALSE(rep.directions[1].periodic);
}

TEST_CASE("classification handles equilibrium directions gracefully") {
    VectorField zero({"q", "p"}, {Expr(0.0), Expr(0.0)});
    std::vector<NumericField> fields{numeric_field(zero)};
    TopologyReport rep = classify_directions(fields, std::vector<double>{1.0, 0.0}, 10.0, 1e-4);
    CHECK(rep.r == 0);
    REQUIRE(rep.directions.size() == 1);
    CHECK_FALSE(rep.directions[0].periodic);
    CHECK(rep.directions[0].note.find("equilibrium") != std::string::npos);
}

TEST_CASE("combined fields form integer linear combinations") {
    VectorField a({"x"}, {Expr(1.0)});
    VectorField b({"x"}, {Expr(2.0)});
    NumericField combo = combine_fields({numeric_field(a), numeric_field(b)}, {2, -1});
    std::vector<double> out(1);
    combo.eval(std::vector<double>{0.0}, out);
    CHECK(out[0] == 0.0);
    CHECK_THROWS_AS(combine_fields({numeric_field(a)}, {1, 2}), ValidationError);

    // bare numeric fields carry no coordinate names, so symbolic
    // invariants cannot be evaluated along their trajectories
    FlowTrajectory traj = integrate_flow(numeric_field(a), std::vector<double>{0.0}, 1.0);
    CHECK(traj.coords.empty());
    CHECK_THROWS_AS(invariant_drift(traj, {Expr::var("x")}), ValidationError);
}
