#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>
#include <string>

#include "ncint/systems.hpp"

using namespace ncint;

namespace {

std::string read_data_file(const std::string& name) {
    std::ifstream in(std::string(NCINT_DATA_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("serialization is a fixed point of parse") {
    for (const std::string& name : builtin_names()) {
        INFO("builtin: " << name);
        SystemDefinition sys = builtin_system(name);
        std::string text = serialize_system(sys);
        SystemDefinition reparsed = parse_system_file(text);
        CHECK(serialize_system(reparsed) == text);
    }
    CHECK_THROWS_AS(builtin_system("nope"), ValidationError);
}

TEST_CASE("the shipped hyperbolic system file matches the builtin") {
    SystemDefinition from_file = parse_system_file(read_data_file("so21.system"));
    CHECK(serialize_system(from_file) == serialize_system(builtin_so21()));
}

TEST_CASE("symplectic input derives the inverse bivector") {
    const char* text = R"(
[system]
name = canonical-pair
n = 1
k = 1
m = 0

[coordinates]
q : linear
p : linear

[structure]
kind = symplectic
W[1,2] = 1

[integrals]
H1 = 0.5*(q^2 + p^2)

[sampling]
q in [0.5, 1.5]
p in [0.5, 1.5]
)";
    SystemDefinition sys = parse_system_file(text);
    REQUIRE(sys.kind == StructureKind::Symplectic);
    REQUIRE(sys.w.has_value());
    // the form dp^dq pairs with the bracket {q,p} = -1 in this orientation
    CHECK(to_string(sys.w->upper(0, 1)) == "-1");
    // serialization keeps the symplectic form, not the derived bivector
    std::string canon = serialize_system(sys);
    CHECK(canon.find("kind = symplectic") != std::string::npos);
    CHECK(canon.find("W[1,2] = 1\n") != std::string::npos);
    CHECK(serialize_system(parse_system_file(canon)) == canon);
}

TEST_CASE("parse rejects malformed files with positions") {
    auto expect_syntax = [](const std::string& text, int line, int column) {
        try {
            parse_system_file(text);
            FAIL("expected SyntaxError");
        } catch (const SyntaxError& e) {
            CHECK(e.line == line);
            CHECK(e.column == column);
        }
    };

    // content before any section header
    expect_syntax("name = x\n", 1, 1);
    // malformed header
    expect_syntax("[structure\n", 1, 1);
    // unknown section
    expect_syntax("[flavor]\n", 1, 1);

    std::string base = "[system]\nname = t\nn = 1\nk = 1\nm = 0\n\n"
                       "[coordinates]\nq : linear\np : linear\n\n"
                       "[structure]\nkind = bivector\nW[1,2] = 1\n\n"
                       "[integrals]\nH1 = q\n\n"
                       "[sampling]\nq in [0, 1]\np in [0, 1]\n";

    // sanity: the base text itself parses
    CHECK(parse_system_file(base).name == "t");

    auto replaced = [&base](const std::string& from, const std::string& to) {
        std::string out = base;
        out.replace(out.find(from), from.size(), to);
        return out;
    };

    // lower-triangle structure entry, line 13 in the base layout
    expect_syntax(replaced("W[1,2] = 1", "W[2,1] = 1"), 13, 1);
    // unknown structure kind: value starts at column 8 of line 12
    expect_syntax(replaced("kind = bivector", "kind = banana"), 12, 8);
    // malformed expression on the structure line: value starts at column 10,
    // the error is after the dangling operator
    expect_syntax(replaced("W[1,2] = 1", "W[1,2] = 1 +"), 13, 13);
    // bad coordinate kind: after the colon of line 8
    expect_syntax(replaced("q : linear", "q : radial"), 8, 4);
    // unknown key inside [system]
    expect_syntax(replaced("name = t", "name = t\nflavor = mild"), 3, 1);
    // malformed integer in [system]
    expect_syntax(replaced("n = 1", "n = one"), 3, 5);
    // malformed sampling range number
    expect_syntax(replaced("q in [0, 1]", "q in [lo, 1]"), 19, 7);

    auto expect_invalid = [](const std::string& text, const std::string& needle) {
        try {
            parse_system_file(text);
            FAIL("expected ValidationError for: " + needle);
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };

    expect_invalid(replaced("[integrals]\nH1 = q\n", "[integrals]\nH1 = q\nH1 = p\n"),
                   "duplicate integral H1");
    expect_invalid(replaced("H1 = q", "H2 = q"), "contiguous from H1");
    expect_invalid(replaced("H1 = q", "H1 = z"), "H1 references unknown coordinate z");
    expect_invalid(replaced("k = 1", "k = 3"), "exceeds 2n = 2");
    expect_invalid(replaced("[structure]", "[casimirs]\nC1 = x1\n\n[structure]"),
                   "declared m = 0 but 1 Casimirs given");
    {
        // duplicate coordinate: keep the sampling section consistent so the
        // coordinate check is the first to fire
        std::string dup = replaced("q : linear\np : linear", "q : linear\nq : linear");
        const std::string probe = "p in [0, 1]\n";
        dup.replace(dup.find(probe), probe.size(), "");
        expect_invalid(dup, "duplicate coordinate name: q");
    }
    expect_invalid(replaced("q in [0, 1]", "q in [1, 0.5]"), "empty sampling range");
    expect_invalid(replaced("q in [0, 1]\np in [0, 1]", "q in [0, 1]"),
                   "missing sampling range for p");
    expect_invalid(replaced("p in [0, 1]", "p in [0, 1]\nz in [0, 1]"),
                   "sampling range for unknown coordinate z");

    // a symplectic structure needs an even-dimensional chart
    std::string odd = "[system]\nname = t\nn = 1\nk = 1\nm = 0\n\n"
                      "[coordinates]\nq : linear\np : linear\ns : linear\n\n"
                      "[structure]\nkind = symplectic\nW[1,2] = 1\n\n"
                      "[integrals]\nH1 = q\n\n"
                      "[sampling]\nq in [0, 1]\np in [0, 1]\ns in [0, 1]\n";
    expect_invalid(odd, "even-dimensional chart");

    // even-dimensional but not the declared 2n
    std::string wrong_n = replaced("kind = bivector", "kind = symplectic");
    wrong_n.replace(wrong_n.find("n = 1"), 5, "n = 2");
    expect_invalid(wrong_n, "symplectic chart dimension must equal 2n");

    std::string missing_struct = "[system]\nname = t\nn = 1\nk = 1\nm = 0\n\n"
                                 "[coordinates]\nq : linear\np : linear\n\n"
                                 "[integrals]\nH1 = q\n\n"
                                 "[sampling]\nq in [0, 1]\np in [0, 1]\n";
    expect_invalid(missing_struct, "missing [structure] section");
}

TEST_CASE("angle-kind coordinates survive a round trip") {
    const char* text = R"(
[system]
name = rotor
n = 1
k = 1
m = 0

[coordinates]
J : linear
theta : angle

[structure]
kind = bivector
W[1,2] = 1

[integrals]
H1 = J

[sampling]
J in [0.5, 1.5]
theta in [0, 6.28]
)";
    SystemDefinition sys = parse_system_file(text);
    REQUIRE(sys.kinds.size() == 2);
    CHECK(sys.kinds[0] == CoordKind::Linear);
    CHECK(sys.kinds[1] == CoordKind::Angle);
    std::string canon = serialize_system(sys);
    CHECK(canon.find("theta : angle") != std::string::npos);
    CHECK(serialize_system(parse_system_file(canon)) == canon);
}

TEST_CASE("sampling is deterministic and confined to the box") {
    SystemDefinition sys = builtin_so21();
    PointList a = sample_points(sys, 42, 20);
    PointList b = sample_points(sys, 42, 20);
    PointList c = sample_points(sys, 43, 20);
    REQUIRE(a.size() == 20);
    CHECK(a == b);
    CHECK(a != c);
    for (const auto& p : a) {
        REQUIRE(p.size() == 4);
        for (size_t i = 0; i < p.size(); ++i) {
            CHECK(p[i] >= sys.box[i].lo);
            CHECK(p[i] <= sys.box[i].hi);
        }
    }
}

TEST_CASE("canonical chart verification") {
    SystemDefinition sys = builtin_so21();
    PointList points = sample_points(sys, 7, 25);

    // (r, y) is an action-angle pair, (gamma, x1) a position-momentum pair
    DarbouxChart chart = identity_chart(
        sys, {Role::Action, Role::Angle, Role::Position, Role::Momentum});
    CHECK(verify_darboux(sys, chart, points) == 0.0);

    // doubling the action doubles the bracket: deviation exactly 1
    DarbouxChart scaled = chart;
    scaled.forward[0] = Expr(2.0) * Expr::var("r");
    CHECK(verify_darboux(sys, scaled, points) == 1.0);

    // swapping the roles within a pair flips the sign: deviation 2
    DarbouxChart swapped = identity_chart(
        sys, {Role::Angle, Role::Action, Role::Position, Role::Momentum});
    CHECK(verify_darboux(sys, swapped, points) == 2.0);

    // shape validation
    CHECK_THROWS_AS(
        verify_darboux(sys, identity_chart(sys, {Role::Action, Role::Angle}), points),
        ValidationError);
    CHECK_THROWS_AS(
        verify_darboux(sys,
                       identity_chart(sys, {Role::Action, Role::Action, Role::Angle,
                                            Role::Momentum}),
                       points),
        ValidationError);
}

TEST_CASE("flows generated by functions of the integrals move only the angles") {
    SystemDefinition sys = builtin_so21();
    PointList points = sample_points(sys, 11, 6);
    DarbouxChart chart = identity_chart(
        sys, {Role::Action, Role::Angle, Role::Position, Role::Momentum});

    // the pulled-back conserved quantity generates a unit-speed angle shift
    Expr hfn = parse_expression("sqrt(x1^2 + x2^2 - x3^2)");
    ActionAngleCheck res = action_hamiltonian_check(sys, hfn, chart, points, 5.0);
    CHECK(res.pass);
    CHECK(res.max_integral_drift < 1e-8);
    CHECK(res.max_conserved_drift < 1e-8);
    CHECK(res.max_angle_residual < 1e-8);
    REQUIRE(res.angle_slopes.size() == points.size());
    for (const auto& slopes : res.angle_slopes) {
        REQUIRE(slopes.size() == 1);
        CHECK(slopes[0] == Catch::Approx(1.0).margin(1e-6));
    }

    // its square generates the shift at twice the action value
    Expr hfn2 = parse_expression("x1^2 + x2^2 - x3^2");
    ActionAngleCheck res2 = action_hamiltonian_check(sys, hfn2, chart, points, 5.0);
    CHECK(res2.pass);
    for (size_t i = 0; i < points.size(); ++i)
        CHECK(res2.angle_slopes[i][0] == Catch::Approx(2.0 * points[i][0]).margin(1e-6));
}

TEST_CASE("flows that escape the chart are reported, not crashed on") {
    const char* text = R"(
[system]
name = escaper
n = 1
k = 1
m = 1

[coordinates]
q : linear
p : linear

[structure]
kind = bivector
W[1,2] = 1

[integrals]
H1 = -p - (2/3)*(1.25 - q)^1.5

[casimirs]
C1 = x1

[sampling]
q in [0, 0.5]
p in [0, 0.5]
)";
    SystemDefinition sys = parse_system_file(text);
    PointList points = sample_points(sys, 3, 4);
    DarbouxChart chart = identity_chart(sys, {Role::Position, Role::Momentum});
    // qdot = 1, so every trajectory reaches q = 1.25 before t = 2
    ActionAngleCheck res = action_hamiltonian_check(sys, Expr::var("x1"), chart, points, 2.0);
    CHECK_FALSE(res.pass);
    REQUIRE(res.notes.size() == points.size());
    for (const std::string& note : res.notes)
        CHECK(note.find("flow left the chart") != std::string::npos);
}
