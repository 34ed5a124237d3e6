#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ncint/cli.hpp"

using namespace ncint;
using cli::RunConfig;

namespace {

struct Run {
    int rc = 0;
    std::string out;
    std::string err;
};

template <typename Fn>
Run capture(Fn&& fn) {
    std::ostringstream out, err;
    Run r;
    r.rc = fn(out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string data_path(const std::string& name) {
    return std::string(NCINT_DATA_DIR) + "/" + name;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

} // namespace

TEST_CASE("verify command reports and round-trips deterministically") {
    RunConfig config;
    config.builtin = "so21";
    Run first = capture([&](auto& o, auto& e) { return cli::cmd_verify(config, o, e); });
    CHECK(first.rc == 0);
    CHECK(first.out.find("\"system\": \"so21\"") != std::string::npos);
    CHECK(first.out.find("\"pass\": true") != std::string::npos);
    CHECK(first.out.find("\"name\": \"jacobi\"") != std::string::npos);

    Run second = capture([&](auto& o, auto& e) { return cli::cmd_verify(config, o, e); });
    CHECK(second.rc == 0);
    CHECK(second.out == first.out);

    // a different seed still passes but samples different points
    RunConfig reseeded = config;
    reseeded.seed = 99;
    Run third = capture([&](auto& o, auto& e) { return cli::cmd_verify(reseeded, o, e); });
    CHECK(third.rc == 0);
    CHECK(third.out.find("\"seed\": 99") != std::string::npos);
}

TEST_CASE("verify flags corrupted systems with a nonzero exit") {
    RunConfig config;
    config.system_file = data_path("so21_bad_closure.system");
    Run r = capture([&](auto& o, auto& e) { return cli::cmd_verify(config, o, e); });
    CHECK(r.rc == 1);
    CHECK(r.out.find("\"pass\": false") != std::string::npos);
}

TEST_CASE("verify usage errors exit with 2") {
    Run none = capture([&](auto& o, auto& e) { return cli::cmd_verify(RunConfig{}, o, e); });
    CHECK(none.rc == 2);
    CHECK(none.err.find("error:") != std::string::npos);

    RunConfig both;
    both.builtin = "so21";
    both.system_file = data_path("so21.system");
    Run b = capture([&](auto& o, auto& e) { return cli::cmd_verify(both, o, e); });
    CHECK(b.rc == 2);

    RunConfig missing;
    missing.system_file = "/no/such/file.system";
    Run m = capture([&](auto& o, auto& e) { return cli::cmd_verify(missing, o, e); });
    CHECK(m.rc == 2);
    CHECK(m.err.find("cannot open file") != std::string::npos);

    RunConfig badfmt;
    badfmt.builtin = "so21";
    badfmt.format = "csv";
    Run f = capture([&](auto& o, auto& e) { return cli::cmd_verify(badfmt, o, e); });
    CHECK(f.rc == 2);
}

TEST_CASE("verify writes the report to a file when asked") {
    RunConfig config;
    config.builtin = "oscillator";
    Run inmem = capture([&](auto& o, auto& e) { return cli::cmd_verify(config, o, e); });
    REQUIRE(inmem.rc == 0);

    std::string path = "cli_verify_out.json";
    config.out_path = path;
    Run tofile = capture([&](auto& o, auto& e) { return cli::cmd_verify(config, o, e); });
    CHECK(tofile.rc == 0);
    CHECK(tofile.out.empty());
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == inmem.out);
    in.close();
    std::remove(path.c_str());

    config.out_path = "/no/such/dir/report.json";
    Run bad = capture([&](auto& o, auto& e) { return cli::cmd_verify(config, o, e); });
    CHECK(bad.rc == 2);
}

TEST_CASE("bracket command prints the symbolic bracket and sample values") {
    RunConfig config;
    config.builtin = "so21-coalgebra";
    Run r = capture(
        [&](auto& o, auto& e) { return cli::cmd_bracket(config, "x1", "x2", o, e); });
    REQUIRE(r.rc == 0);
    std::vector<std::string> lines = lines_of(r.out);
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "-x3");
    for (size_t i = 1; i < lines.size(); ++i) {
        CHECK(lines[i].rfind("at (x1 = ", 0) == 0);
        CHECK(lines[i].find("): ") != std::string::npos);
    }

    // brackets are antisymmetric, so {f, f} collapses to zero
    Run self = capture(
        [&](auto& o, auto& e) { return cli::cmd_bracket(config, "x2", "x2", o, e); });
    REQUIRE(self.rc == 0);
    CHECK(lines_of(self.out)[0] == "0");
}

TEST_CASE("bracket command resolves integral names on the system chart") {
    RunConfig config;
    config.builtin = "so21";
    Run r = capture(
        [&](auto& o, auto& e) { return cli::cmd_bracket(config, "H1", "gamma", o, e); });
    REQUIRE(r.rc == 0);
    CHECK(lines_of(r.out)[0] == "-1");

    Run err = capture(
        [&](auto& o, auto& e) { return cli::cmd_bracket(config, "H1 +", "gamma", o, e); });
    CHECK(err.rc == 2);
    CHECK(err.err.find("error:") != std::string::npos);
}

TEST_CASE("bracket values outside the expression domain are labeled") {
    RunConfig config;
    config.builtin = "so21-coalgebra";
    Run r = capture([&](auto& o, auto& e) {
        return cli::cmd_bracket(config, "sqrt(x1 - 10)", "x2", o, e);
    });
    REQUIRE(r.rc == 0);
    std::vector<std::string> lines = lines_of(r.out);
    REQUIRE(lines.size() == 6);
    int undefined = 0;
    for (size_t i = 1; i < lines.size(); ++i)
        if (lines[i].find("undefined (outside the expression domain)") != std::string::npos)
            ++undefined;
    CHECK(undefined == 5);
}

TEST_CASE("flow command emits a CSV trajectory and drift summary") {
    RunConfig config;
    config.builtin = "oscillator";
    config.x0 = {1.0, 0.0};
    config.t_end = 1.0;
    Run r = capture([&](auto& o, auto& e) { return cli::cmd_flow(config, o, e); });
    REQUIRE(r.rc == 0);
    std::vector<std::string> lines = lines_of(r.out);
    REQUIRE(lines.size() > 10);
    CHECK(lines[0] == "t,q,p");

    // final sample: (cos 1, sin 1) at t = 1
    std::istringstream last(lines.back());
    std::string tok;
    std::vector<double> row;
    while (std::getline(last, tok, ',')) row.push_back(std::stod(tok));
    REQUIRE(row.size() == 3);
    CHECK(row[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(row[1] == Catch::Approx(std::cos(1.0)).margin(1e-9));
    CHECK(row[2] == Catch::Approx(std::sin(1.0)).margin(1e-9));

    CHECK(r.err.find("# drift H1 = ") != std::string::npos);
    CHECK(r.err.find("# steps accepted = ") != std::string::npos);
}

TEST_CASE("flow selectors agree where they should") {
    RunConfig config;
    config.builtin = "oscillator";
    config.x0 = {1.0, 0.0};
    config.t_end = 2.0;
    Run by_index = capture([&](auto& o, auto& e) { return cli::cmd_flow(config, o, e); });
    REQUIRE(by_index.rc == 0);

    RunConfig by_expr = config;
    by_expr.field = "expr:H1";
    Run expr_run = capture([&](auto& o, auto& e) { return cli::cmd_flow(by_expr, o, e); });
    REQUIRE(expr_run.rc == 0);
    CHECK(expr_run.out == by_index.out);

    // the oscillator's fiber direction is its own energy flow
    RunConfig by_casimir = config;
    by_casimir.field = "casimir:1";
    Run cas_run = capture([&](auto& o, auto& e) { return cli::cmd_flow(by_casimir, o, e); });
    REQUIRE(cas_run.rc == 0);
    CHECK(cas_run.out == by_index.out);
}

TEST_CASE("flow command validates its inputs") {
    RunConfig config;
    config.builtin = "oscillator";
    config.x0 = {1.0};
    Run short_x0 = capture([&](auto& o, auto& e) { return cli::cmd_flow(config, o, e); });
    CHECK(short_x0.rc == 2);

    config.x0 = {1.0, 0.0};
    config.field = "orbit:1";
    Run bad_sel = capture([&](auto& o, auto& e) { return cli::cmd_flow(config, o, e); });
    CHECK(bad_sel.rc == 2);

    config.field = "integral:5";
    Run oob = capture([&](auto& o, auto& e) { return cli::cmd_flow(config, o, e); });
    CHECK(oob.rc == 2);
    CHECK(oob.err.find("index out of range") != std::string::npos);

    config.field = "integral:1";
    config.t_end = -1.0;
    Run bad_t = capture([&](auto& o, auto& e) { return cli::cmd_flow(config, o, e); });
    CHECK(bad_t.rc == 2);

    config.t_end = 1.0;
    config.format = "xml";
    Run bad_fmt = capture([&](auto& o, auto& e) { return cli::cmd_flow(config, o, e); });
    CHECK(bad_fmt.rc == 2);
}

TEST_CASE("flow command emits JSON on request") {
    RunConfig config;
    config.builtin = "oscillator";
    config.x0 = {1.0, 0.0};
    config.t_end = 0.5;
    config.format = "json";
    Run r = capture([&](auto& o, auto& e) { return cli::cmd_flow(config, o, e); });
    REQUIRE(r.rc == 0);
    CHECK(r.out.find("\"coords\": [") != std::string::npos);
    CHECK(r.out.find("\"q\"") != std::string::npos);
    CHECK(r.out.find("\"times\": [") != std::string::npos);
    CHECK(r.out.find("\"states\": [") != std::string::npos);
}

TEST_CASE("classify command prints the fiber label") {
    RunConfig config;
    config.builtin = "oscillator";
    config.x0 = {1.0, 0.0};
    config.t_max = 50.0;
    Run r = capture([&](auto& o, auto& e) { return cli::cmd_classify(config, o, e); });
    REQUIRE(r.rc == 0);
    CHECK(r.out.find("\"classification\": \"T^1\"") != std::string::npos);
    CHECK(r.out.find("\"periodic\": true") != std::string::npos);
    CHECK(r.out.find("\"note\": \"sampling heuristic, not a proof\"") != std::string::npos);

    config.x0 = {1.0};
    Run bad = capture([&](auto& o, auto& e) { return cli::cmd_classify(config, o, e); });
    CHECK(bad.rc == 2);
}

TEST_CASE("canonicalize echoes the canonical form of a file") {
    RunConfig config;
    config.system_file = data_path("so21.system");
    Run r = capture([&](auto& o, auto& e) { return cli::cmd_canonicalize(config, o, e); });
    REQUIRE(r.rc == 0);
    CHECK(r.out == serialize_system(builtin_so21()));
}
